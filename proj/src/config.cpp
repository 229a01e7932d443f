#include "dlps/config.hpp"

#include "dlps/errors.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <utility>
#include <vector>

namespace dlps {

std::string_view
to_string(WorkloadKind k)
{
    switch (k) {
      case WorkloadKind::Phase: return "phase";
      case WorkloadKind::Sweep: return "sweep";
      case WorkloadKind::Trace: return "trace";
      case WorkloadKind::Idle: return "idle";
    }
    return "?";
}

PhaseConfig
RunConfig::resolved_phase() const
{
    PhaseConfig p = phase;
    std::tie(p.itt_min, p.itt_max) = itt_bounds(device, p.profile);
    if (itt_min_override)
        p.itt_min = *itt_min_override;
    if (itt_max_override)
        p.itt_max = *itt_max_override;
    p.req_size = device.geometry.burst_bytes;
    p.seed = seed;
    return p;
}

void
RunConfig::validate() const
{
    device.validate();
    controller.validate();
    switch (workload) {
      case WorkloadKind::Phase:
        resolved_phase().validate(device);
        break;
      case WorkloadKind::Sweep:
        if (sweep.ranks.empty() || sweep.page_policies.empty() ||
            sweep.profiles.empty() || sweep.bank_utils.empty() ||
            sweep.n_seq_bytes.empty())
            throw ConfigError("sweep: every axis needs at least one value");
        for (std::uint32_t r : sweep.ranks) {
            DeviceConfig d = device;
            d.geometry.ranks = r;
            d.validate();
            for (const PhaseConfig& p : sweep.phases(d))
                p.validate(d);
        }
        break;
      case WorkloadKind::Trace:
        if (trace.empty())
            throw ConfigError("workload.kind = trace needs workload.trace");
        if (!std::filesystem::is_regular_file(trace))
            throw InputError("trace file '" + trace.string() + "' not found");
        break;
      case WorkloadKind::Idle:
        if (idle_duration == 0)
            throw ConfigError("workload.idle_duration_ps must be > 0");
        break;
    }
}

namespace {

[[noreturn]] void
bad_value(std::string_view key, std::string_view value, std::string_view want)
{
    throw ConfigError("bad value '" + std::string(value) + "' for " +
                      std::string(key) + " (expected " + std::string(want) +
                      ")");
}

std::uint64_t
to_u64(std::string_view key, std::string_view v)
{
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        bad_value(key, v, "a non-negative integer");
    return out;
}

std::uint32_t
to_u32(std::string_view key, std::string_view v)
{
    const std::uint64_t x = to_u64(key, v);
    if (x > 0xffffffffULL)
        bad_value(key, v, "a 32-bit integer");
    return static_cast<std::uint32_t>(x);
}

double
to_double(std::string_view key, std::string_view v)
{
    double out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        bad_value(key, v, "a number");
    return out;
}

bool
to_bool(std::string_view key, std::string_view v)
{
    if (v == "on" || v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "off" || v == "false" || v == "0" || v == "no")
        return false;
    bad_value(key, v, "on/off");
}

std::uint32_t
to_bank_util(std::string_view key, std::string_view v)
{
    // "8" or "8/16"
    const auto slash = v.find('/');
    if (slash == std::string_view::npos)
        return to_u32(key, v);
    if (to_u32(key, v.substr(slash + 1)) != 16)
        bad_value(key, v, "k or k/16");
    return to_u32(key, v.substr(0, slash));
}

std::vector<std::string_view>
split_list(std::string_view v)
{
    std::vector<std::string_view> out;
    while (!v.empty()) {
        const auto c = v.find(',');
        std::string_view item = v.substr(0, c);
        while (!item.empty() && item.front() == ' ')
            item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ')
            item.remove_suffix(1);
        if (!item.empty())
            out.push_back(item);
        if (c == std::string_view::npos)
            break;
        v.remove_prefix(c + 1);
    }
    return out;
}

SimTime*
timing_field(Timing& t, std::string_view name)
{
    const std::pair<std::string_view, SimTime Timing::*> table[] = {
        {"tCK", &Timing::tCK},     {"tCCD", &Timing::tCCD},
        {"tRP", &Timing::tRP},     {"tRAS", &Timing::tRAS},
        {"tRCD", &Timing::tRCD},   {"tRL", &Timing::tRL},
        {"tWL", &Timing::tWL},     {"tBURST", &Timing::tBURST},
        {"tRTP", &Timing::tRTP},   {"tWR", &Timing::tWR},
        {"tRRD", &Timing::tRRD},   {"tRFC", &Timing::tRFC},
        {"tREFI", &Timing::tREFI}, {"tXP", &Timing::tXP},
        {"tXS", &Timing::tXS},     {"tCKE", &Timing::tCKE},
    };
    for (const auto& [n, m] : table)
        if (n == name)
            return &(t.*m);
    return nullptr;
}

double*
current_field(Currents& c, std::string_view name)
{
    const std::pair<std::string_view, double Currents::*> table[] = {
        {"IDD0", &Currents::IDD0},   {"IPP0", &Currents::IPP0},
        {"IDD2N", &Currents::IDD2N}, {"IDD3N", &Currents::IDD3N},
        {"IPP3N", &Currents::IPP3N}, {"IDD2P", &Currents::IDD2P},
        {"IDD3P", &Currents::IDD3P}, {"IDD5", &Currents::IDD5},
        {"IDD6", &Currents::IDD6},   {"IDD4R", &Currents::IDD4R},
        {"IDD4W", &Currents::IDD4W}, {"IPP2N", &Currents::IPP2N},
        {"IPP3P", &Currents::IPP3P}, {"IPP5", &Currents::IPP5},
        {"IPP6", &Currents::IPP6},
    };
    for (const auto& [n, m] : table)
        if (n == name)
            return &(c.*m);
    return nullptr;
}

std::uint32_t*
geometry_field(Geometry& g, std::string_view name)
{
    const std::pair<std::string_view, std::uint32_t Geometry::*> table[] = {
        {"channels", &Geometry::channels},
        {"ranks", &Geometry::ranks},
        {"banks_per_rank", &Geometry::banks_per_rank},
        {"rows_per_bank", &Geometry::rows_per_bank},
        {"row_buffer_bytes", &Geometry::row_buffer_bytes},
        {"burst_bytes", &Geometry::burst_bytes},
    };
    for (const auto& [n, m] : table)
        if (n == name)
            return &(g.*m);
    return nullptr;
}

std::filesystem::path
resolve(const std::filesystem::path& base, std::string_view v)
{
    std::filesystem::path p{std::string(v)};
    if (p.is_relative() && !base.empty())
        p = base / p;
    return p;
}

bool
ends_with(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() &&
           s.substr(s.size() - suffix.size()) == suffix;
}

void
apply_device(RunConfig& cfg, std::string_view key, std::string_view sub,
             std::string_view v)
{
    DeviceConfig& d = cfg.device;
    if (sub == "preset") {
        d = device_preset(v);
        return;
    }
    if (sub == "name") {
        d.name = std::string(v);
        return;
    }
    if (ends_with(sub, "_ps")) {
        if (SimTime* f = timing_field(d.timing, sub.substr(0, sub.size() - 3))) {
            *f = to_u64(key, v);
            return;
        }
    }
    if (ends_with(sub, "_ck")) {
        if (SimTime* f = timing_field(d.timing, sub.substr(0, sub.size() - 3))) {
            *f = to_u64(key, v) * d.timing.tCK;
            return;
        }
    }
    if (ends_with(sub, "_mA")) {
        if (double* f = current_field(d.currents, sub.substr(0, sub.size() - 3))) {
            *f = to_double(key, v) * 1e-3;
            return;
        }
    }
    if (ends_with(sub, "_A")) {
        if (double* f = current_field(d.currents, sub.substr(0, sub.size() - 2))) {
            *f = to_double(key, v);
            return;
        }
    }
    if (sub == "VDD_V") {
        d.voltages.VDD = to_double(key, v);
        return;
    }
    if (sub == "VPP_V") {
        d.voltages.VPP = to_double(key, v);
        return;
    }
    if (std::uint32_t* f = geometry_field(d.geometry, sub)) {
        *f = to_u32(key, v);
        return;
    }
    throw ConfigError("unknown key '" + std::string(key) + "'");
}

} // namespace

void
apply_setting(RunConfig& cfg, std::string_view key, std::string_view v,
              const std::filesystem::path& base_dir)
{
    const auto dot = key.find('.');
    if (dot == std::string_view::npos)
        throw ConfigError("key '" + std::string(key) +
                          "' needs a section prefix");
    const std::string_view section = key.substr(0, dot);
    const std::string_view sub = key.substr(dot + 1);

    if (section == "device") {
        apply_device(cfg, key, sub, v);
        return;
    }
    if (section == "controller") {
        ControllerConfig& c = cfg.controller;
        if (sub == "read_queue_depth")
            c.read_queue_depth = to_u32(key, v);
        else if (sub == "write_queue_depth")
            c.write_queue_depth = to_u32(key, v);
        else if (sub == "page_policy")
            c.page_policy = parse_page_policy(v);
        else if (sub == "powerdown")
            c.powerdown_enabled = to_bool(key, v);
        else if (sub == "address_map")
            c.address_map = std::string(v);
        else
            throw ConfigError("unknown key '" + std::string(key) + "'");
        return;
    }
    if (section == "workload") {
        PhaseConfig& p = cfg.phase;
        if (sub == "kind") {
            if (v == "phase")
                cfg.workload = WorkloadKind::Phase;
            else if (v == "sweep")
                cfg.workload = WorkloadKind::Sweep;
            else if (v == "trace")
                cfg.workload = WorkloadKind::Trace;
            else if (v == "idle")
                cfg.workload = WorkloadKind::Idle;
            else
                bad_value(key, v, "phase|sweep|trace|idle");
        } else if (sub == "profile") {
            p.profile = parse_density_profile(v);
        } else if (sub == "n_seq_bytes") {
            p.n_seq_bytes = to_u32(key, v);
        } else if (sub == "bank_util") {
            p.bank_util = to_bank_util(key, v);
        } else if (sub == "duration_ps") {
            p.duration = to_u64(key, v);
        } else if (sub == "itt_min_ps") {
            cfg.itt_min_override = to_u64(key, v);
        } else if (sub == "itt_max_ps") {
            cfg.itt_max_override = to_u64(key, v);
        } else if (sub == "addr_range_bytes") {
            p.addr_range = to_u64(key, v);
        } else if (sub == "trace") {
            cfg.trace = resolve(base_dir, v);
        } else if (sub == "idle_duration_ps") {
            cfg.idle_duration = to_u64(key, v);
        } else if (sub == "prime_open_bank") {
            cfg.prime_open_bank = to_bool(key, v);
        } else {
            throw ConfigError("unknown key '" + std::string(key) + "'");
        }
        return;
    }
    if (section == "run") {
        if (sub == "seed") {
            cfg.seed = to_u64(key, v);
            cfg.sweep.base_seed = cfg.seed;
        } else if (sub == "out") {
            cfg.out_dir = resolve(base_dir, v);
        } else if (sub == "drampower_trace") {
            cfg.drampower_trace = resolve(base_dir, v);
        } else {
            throw ConfigError("unknown key '" + std::string(key) + "'");
        }
        return;
    }
    if (section == "sweep") {
        SweepConfig& s = cfg.sweep;
        const auto items = split_list(v);
        if (sub == "ranks") {
            s.ranks.clear();
            for (auto i : items)
                s.ranks.push_back(to_u32(key, i));
        } else if (sub == "page_policies") {
            s.page_policies.clear();
            for (auto i : items)
                s.page_policies.push_back(parse_page_policy(i));
        } else if (sub == "profiles") {
            s.profiles.clear();
            for (auto i : items)
                s.profiles.push_back(parse_density_profile(i));
        } else if (sub == "bank_util") {
            s.bank_utils.clear();
            for (auto i : items)
                s.bank_utils.push_back(to_bank_util(key, i));
        } else if (sub == "n_seq_bytes") {
            s.n_seq_bytes.clear();
            for (auto i : items)
                s.n_seq_bytes.push_back(to_u32(key, i));
        } else if (sub == "phase_duration_ps") {
            s.phase_duration = to_u64(key, v);
        } else {
            throw ConfigError("unknown key '" + std::string(key) + "'");
        }
        return;
    }
    throw ConfigError("unknown section in key '" + std::string(key) + "'");
}

RunConfig
parse_run_config(std::istream& in, std::string_view name,
                 const std::filesystem::path& base_dir)
{
    struct Line
    {
        std::size_t no;
        std::string key, value;
    };
    std::vector<Line> lines;
    std::map<std::string, std::size_t> seen;
    std::string raw;
    std::size_t no = 0;
    auto where = [&](std::size_t n) {
        return std::string(name) + ":" + std::to_string(n) + ": ";
    };
    auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, raw)) {
        ++no;
        std::string s = strip(raw);
        if (s.empty() || s.front() == '#')
            continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where(no) + "expected 'key = value'");
        Line l{no, strip(s.substr(0, eq)), strip(s.substr(eq + 1))};
        if (l.key.empty() || l.value.empty())
            throw ConfigError(where(no) + "expected 'key = value'");
        if (auto [it, fresh] = seen.emplace(l.key, no); !fresh)
            throw ConfigError(where(no) + "duplicate key '" + l.key +
                              "' (first set on line " +
                              std::to_string(it->second) + ")");
        lines.push_back(std::move(l));
    }

    RunConfig cfg;
    auto apply = [&](const Line& l) {
        try {
            apply_setting(cfg, l.key, l.value, base_dir);
        } catch (const ConfigError& e) {
            throw ConfigError(where(l.no) + e.what());
        }
    };
    // preset first, cycle counts last
    for (const Line& l : lines)
        if (l.key == "device.preset")
            apply(l);
    for (const Line& l : lines)
        if (l.key != "device.preset" && !ends_with(l.key, "_ck"))
            apply(l);
    for (const Line& l : lines)
        if (ends_with(l.key, "_ck"))
            apply(l);
    cfg.validate();
    return cfg;
}

RunConfig
load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config '" + path.string() + "'");
    return parse_run_config(in, path.string(), path.parent_path());
}

} // namespace dlps
