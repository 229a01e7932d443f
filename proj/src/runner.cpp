#include "dlps/runner.hpp"

#include "dlps/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace dlps {

namespace {

struct Snapshot
{
    EnergyBreakdown energy;
    ControllerCounters counters;
    std::vector<std::uint64_t> refa;
    std::uint64_t injected = 0;
};

Snapshot
snapshot(const Controller& ctl, std::uint64_t injected)
{
    Snapshot s;
    s.energy = ctl.energy().breakdown();
    s.counters = ctl.counters();
    for (std::uint32_t r = 0; r < ctl.ranks(); ++r)
        s.refa.push_back(ctl.rank_counters(r).refa);
    s.injected = injected;
    return s;
}

std::string
config_id(std::uint32_t ranks, const ControllerConfig& c)
{
    std::string id = MemoryConfig{ranks, c.page_policy}.label();
    if (!c.powerdown_enabled)
        id += "-pdoff";
    return id;
}

ReportRow
make_row(const Controller& ctl, const Snapshot& prev, const Snapshot& cur,
         SimTime start, SimTime end)
{
    ReportRow row;
    row.ranks = ctl.ranks();
    row.page_policy = ctl.config().page_policy;
    row.powerdown = ctl.config().powerdown_enabled;
    row.config_id = config_id(row.ranks, ctl.config());
    row.start = start;
    row.end = end;
    for (std::uint32_t r = 0; r < ctl.ranks(); ++r) {
        const Residency res =
            accumulate_residency(ctl.rank(r).history(), start, end);
        row.rank_residency.push_back(res);
        row.residency += res;
        const auto& epochs = ctl.rank_counters(r).refresh_epochs;
        const auto n = static_cast<std::uint64_t>(
            std::count_if(epochs.begin(), epochs.end(), [&](SimTime t) {
                return t >= start && t < end;
            }));
        row.rank_refresh_epochs.push_back(n);
        row.refresh_epochs += n;
        row.rank_refa.push_back(cur.refa[r] - prev.refa[r]);
        row.refa += cur.refa[r] - prev.refa[r];
    }
    row.energy = cur.energy - prev.energy;
    const ControllerCounters& a = prev.counters;
    const ControllerCounters& b = cur.counters;
    row.requests = cur.injected - prev.injected;
    row.completed = (b.reads_done + b.writes_done) - (a.reads_done + a.writes_done);
    row.row_hits = b.row_hits - a.row_hits;
    row.row_misses = b.row_misses - a.row_misses;
    row.idle_one_event = b.idle_one_event - a.idle_one_event;
    row.idle_one_precharge = b.idle_one_precharge - a.idle_one_precharge;
    const double dur = static_cast<double>(end - start);
    row.avg_read_queue = static_cast<double>(
        (b.read_queue_integral - a.read_queue_integral) / dur);
    row.bus_utilization =
        static_cast<double>(b.data_bus_busy - a.data_bus_busy) / dur;
    row.exec_time =
        b.last_completion_at >= start ? b.last_completion_at - start : 0;
    return row;
}

void
finish(RunResult& res, Controller& ctl, SimTime end)
{
    res.end = end;
    res.online_energy = ctl.energy().breakdown();
    res.histories = ctl.histories();
    res.trace = ctl.trace();
}

} // namespace

RunResult
simulate_phases(const DeviceConfig& dev, const ControllerConfig& ccfg,
                const std::vector<PhaseConfig>& phases,
                const std::string& id, bool keep_trace)
{
    EventQueue q;
    Controller ctl(q, dev, ccfg);
    ctl.set_trace_enabled(keep_trace);
    TrafficGenerator gen(q, ctl);

    RunResult res;
    Snapshot prev = snapshot(ctl, 0);
    SimTime start = 0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const PhaseConfig& p = phases[i];
        gen.start_phase(p, start);
        const SimTime end = start + p.duration;
        q.run_until(end - 1);
        ctl.sync(end);
        const Snapshot cur = snapshot(ctl, gen.stats().injected);
        ReportRow row = make_row(ctl, prev, cur, start, end);
        if (!id.empty())
            row.config_id = id;
        row.phase = i;
        row.workload = p.label();
        row.profile = p.profile;
        row.n_seq_bytes = p.n_seq_bytes;
        row.bank_util = p.bank_util;
        res.rows.push_back(std::move(row));
        prev = cur;
        start = end;
    }
    res.injected = gen.stats().injected;
    finish(res, ctl, start);
    return res;
}

RunResult
simulate_idle(const DeviceConfig& dev, const ControllerConfig& ccfg,
              SimTime duration, bool prime_open_bank, bool keep_trace)
{
    EventQueue q;
    Controller ctl(q, dev, ccfg);
    ctl.set_trace_enabled(keep_trace);
    const Snapshot prev = snapshot(ctl, 0);
    if (prime_open_bank)
        prime_open_banks(ctl);
    q.run_until(duration - 1);
    ctl.sync(duration);
    const std::uint64_t injected =
        ctl.counters().reads_enqueued + ctl.counters().writes_enqueued;
    RunResult res;
    ReportRow row = make_row(ctl, prev, snapshot(ctl, injected), 0, duration);
    row.workload = "idle";
    res.rows.push_back(std::move(row));
    res.injected = injected;
    finish(res, ctl, duration);
    return res;
}

RunResult
simulate_trace(const DeviceConfig& dev, const ControllerConfig& ccfg,
               const std::vector<TraceRecord>& records, const std::string& name)
{
    EventQueue q;
    Controller ctl(q, dev, ccfg);
    ctl.set_trace_enabled(true);
    TraceReplayer rep(q, ctl, records);
    const Snapshot prev = snapshot(ctl, 0);
    rep.start();

    auto done = [&] {
        const ControllerCounters& c = ctl.counters();
        return rep.finished() && ctl.read_queue_size() == 0 &&
               ctl.write_queue_size() == 0 &&
               c.reads_done + c.writes_done ==
                   c.reads_enqueued + c.writes_enqueued;
    };
    const SimTime step = 10 * kPsPerUs;
    const SimTime horizon =
        (records.empty() ? 0 : records.back().at) + 10 * kPsPerMs;
    SimTime t = 0;
    while (!done()) {
        if (t > horizon + rep.stall())
            throw FatalError("trace replay did not drain");
        t += step;
        q.run_until(t);
    }
    const SimTime end = std::max<SimTime>(ctl.counters().last_completion_at, 1);

    RunResult res;
    const Snapshot cur = snapshot(ctl, rep.injected());
    ReportRow row = make_row(ctl, prev, cur, 0, end);
    row.workload = name;
    res.histories = ctl.histories();
    row.energy = replay_energy(ctl.trace(), res.histories, 0, end, dev);
    row.exec_time = end;
    res.rows.push_back(std::move(row));
    res.end = end;
    res.online_energy = ctl.energy().breakdown();
    res.trace = ctl.trace();
    res.injected = rep.injected();
    res.stream_hash = rep.stream_hash();
    res.stall = rep.stall();
    return res;
}

RunResult
run_single(const RunConfig& cfg, bool keep_trace)
{
    switch (cfg.workload) {
      case WorkloadKind::Phase:
        return simulate_phases(cfg.device, cfg.controller,
                               {cfg.resolved_phase()}, "", keep_trace);
      case WorkloadKind::Idle:
        return simulate_idle(cfg.device, cfg.controller, cfg.idle_duration,
                             cfg.prime_open_bank, keep_trace);
      case WorkloadKind::Trace:
        return simulate_trace(cfg.device, cfg.controller,
                              parse_trace_file(cfg.trace),
                              cfg.trace.filename().string());
      case WorkloadKind::Sweep:
        break;
    }
    throw ConfigError("a sweep workload runs through run_sweep");
}

unsigned
worker_threads()
{
    if (const char* env = std::getenv("DLPS_THREADS"); env && *env) {
        const std::string_view v{env};
        unsigned n = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc{} || p != v.data() + v.size() || n == 0)
            throw ConfigError("DLPS_THREADS must be a positive integer, got '" +
                              std::string(v) + "'");
        return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ReportRow>
run_sweep(const RunConfig& cfg, unsigned threads)
{
    const std::vector<MemoryConfig> configs = cfg.sweep.memory_configs();
    std::vector<std::vector<ReportRow>> results(configs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= configs.size())
                return;
            try {
                DeviceConfig dev = cfg.device;
                dev.geometry.ranks = configs[i].ranks;
                ControllerConfig ctl = cfg.controller;
                ctl.page_policy = configs[i].page_policy;
                SweepConfig sw = cfg.sweep;
                sw.base_seed = cfg.seed;
                results[i] = simulate_phases(dev, ctl, sw.phases(dev),
                                             config_id(dev.geometry.ranks, ctl),
                                             false)
                                 .rows;
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    const unsigned n = std::clamp<unsigned>(
        threads, 1, static_cast<unsigned>(std::max<std::size_t>(1, configs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);

    std::vector<ReportRow> rows;
    for (auto& r : results)
        rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                    std::make_move_iterator(r.end()));
    return rows;
}

double
CompareReport::energy_delta_pct() const
{
    const double off_e = off.energy.total();
    return off_e > 0 ? 100.0 * (on.energy.total() - off_e) / off_e : 0.0;
}

double
CompareReport::exec_time_delta_pct() const
{
    return off.exec_time > 0
               ? 100.0 *
                     (static_cast<double>(on.exec_time) -
                      static_cast<double>(off.exec_time)) /
                     static_cast<double>(off.exec_time)
               : 0.0;
}

double
CompareReport::share_pct(EnergyComponent c) const
{
    const double total = on.energy.total();
    return total > 0 ? 100.0 * on.energy[c] / total : 0.0;
}

CompareReport
run_compare(const RunConfig& cfg, const std::vector<TraceRecord>& records,
            const std::string& name)
{
    ControllerConfig on = cfg.controller;
    on.powerdown_enabled = true;
    ControllerConfig off = cfg.controller;
    off.powerdown_enabled = false;
    const RunResult a = simulate_trace(cfg.device, on, records, name);
    const RunResult b = simulate_trace(cfg.device, off, records, name);
    CompareReport r;
    r.on = a.rows.front();
    r.off = b.rows.front();
    r.injected_on = a.injected;
    r.injected_off = b.injected;
    r.hash_on = a.stream_hash;
    r.hash_off = b.stream_hash;
    return r;
}

namespace {

std::string
num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string
state_col(PowerState s)
{
    return std::string(to_string(s)) + "_ps";
}

std::string
energy_col(EnergyComponent c)
{
    return std::string(to_string(c)) + "_J";
}

constexpr EnergyComponent kComponents[] = {
    EnergyComponent::ACT_E,      EnergyComponent::PRE_E,
    EnergyComponent::RD_E,       EnergyComponent::WR_E,
    EnergyComponent::REF_E,      EnergyComponent::ACT_BACK_E,
    EnergyComponent::PRE_BACK_E, EnergyComponent::PDNA_E,
    EnergyComponent::PDNP_E,     EnergyComponent::SREF_E,
};

} // namespace

std::vector<std::string>
report_columns()
{
    std::vector<std::string> c = {"config",    "ranks",       "page_policy",
                                  "powerdown", "phase",       "workload",
                                  "profile",   "n_seq_bytes", "bank_util",
                                  "start_ps",  "end_ps"};
    for (PowerState s : kAllPowerStates)
        c.push_back(state_col(s));
    for (EnergyComponent e : kComponents)
        c.push_back(energy_col(e));
    for (const char* n :
         {"total_J", "requests", "completed", "row_hits", "row_misses",
          "refresh_epochs", "refa", "idle_one_event", "idle_one_precharge",
          "avg_read_queue", "bus_utilization", "exec_time_ps"})
        c.emplace_back(n);
    return c;
}

void
write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows)
{
    const auto cols = report_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const ReportRow& r : rows) {
        os << r.config_id << ',' << r.ranks << ',' << to_string(r.page_policy)
           << ',' << (r.powerdown ? "on" : "off") << ',' << r.phase << ','
           << r.workload << ',' << to_string(r.profile) << ','
           << r.n_seq_bytes << ',' << r.bank_util << ',' << r.start << ','
           << r.end;
        for (PowerState s : kAllPowerStates)
            os << ',' << r.residency[s];
        for (EnergyComponent e : kComponents)
            os << ',' << num(r.energy[e]);
        os << ',' << num(r.energy.total()) << ',' << r.requests << ','
           << r.completed << ',' << r.row_hits << ',' << r.row_misses << ','
           << r.refresh_epochs << ',' << r.refa << ',' << r.idle_one_event
           << ',' << r.idle_one_precharge << ',' << num(r.avg_read_queue)
           << ',' << num(r.bus_utilization) << ',' << r.exec_time << '\n';
    }
}

void
write_ranks_csv(std::ostream& os, const std::vector<ReportRow>& rows)
{
    os << "config,phase,rank";
    for (PowerState s : kAllPowerStates)
        os << ',' << state_col(s);
    os << ",refresh_epochs,refa\n";
    for (const ReportRow& r : rows)
        for (std::size_t k = 0; k < r.rank_residency.size(); ++k) {
            os << r.config_id << ',' << r.phase << ',' << k;
            for (PowerState s : kAllPowerStates)
                os << ',' << r.rank_residency[k][s];
            os << ',' << r.rank_refresh_epochs[k] << ',' << r.rank_refa[k]
               << '\n';
        }
}

void
write_residency_pivot(std::ostream& os, const std::vector<ReportRow>& rows)
{
    os << "config,phase,workload,state,time_ps\n";
    for (const ReportRow& r : rows)
        for (PowerState s : kAllPowerStates)
            os << r.config_id << ',' << r.phase << ',' << r.workload << ','
               << to_string(s) << ',' << r.residency[s] << '\n';
}

void
write_energy_pivot(std::ostream& os, const std::vector<ReportRow>& rows)
{
    os << "config,phase,workload,component,energy_J\n";
    for (const ReportRow& r : rows)
        for (EnergyComponent e : kComponents)
            os << r.config_id << ',' << r.phase << ',' << r.workload << ','
               << to_string(e) << ',' << num(r.energy[e]) << '\n';
}

void
write_compare_csv(std::ostream& os, const CompareReport& r)
{
    os << "trace,energy_on_J,energy_off_J,energy_delta_pct,exec_time_on_ps,"
          "exec_time_off_ps,exec_time_delta_pct,PDNA_share_pct,"
          "PDNP_share_pct,SREF_share_pct,requests_on,requests_off,"
          "stream_hash_on,stream_hash_off\n";
    os << r.on.workload << ',' << num(r.on.energy.total()) << ','
       << num(r.off.energy.total()) << ',' << num(r.energy_delta_pct()) << ','
       << r.on.exec_time << ',' << r.off.exec_time << ','
       << num(r.exec_time_delta_pct()) << ','
       << num(r.share_pct(EnergyComponent::PDNA_E)) << ','
       << num(r.share_pct(EnergyComponent::PDNP_E)) << ','
       << num(r.share_pct(EnergyComponent::SREF_E)) << ',' << r.injected_on
       << ',' << r.injected_off << ',' << r.hash_on << ',' << r.hash_off
       << '\n';
}

std::string
format_summary(const std::vector<ReportRow>& rows)
{
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-22s %5s %-22s %8s %7s %7s %7s %7s %12s\n",
                  "config", "phase", "workload", "hit%", "PDNA%", "PDNP%",
                  "SREF%", "refs", "energy_J");
    os << buf;
    for (const ReportRow& r : rows) {
        const double total = static_cast<double>(r.residency.total());
        auto pct = [&](PowerState s) {
            return total > 0 ? 100.0 * static_cast<double>(r.residency[s]) / total
                             : 0.0;
        };
        std::snprintf(buf, sizeof buf,
                      "%-22s %5zu %-22s %8.2f %7.2f %7.2f %7.2f %7llu %12.6g\n",
                      r.config_id.c_str(), r.phase, r.workload.c_str(),
                      100.0 * r.row_hit_rate(), pct(PowerState::PDNA),
                      pct(PowerState::PDNP), pct(PowerState::SREF),
                      static_cast<unsigned long long>(r.refresh_epochs),
                      r.energy.total());
        os << buf;
    }
    return os.str();
}

std::string
format_compare(const CompareReport& r)
{
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%s: energy %.6g J (on) vs %.6g J (off), %+.2f%%; "
                  "exec time %llu ps vs %llu ps, %+.2f%%\n",
                  r.on.workload.c_str(), r.on.energy.total(),
                  r.off.energy.total(), r.energy_delta_pct(),
                  static_cast<unsigned long long>(r.on.exec_time),
                  static_cast<unsigned long long>(r.off.exec_time),
                  r.exec_time_delta_pct());
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "  low-power energy share: PDNA %.2f%%, PDNP %.2f%%, "
                  "SREF %.2f%%\n",
                  r.share_pct(EnergyComponent::PDNA_E),
                  r.share_pct(EnergyComponent::PDNP_E),
                  r.share_pct(EnergyComponent::SREF_E));
    os << buf;
    return os.str();
}

} // namespace dlps
