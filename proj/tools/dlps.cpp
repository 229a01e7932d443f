// dlps: command-line front end for the DRAM power-state simulator.

#include "dlps/config.hpp"
#include "dlps/errors.hpp"
#include "dlps/power.hpp"
#include "dlps/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace dlps;

namespace {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfig = 2,
    kInput = 3,
    kProtocol = 4,
    kFatal = 5,
};

struct Options
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string powerdown;
    std::string drampower_trace;
    std::string trace;
    std::string calc_kind;
    std::string calc_preset;
    std::map<std::string, double> calc_params;
};

RunConfig
load(const Options& o)
{
    RunConfig cfg;
    if (!o.config.empty())
        cfg = load_run_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.sweep.base_seed = *o.seed;
    }
    if (!o.out.empty())
        cfg.out_dir = o.out;
    if (!o.powerdown.empty())
        cfg.controller.powerdown_enabled = o.powerdown == "on";
    if (!o.drampower_trace.empty())
        cfg.drampower_trace = o.drampower_trace;
    return cfg;
}

std::ofstream
open_out(const fs::path& dir, const std::string& name)
{
    std::ofstream f(dir / name);
    if (!f)
        throw InputError("cannot write '" + (dir / name).string() + "'");
    return f;
}

void
emit_rows(const RunConfig& cfg, const std::vector<ReportRow>& rows)
{
    const std::string summary = format_summary(rows);
    if (cfg.out_dir.empty()) {
        write_report_csv(std::cout, rows);
        std::cerr << summary;
        return;
    }
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec)
        throw InputError("cannot create '" + cfg.out_dir.string() +
                         "': " + ec.message());
    auto f = open_out(cfg.out_dir, "results.csv");
    write_report_csv(f, rows);
    auto r = open_out(cfg.out_dir, "ranks.csv");
    write_ranks_csv(r, rows);
    auto rp = open_out(cfg.out_dir, "residency_pivot.csv");
    write_residency_pivot(rp, rows);
    auto ep = open_out(cfg.out_dir, "energy_pivot.csv");
    write_energy_pivot(ep, rows);
    auto s = open_out(cfg.out_dir, "summary.txt");
    s << summary;
    std::cout << summary;
}

int
cmd_run(const Options& o)
{
    RunConfig cfg = load(o);
    if (cfg.workload == WorkloadKind::Sweep)
        throw ConfigError("workload.kind = sweep: use the sweep subcommand");
    cfg.validate();
    const RunResult res = run_single(cfg, !cfg.drampower_trace.empty());
    emit_rows(cfg, res.rows);
    if (!cfg.drampower_trace.empty())
        export_drampower_trace(res.trace, cfg.device.timing.tCK,
                               cfg.drampower_trace);
    return kOk;
}

int
cmd_sweep(const Options& o)
{
    RunConfig cfg = load(o);
    cfg.workload = WorkloadKind::Sweep;
    cfg.validate();
    emit_rows(cfg, run_sweep(cfg, worker_threads()));
    return kOk;
}

int
cmd_compare(const Options& o)
{
    RunConfig cfg = load(o);
    fs::path trace = o.trace.empty() ? cfg.trace : fs::path(o.trace);
    if (trace.empty())
        throw ConfigError("compare needs a trace (argument or workload.trace)");
    const CompareReport r =
        run_compare(cfg, parse_trace_file(trace), trace.filename().string());
    if (!cfg.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec)
            throw InputError("cannot create '" + cfg.out_dir.string() +
                             "': " + ec.message());
        auto f = open_out(cfg.out_dir, "compare.csv");
        write_compare_csv(f, r);
        auto s = open_out(cfg.out_dir, "summary.txt");
        s << format_compare(r);
    }
    std::cout << format_compare(r);
    return kOk;
}

int
cmd_export(const Options& o)
{
    RunConfig cfg = load(o);
    if (cfg.drampower_trace.empty())
        throw ConfigError("export-trace needs --drampower-trace PATH");
    if (cfg.workload == WorkloadKind::Sweep)
        throw ConfigError("export-trace runs a single workload, not a sweep");
    cfg.validate();
    const RunResult res = run_single(cfg, true);
    export_drampower_trace(res.trace, cfg.device.timing.tCK,
                           cfg.drampower_trace);
    std::cout << res.trace.size() << " commands written to "
              << cfg.drampower_trace.string() << "\n";
    return kOk;
}

int
cmd_calc(const Options& o)
{
    static const std::map<std::string, std::vector<std::string>> needed{
        {"sref", {"n-dimms", "vdd", "vpp", "idd6", "ipp6"}},
        {"standby",
         {"n-dimms", "vdd", "vpp", "idd5b", "ipp5b", "idd2n", "trfc", "trefi"}},
    };
    SystemPowerParams p;
    if (!o.calc_preset.empty()) {
        p = system_preset(o.calc_preset);
    } else {
        for (const auto& k : needed.at(o.calc_kind))
            if (!o.calc_params.count(k))
                throw CLI::RequiredError("--" + k + " (or --preset)");
    }
    for (const auto& [k, v] : o.calc_params) {
        if (k == "n-dimms") p.n_dimms = v;
        else if (k == "vdd") p.VDD = v;
        else if (k == "vpp") p.VPP = v;
        else if (k == "idd5b") p.IDD5B = v;
        else if (k == "ipp5b") p.IPP5B = v;
        else if (k == "idd2n") p.IDD2N = v;
        else if (k == "idd6") p.IDD6 = v;
        else if (k == "ipp6") p.IPP6 = v;
        else if (k == "trfc") p.tRFC = v;
        else if (k == "trefi") p.tREFI = v;
    }
    const double w = o.calc_kind == "sref" ? selfrefresh_power_system(p)
                                           : standby_power_system(p);
    std::printf("%.6f W\n", w);
    return kOk;
}

} // namespace

int
main(int argc, char** argv)
{
    CLI::App app{"DRAM power-down and self-refresh simulator"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "key = value config file")
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--powerdown", o.powerdown, "enable power-down")
            ->check(CLI::IsMember({"on", "off"}));
        sub->add_option("--drampower-trace", o.drampower_trace,
                        "write the command trace in DRAMPower format");
    };

    auto* run = app.add_subcommand("run", "run the configured workload once");
    common(run);
    auto* sweep = app.add_subcommand(
        "sweep", "every memory configuration x every traffic phase");
    common(sweep);
    auto* compare = app.add_subcommand(
        "compare", "replay a trace with power-down on and off");
    common(compare);
    compare->add_option("trace", o.trace, "trace file")
        ->check(CLI::ExistingFile);
    auto* exp = app.add_subcommand(
        "export-trace", "run once and write the DRAMPower command trace");
    common(exp);

    auto* calc = app.add_subcommand(
        "calc", "system-level standby / self-refresh power in watts");
    calc->add_option("kind", o.calc_kind, "sref or standby")
        ->required()
        ->check(CLI::IsMember({"sref", "standby"}));
    calc->add_option("--preset", o.calc_preset, "parameter preset")
        ->check(CLI::IsMember({"ddr4-8gb-dimm-x512"}));
    for (const char* k : {"n-dimms", "vdd", "vpp", "idd5b", "ipp5b", "idd2n",
                          "idd6", "ipp6", "trfc", "trefi"}) {
        const std::string key = k;
        calc->add_option_function<double>(
            "--" + key, [&o, key](double v) { o.calc_params[key] = v; },
            key == "trfc" || key == "trefi" ? "seconds"
            : key.rfind("v", 0) == 0        ? "volts"
            : key == "n-dimms"              ? "DIMM count"
                                            : "amperes");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run) return cmd_run(o);
        if (*sweep) return cmd_sweep(o);
        if (*compare) return cmd_compare(o);
        if (*exp) return cmd_export(o);
        if (*calc) return cmd_calc(o);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kInput;
    } catch (const ProtocolViolation& e) {
        std::cerr << "protocol violation: " << e.what() << "\n";
        return kProtocol;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFatal;
    }
    return kUsage;
}
