// Python bindings for the simulator core.

#include "dlps/config.hpp"
#include "dlps/errors.hpp"
#include "dlps/power.hpp"
#include "dlps/runner.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dlps;

namespace {

RunConfig
config_from(const std::string& text)
{
    std::istringstream in(text);
    return parse_run_config(in, "<python>");
}

py::dict
row_dict(const ReportRow& r)
{
    py::dict d;
    d["config_id"] = r.config_id;
    d["ranks"] = r.ranks;
    d["page_policy"] = std::string(to_string(r.page_policy));
    d["powerdown"] = r.powerdown;
    d["phase"] = r.phase;
    d["workload"] = r.workload;
    d["start_ps"] = r.start;
    d["end_ps"] = r.end;
    py::dict res;
    for (PowerState s : kAllPowerStates)
        res[py::str(std::string(to_string(s)))] = r.residency[s];
    d["residency_ps"] = res;
    py::dict e;
    for (std::size_t i = 0; i < kNumEnergyComponents; ++i)
        e[py::str(std::string(to_string(static_cast<EnergyComponent>(i))))] =
            r.energy.joules[i];
    d["energy_J"] = e;
    d["total_J"] = r.energy.total();
    d["requests"] = r.requests;
    d["completed"] = r.completed;
    d["row_hit_rate"] = r.row_hit_rate();
    d["refresh_epochs"] = r.rank_refresh_epochs;
    d["refa"] = r.rank_refa;
    d["idle_one_event"] = r.idle_one_event;
    d["idle_one_precharge"] = r.idle_one_precharge;
    d["avg_read_queue"] = r.avg_read_queue;
    d["bus_utilization"] = r.bus_utilization;
    d["exec_time_ps"] = r.exec_time;
    return d;
}

py::list
rows_list(const std::vector<ReportRow>& rows)
{
    py::list out;
    for (const auto& r : rows)
        out.append(row_dict(r));
    return out;
}

SystemPowerParams
system_params(const std::string& preset, const py::kwargs& kw)
{
    SystemPowerParams p;
    if (!preset.empty())
        p = system_preset(preset);
    for (auto [k, v] : kw) {
        const auto key = k.cast<std::string>();
        const double x = v.cast<double>();
        if (key == "n_dimms") p.n_dimms = x;
        else if (key == "vdd") p.VDD = x;
        else if (key == "vpp") p.VPP = x;
        else if (key == "idd5b") p.IDD5B = x;
        else if (key == "ipp5b") p.IPP5B = x;
        else if (key == "idd2n") p.IDD2N = x;
        else if (key == "idd6") p.IDD6 = x;
        else if (key == "ipp6") p.IPP6 = x;
        else if (key == "trfc") p.tRFC = x;
        else if (key == "trefi") p.tREFI = x;
        else throw py::type_error("unknown parameter '" + key + "'");
    }
    return p;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "DRAM power-down and self-refresh simulator";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_OSError);
    py::register_exception<ProtocolViolation>(m, "ProtocolViolation",
                                              PyExc_RuntimeError);

    m.def(
        "tpde",
        [](const std::string& preset) {
            return compute_tpde(device_preset(preset));
        },
        py::arg("preset") = "ddr4-2400-8gb-x4",
        "Power-down entry break-even time in ps.");

    m.def(
        "itt_bounds",
        [](const std::string& profile) {
            return itt_bounds(device_preset("ddr4-2400-8gb-x4"),
                              parse_density_profile(profile));
        },
        py::arg("profile"), "(min, max) inter-transaction time in ps.");

    m.def(
        "selfrefresh_power",
        [](const std::string& preset, const py::kwargs& kw) {
            return selfrefresh_power_system(system_params(preset, kw));
        },
        py::arg("preset") = "ddr4-8gb-dimm-x512",
        "System self-refresh power in W; keyword arguments override the preset.");
    m.def(
        "standby_power",
        [](const std::string& preset, const py::kwargs& kw) {
            return standby_power_system(system_params(preset, kw));
        },
        py::arg("preset") = "ddr4-8gb-dimm-x512",
        "System standby power in W; keyword arguments override the preset.");

    m.def(
        "run",
        [](const std::string& config) {
            const RunConfig cfg = config_from(config);
            py::gil_scoped_release nogil;
            RunResult res = run_single(cfg);
            py::gil_scoped_acquire gil;
            return rows_list(res.rows);
        },
        py::arg("config") = "",
        "Run a phase, idle or trace workload described by key = value text.");

    m.def(
        "sweep",
        [](const std::string& config, unsigned threads) {
            RunConfig cfg = config_from(config);
            cfg.workload = WorkloadKind::Sweep;
            std::vector<ReportRow> rows;
            {
                py::gil_scoped_release nogil;
                rows = run_sweep(cfg, threads ? threads : worker_threads());
            }
            return rows_list(rows);
        },
        py::arg("config") = "", py::arg("threads") = 0);

    m.def(
        "compare",
        [](const std::string& trace, const std::string& config) {
            const RunConfig cfg = config_from(config);
            const auto records = parse_trace_file(trace);
            CompareReport r;
            {
                py::gil_scoped_release nogil;
                r = run_compare(cfg, records, trace);
            }
            py::dict d;
            d["on"] = row_dict(r.on);
            d["off"] = row_dict(r.off);
            d["energy_delta_pct"] = r.energy_delta_pct();
            d["exec_time_delta_pct"] = r.exec_time_delta_pct();
            d["same_stream"] = r.hash_on == r.hash_off;
            return d;
        },
        py::arg("trace"), py::arg("config") = "",
        "Replay a trace with power-down on and off.");

    m.def(
        "trace_length",
        [](const std::string& path) { return parse_trace_file(path).size(); },
        py::arg("path"), "Number of records in a trace file.");

    m.def("report_columns", &report_columns);
}
