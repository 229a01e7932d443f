#pragma once

#include "dlps/config.hpp"
#include "dlps/controller.hpp"
#include "dlps/power.hpp"
#include "dlps/workload.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dlps {

/// One (memory config, phase) result.
struct ReportRow
{
    std::string config_id;
    std::uint32_t ranks = 1;
    PagePolicy page_policy = PagePolicy::OpenAdaptive;
    bool powerdown = true;
    std::size_t phase = 0;
    std::string workload;      // phase label, "idle" or the trace name
    DensityProfile profile = DensityProfile::VeryDense;
    std::uint32_t n_seq_bytes = 0;
    std::uint32_t bank_util = 0;
    SimTime start = 0;
    SimTime end = 0;

    std::vector<Residency> rank_residency;
    Residency residency; // summed over ranks
    EnergyBreakdown energy;

    std::uint64_t requests = 0;
    std::uint64_t completed = 0;
    std::uint64_t row_hits = 0;
    std::uint64_t row_misses = 0;
    std::vector<std::uint64_t> rank_refresh_epochs;
    std::vector<std::uint64_t> rank_refa;
    std::uint64_t refresh_epochs = 0;
    std::uint64_t refa = 0;
    std::uint64_t idle_one_event = 0;
    std::uint64_t idle_one_precharge = 0;
    double avg_read_queue = 0;
    double bus_utilization = 0;
    SimTime exec_time = 0;

    SimTime duration() const { return end - start; }
    double row_hit_rate() const
    {
        const auto n = row_hits + row_misses;
        return n ? static_cast<double>(row_hits) / n : 0.0;
    }
};

struct RunResult
{
    std::vector<ReportRow> rows;
    /// Populated only when the run kept its command trace.
    std::vector<CommandRecord> trace;
    std::vector<std::vector<StateChange>> histories;
    SimTime end = 0;
    EnergyBreakdown online_energy;
    std::uint64_t injected = 0;
    std::uint64_t stream_hash = 0;
    SimTime stall = 0;
};

/// Back-to-back phases in one simulation, one row per phase.
RunResult simulate_phases(const DeviceConfig& dev, const ControllerConfig& ctl,
                          const std::vector<PhaseConfig>& phases,
                          const std::string& config_id, bool keep_trace);

/// No traffic apart from an optional single read per rank at t = 0.
RunResult simulate_idle(const DeviceConfig& dev, const ControllerConfig& ctl,
                        SimTime duration, bool prime_open_bank,
                        bool keep_trace);

/// Replay until the last request completes; the row covers [0, exec time).
/// Energy comes from the recorded command trace and state history.
RunResult simulate_trace(const DeviceConfig& dev, const ControllerConfig& ctl,
                         const std::vector<TraceRecord>& records,
                         const std::string& name);

/// Runs the config's workload (phase, idle or trace) once.
RunResult run_single(const RunConfig& cfg, bool keep_trace = false);

/// Every memory configuration x every phase, rows ordered by
/// (config, phase). Memory configs run on up to `threads` workers.
std::vector<ReportRow> run_sweep(const RunConfig& cfg, unsigned threads);

/// Worker count from DLPS_THREADS, else the hardware concurrency.
/// Throws ConfigError for a malformed value.
unsigned worker_threads();

struct CompareReport
{
    ReportRow on;
    ReportRow off;
    std::uint64_t injected_on = 0;
    std::uint64_t injected_off = 0;
    std::uint64_t hash_on = 0;
    std::uint64_t hash_off = 0;

    double energy_delta_pct() const;    // (on - off) / off
    double exec_time_delta_pct() const; // (on - off) / off
    /// Share of the power-down run's energy spent in a low-power state.
    double share_pct(EnergyComponent c) const;
};

/// The same trace with power-down on and off.
CompareReport run_compare(const RunConfig& cfg,
                          const std::vector<TraceRecord>& records,
                          const std::string& name);

/// Column names of the per-phase CSV, in order.
std::vector<std::string> report_columns();

void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows);
/// Per-rank residency, refresh epochs and REFA counts.
void write_ranks_csv(std::ostream& os, const std::vector<ReportRow>& rows);
/// Long-format "config,phase,workload,state,time_ps" residency stacks.
void write_residency_pivot(std::ostream& os,
                           const std::vector<ReportRow>& rows);
/// Long-format "config,phase,workload,component,energy_J" energy stacks.
void write_energy_pivot(std::ostream& os, const std::vector<ReportRow>& rows);
void write_compare_csv(std::ostream& os, const CompareReport& r);
std::string format_summary(const std::vector<ReportRow>& rows);
std::string format_compare(const CompareReport& r);

} // namespace dlps
