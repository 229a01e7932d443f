#pragma once

#include "dlps/device.hpp"
#include "dlps/engine.hpp"
#include "dlps/power.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlps {

enum class PagePolicy : std::uint8_t { OpenAdaptive, ClosedAdaptive };

std::string_view to_string(PagePolicy p);
/// Accepts "open_adaptive"/"open-adaptive" and the closed equivalents.
PagePolicy parse_page_policy(std::string_view s);

struct ControllerConfig
{
    std::uint32_t read_queue_depth = 64;
    std::uint32_t write_queue_depth = 64;
    PagePolicy page_policy = PagePolicy::OpenAdaptive;
    bool powerdown_enabled = true;
    std::string address_map = "RoRaBaCoCh";

    void validate() const;
};

struct DecodedAddress
{
    std::uint32_t channel = 0;
    std::uint32_t rank = 0;
    std::uint32_t bank = 0;
    std::uint32_t row = 0;
    std::uint32_t column = 0;

    friend bool operator==(const DecodedAddress&,
                           const DecodedAddress&) = default;
};

/**
 * RoRaBaCoCh mapping. Above the burst offset, fields are taken LSB to MSB
 * as channel, column, bank, rank, row. Throws std::invalid_argument if
 * the address is beyond the device capacity.
 */
DecodedAddress decode(std::uint64_t address, const Geometry& g);
/// Inverse of decode() for the burst-aligned address of a location.
std::uint64_t encode(const DecodedAddress& d, const Geometry& g);

enum class Op : std::uint8_t { Read, Write };

struct Request
{
    std::uint64_t id = 0;
    SimTime arrive_at = 0;
    Op op = Op::Read;
    std::uint64_t address = 0;
    std::uint32_t size = 64;
    DecodedAddress decoded;
};

enum class PageDecision : std::uint8_t { KeepOpen, Close };

/**
 * Decide whether to close `open_row` of (rank, bank) given the requests
 * still queued. Open adaptive closes only when queued requests target the
 * bank and none hits the open row; closed adaptive closes whenever no
 * queued request hits it.
 */
PageDecision page_policy_decide(PagePolicy policy, std::uint32_t rank,
                                std::uint32_t bank, std::uint32_t open_row,
                                std::span<const Request> reads,
                                std::span<const Request> writes);

struct SchedulingCandidate
{
    std::uint64_t id = 0; // arrival order
    bool row_hit = false;
    bool ready = false;
};

/// FR-FCFS: the oldest ready row hit, else the oldest ready request.
std::optional<std::size_t>
fr_fcfs_pick(std::span<const SchedulingCandidate> candidates);

enum class PowerdownTrigger : std::uint8_t {
    RefreshStart,
    RefreshEnd,
    DataResponded,
    PrechargeEnd,
    QueueEmpty,
};

struct PendingEvents
{
    std::uint32_t read_data = 0;
    std::uint32_t write_data = 0;
    std::uint32_t precharge = 0;
    std::uint32_t refresh = 0;

    std::uint32_t total() const
    {
        return read_data + write_data + precharge + refresh;
    }
};

struct RankCounters
{
    std::uint64_t refa = 0;
    std::uint64_t sref_entries = 0;
    std::uint64_t sref_internal = 0;
    /// REFA issue time minus its deadline, worst case seen.
    SimTime max_refresh_lateness = 0;
    /// Due time of every tREFI slot that has been served, whether by REFA,
    /// SREFEN or the device's own refresh while in self-refresh.
    std::vector<SimTime> refresh_epochs;
};

struct ControllerCounters
{
    std::uint64_t reads_enqueued = 0;
    std::uint64_t writes_enqueued = 0;
    std::uint64_t rejected = 0;
    std::uint64_t reads_done = 0;
    std::uint64_t writes_done = 0;
    std::uint64_t row_hits = 0;
    std::uint64_t row_misses = 0;
    std::uint64_t powerdown_checks = 0;
    /// Checks that found the rank's queues empty with exactly one
    /// outstanding event, and the subset where that event was a precharge.
    std::uint64_t idle_one_event = 0;
    std::uint64_t idle_one_precharge = 0;
    /// Time integral of the read queue length (entries x ps).
    long double read_queue_integral = 0;
    /// Sum of data-bus burst time (ps).
    SimTime data_bus_busy = 0;
    SimTime last_completion_at = 0;
};

/**
 * Single-channel memory controller.
 *
 * Split read/write queues feed an FR-FCFS scheduler issuing at most one
 * command per tCK. Refresh is all-bank per rank on a fixed tREFI grid.
 * Power-down follows the staggered policy: PDNA (or PDNP) as soon as a
 * rank is idle with no pending events, PDNA -> PDNP through the next
 * refresh, and PDNP -> SREF at the refresh after that.
 */
class Controller
{
  public:
    Controller(EventQueue& events, const DeviceConfig& device,
               const ControllerConfig& config);

    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    /// Accept a request at events.now(). False means the matching queue is
    /// full; the caller should retry after the vacancy callback fires.
    bool enqueue(Request req);

    bool can_power_down(std::uint32_t rank) const;

    /// Evaluate the power-down entry conditions for a trigger event.
    /// Returns the PDE that will be issued, if any.
    std::optional<Command> powerdown_check(std::uint32_t rank,
                                           PowerdownTrigger trigger);

    /// Planned command sequence for a refresh falling due now.
    std::vector<Command> refresh_due(std::uint32_t rank) const;
    /// Planned wake-up sequence for a request arriving at `rank` now.
    std::vector<Command> wake_for_request(std::uint32_t rank) const;

    /// Issue at most one command at `now`. Driven by internally scheduled
    /// issue events; public for tests.
    std::vector<CommandRecord> tick_issue(SimTime now);

    /// Bring rank state and online energy up to `now`.
    void sync(SimTime now);

    void on_vacancy(std::function<void()> cb) { vacancy_cb_ = std::move(cb); }
    void on_completion(std::function<void(const Request&, SimTime)> cb)
    {
        completion_cb_ = std::move(cb);
    }
    /// Optional observer called after every issued command.
    void on_command(std::function<void(const CommandRecord&)> cb)
    {
        command_cb_ = std::move(cb);
    }

    const DeviceConfig& device() const { return dev_; }
    const ControllerConfig& config() const { return cfg_; }
    std::uint32_t ranks() const { return static_cast<std::uint32_t>(ranks_.size()); }
    const RankState& rank(std::uint32_t r) const { return ranks_.at(r).dev; }
    const PendingEvents& pending(std::uint32_t r) const { return ranks_.at(r).pending; }
    const RankCounters& rank_counters(std::uint32_t r) const { return ranks_.at(r).counters; }
    bool refresh_pending(std::uint32_t r) const { return ranks_.at(r).refresh_owed > 0; }
    const ControllerCounters& counters() const { return counters_; }
    /// Command records are kept only while tracing is on (the default).
    void set_trace_enabled(bool on) { trace_enabled_ = on; }
    const std::vector<CommandRecord>& trace() const { return trace_; }
    /// The last few issued commands, kept regardless of tracing.
    const std::deque<CommandRecord>& recent_commands() const { return recent_; }
    std::vector<std::vector<StateChange>> histories() const;
    const EnergyAccumulator& energy() const { return energy_; }

    std::size_t read_queue_size() const { return reads_.size(); }
    std::size_t write_queue_size() const { return writes_.size(); }
    std::size_t queued_for(std::uint32_t r) const { return ranks_.at(r).queued; }
    bool idle() const;

  private:
    struct RankCtl
    {
        RankState dev;
        PendingEvents pending;
        RankCounters counters;
        std::uint32_t refresh_owed = 0;
        bool pd_intent = false;
        std::size_t queued = 0;
        // bank activated but not yet accessed: the next column is a miss
        std::vector<bool> fresh_act;
    };

    struct Choice
    {
        Command cmd;
        const Request* req = nullptr;
    };

    void request_issue(SimTime at);
    void on_issue_event(std::uint64_t generation);
    void on_refresh_due(std::uint32_t rank);
    void on_read_data(Request req);
    void on_write_done(Request req);
    void on_precharge_end(std::uint32_t rank);
    void on_refresh_end(std::uint32_t rank);

    std::optional<Command> next_refresh_command(const RankCtl& rc) const;
    std::optional<Command> next_request_command(const Request& req,
                                                bool row_has_hit) const;
    SimTime earliest_for(const Command& cmd) const;
    CommandRecord issue(const Choice& choice, SimTime now);
    Request remove_request(const Request* req);
    void update_queue_integral(SimTime now);
    bool queued_hit(std::uint32_t rank, std::uint32_t bank,
                    std::uint32_t row) const;
    bool queued_for_bank(std::uint32_t rank, std::uint32_t bank) const;
    bool idle_but_refresh(const RankCtl& rc) const;
    void notify_vacancy();

    EventQueue& events_;
    DeviceConfig dev_;
    ControllerConfig cfg_;
    std::vector<RankCtl> ranks_;
    std::vector<Request> reads_;
    std::vector<Request> writes_;

    std::uint64_t issue_generation_ = 0;
    std::optional<SimTime> issue_scheduled_at_;
    SimTime cmd_bus_free_at_ = 0;
    SimTime data_bus_free_at_ = 0;
    SimTime queue_integral_at_ = 0;
    std::uint64_t next_request_id_ = 0;
    bool vacancy_scheduled_ = false;
    bool trace_enabled_ = true;

    std::vector<CommandRecord> trace_;
    std::deque<CommandRecord> recent_;
    EnergyAccumulator energy_;
    ControllerCounters counters_;

    std::function<void()> vacancy_cb_;
    std::function<void(const Request&, SimTime)> completion_cb_;
    std::function<void(const CommandRecord&)> command_cb_;
};

} // namespace dlps
