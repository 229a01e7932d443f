#pragma once

#include "dlps/engine.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlps {

/// JEDEC timing parameters, all in picoseconds.
struct Timing
{
    SimTime tCK = 833;
    SimTime tCCD = 3332;
    SimTime tRP = 14160;
    SimTime tRAS = 32000;
    SimTime tRCD = 14160;
    SimTime tRL = 14160;
    SimTime tWL = 12000;
    SimTime tBURST = 3332;
    SimTime tRTP = 7500;
    SimTime tWR = 15000;
    SimTime tRRD = 4900;
    SimTime tRFC = 350000;
    SimTime tREFI = 7800000;
    SimTime tXP = 6 * 833;
    SimTime tXS = 408 * 833;
    SimTime tCKE = 5 * 833;
};

/// Device currents in amperes. The optional VPP currents default to zero.
struct Currents
{
    double IDD0 = 0.043;
    double IPP0 = 0.003;
    double IDD2N = 0.034;
    double IDD3N = 0.038;
    double IPP3N = 0.003;
    double IDD2P = 0.025;
    double IDD3P = 0.032;
    double IDD5 = 0.250;
    double IDD6 = 0.030;
    double IDD4R = 0.110;
    double IDD4W = 0.103;
    double IPP2N = 0.0;
    double IPP3P = 0.0;
    double IPP5 = 0.0;
    double IPP6 = 0.0;
};

struct Voltages
{
    double VDD = 1.2;
    double VPP = 2.5;
};

struct Geometry
{
    std::uint32_t channels = 1;
    std::uint32_t ranks = 1;
    std::uint32_t banks_per_rank = 16;
    std::uint32_t rows_per_bank = 65536;
    std::uint32_t row_buffer_bytes = 2048;
    std::uint32_t burst_bytes = 64;

    std::uint64_t capacity_bytes() const
    {
        return std::uint64_t{channels} * ranks * banks_per_rank *
               rows_per_bank * row_buffer_bytes;
    }
};

struct DeviceConfig
{
    std::string name = "ddr4-2400-8gb-x4";
    Timing timing;
    Currents currents;
    Voltages voltages;
    Geometry geometry;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Built-in presets. Currently only "ddr4-2400-8gb-x4" (DDR4-2400, 8 Gbit
/// x4 devices). Throws ConfigError for unknown names.
DeviceConfig device_preset(std::string_view name);

/// Earliest power-down entry after an activate: tRAS + tRP + tCK.
constexpr SimTime
compute_tpde(const Timing& t)
{
    return t.tRAS + t.tRP + t.tCK;
}

inline SimTime
compute_tpde(const DeviceConfig& cfg)
{
    return compute_tpde(cfg.timing);
}

enum class PowerState : std::uint8_t {
    ACT,  // active standby, cke high
    IDLE, // precharged standby, cke high
    REF,  // auto-refresh in progress (tRFC); accounted separately
    PDNA,
    PDNP,
    SREF,
};
constexpr std::size_t kNumPowerStates = 6;
constexpr std::array<PowerState, kNumPowerStates> kAllPowerStates = {
    PowerState::ACT,  PowerState::IDLE, PowerState::REF,
    PowerState::PDNA, PowerState::PDNP, PowerState::SREF};

std::string_view to_string(PowerState s);

constexpr bool
is_powered_down(PowerState s)
{
    return s == PowerState::PDNA || s == PowerState::PDNP ||
           s == PowerState::SREF;
}

enum class CommandKind : std::uint8_t {
    ACT,
    PRE,
    PREA,
    RD,
    WR,
    RDA,
    WRA,
    REFA,
    PDE,
    PDX,
    SREFEN,
    SREFEX,
};
constexpr std::size_t kNumCommandKinds = 12;

std::string_view to_string(CommandKind k);

constexpr bool
is_column(CommandKind k)
{
    return k == CommandKind::RD || k == CommandKind::WR ||
           k == CommandKind::RDA || k == CommandKind::WRA;
}

constexpr bool
is_read(CommandKind k)
{
    return k == CommandKind::RD || k == CommandKind::RDA;
}

constexpr bool
is_bank_addressed(CommandKind k)
{
    return k == CommandKind::ACT || k == CommandKind::PRE || is_column(k);
}

struct Command
{
    CommandKind kind = CommandKind::ACT;
    std::uint32_t rank = 0;
    std::uint32_t bank = 0;
    std::uint32_t row = 0;
    std::uint32_t column = 0;

    friend bool operator==(const Command&, const Command&) = default;
};

std::string describe(const Command& cmd);

struct BankState
{
    std::optional<std::uint32_t> open_row;
    SimTime act_ok_at = 0;
    SimTime pre_ok_at = 0;
    SimTime col_ok_at = 0;
    SimTime last_act_at = 0;
    // completion time of the latest precharge (explicit or automatic);
    // the bank is still precharging while this lies in the future
    SimTime precharge_done_at = 0;
};

struct StateChange
{
    SimTime at;
    PowerState state;
};

/**
 * One rank of DRAM devices: bank rows, the power-state machine and all
 * per-rank timing windows.
 *
 * Completions that happen purely with the passage of time (end of an
 * explicit or automatic precharge, end of tRFC) are folded in lazily by
 * advance(); the state history records them at their exact timestamps.
 */
class RankState
{
  public:
    RankState(const DeviceConfig& cfg, std::uint32_t id,
              SimTime first_refresh_deadline);

    std::uint32_t id() const { return id_; }

    /// Recorded state; may lag time-driven completions until advance().
    PowerState power() const { return power_; }
    /// State at `now` assuming no further commands.
    PowerState power_at(SimTime now) const;
    bool cke() const { return !is_powered_down(power_); }

    bool legal(const Command& cmd, SimTime now) const;
    /// True iff cmd becomes legal once enough time has passed.
    bool allowed_ignoring_time(const Command& cmd) const;
    /// Smallest time at which legal() holds. Requires
    /// allowed_ignoring_time(cmd).
    SimTime earliest_issue(const Command& cmd) const;

    /// Throws ProtocolViolation if !legal(cmd, now).
    void apply(const Command& cmd, SimTime now);

    /// Fold in completions that finished at or before `now`.
    void advance(SimTime now);

    /// Throws FatalError if a structural invariant is broken.
    void check_invariants() const;

    const std::vector<BankState>& banks() const { return banks_; }
    const BankState& bank(std::uint32_t b) const { return banks_.at(b); }
    bool any_bank_open() const;
    std::uint32_t open_bank_count() const;
    bool precharging(SimTime now) const { return last_precharge_done() > now; }
    SimTime last_precharge_done() const;

    SimTime refresh_deadline() const { return refresh_deadline_; }
    /// Advance the refresh deadline by tREFI without a REFA (self-refresh
    /// keeps its internal refresh cadence).
    void note_internal_refresh() { refresh_deadline_ += t_.tREFI; }
    SimTime refresh_done_at() const { return ref_done_at_; }
    SimTime pd_entered_at() const { return pd_entered_at_; }
    SimTime wake_ok_at() const { return wake_ok_at_; }

    const std::vector<StateChange>& history() const { return history_; }

  private:
    PowerState settled_power() const;
    void record(SimTime at, PowerState s);
    void close_bank(BankState& b, SimTime precharge_at);

    Timing t_;
    std::uint32_t id_;
    std::vector<BankState> banks_;
    PowerState power_ = PowerState::IDLE;

    SimTime any_ok_at_ = 0; // tXP / tXS / tRFC blackouts
    SimTime act_ok_at_ = 0; // tRRD
    SimTime col_ok_at_ = 0; // tCCD
    SimTime pde_ok_at_ = 0; // read data out / write recovery
    SimTime ref_done_at_ = 0;
    SimTime refresh_deadline_;
    SimTime pd_entered_at_ = 0;
    SimTime wake_ok_at_ = 0;

    std::vector<StateChange> history_;
};

} // namespace dlps
