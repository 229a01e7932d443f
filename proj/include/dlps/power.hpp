#pragma once

#include "dlps/device.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace dlps {

struct CommandRecord
{
    SimTime issue_at = 0;
    Command cmd;
    /// Rank power state just before the command (distinguishes PDE into
    /// PDNA from PDE into PDNP, PDX out of either).
    PowerState prior = PowerState::IDLE;
};

/// Per-state time totals for one rank over a window.
struct Residency
{
    std::array<SimTime, kNumPowerStates> time{};

    SimTime operator[](PowerState s) const
    {
        return time[static_cast<std::size_t>(s)];
    }
    SimTime& operator[](PowerState s)
    {
        return time[static_cast<std::size_t>(s)];
    }
    SimTime total() const;
    SimTime powered_down() const
    {
        return (*this)[PowerState::PDNA] + (*this)[PowerState::PDNP] +
               (*this)[PowerState::SREF];
    }
    Residency& operator+=(const Residency& o);
};

struct ResidencyReport
{
    std::vector<Residency> per_rank;
    SimTime total = 0;
};

/**
 * Sum the time each state occupies in [start, end) of a gap-free state
 * history (entry times, first entry at or before start). Throws
 * AccountingError on an empty or out-of-order history.
 */
Residency accumulate_residency(std::span<const StateChange> history,
                               SimTime start, SimTime end);

enum class EnergyComponent : std::uint8_t {
    ACT_E,
    PRE_E,
    RD_E,
    WR_E,
    REF_E,
    ACT_BACK_E,
    PRE_BACK_E,
    PDNA_E,
    PDNP_E,
    SREF_E,
};
constexpr std::size_t kNumEnergyComponents = 10;

std::string_view to_string(EnergyComponent c);

/// Energy in joules per component.
struct EnergyBreakdown
{
    std::array<double, kNumEnergyComponents> joules{};

    double operator[](EnergyComponent c) const
    {
        return joules[static_cast<std::size_t>(c)];
    }
    double& operator[](EnergyComponent c)
    {
        return joules[static_cast<std::size_t>(c)];
    }
    double total() const;
    EnergyBreakdown& operator+=(const EnergyBreakdown& o);
    EnergyBreakdown operator-(const EnergyBreakdown& o) const;
};

/// Background power in watts drawn while a rank sits in `s`.
double state_power(PowerState s, const DeviceConfig& cfg);

/// Component a background interval in `s` is booked against. REF time
/// is precharged-standby background; the refresh pulse itself is REF_E.
EnergyComponent background_component(PowerState s);

/// dt * state_power(s). Throws std::invalid_argument for dt < 0.
double background_energy(PowerState s, std::int64_t dt_ps,
                         const DeviceConfig& cfg);

/// Per-command energy increments. `banks_closed` is the number of banks a
/// PRE/PREA actually precharges; ignored for other commands.
EnergyBreakdown event_energy(CommandKind kind, std::uint32_t banks_closed,
                             const DeviceConfig& cfg);

/**
 * Incremental energy bookkeeping driven by the controller as commands
 * issue and power states change.
 */
class EnergyAccumulator
{
  public:
    EnergyAccumulator(const DeviceConfig& cfg, std::uint32_t ranks);

    void on_command(CommandKind kind, std::uint32_t banks_closed);
    /// Book background energy for rank history up to `now`.
    void sync(std::uint32_t rank, std::span<const StateChange> history,
              SimTime now);

    const EnergyBreakdown& breakdown() const { return energy_; }

  private:
    struct Cursor
    {
        std::size_t next_index = 1;
        SimTime booked_until = 0;
    };
    DeviceConfig cfg_;
    std::vector<Cursor> cursors_;
    EnergyBreakdown energy_;
};

/**
 * Recompute energy for [start, end) from scratch: event energies from the
 * command records (with open-bank counts reconstructed from the records
 * themselves) plus background energy from per-rank residency.
 */
EnergyBreakdown replay_energy(std::span<const CommandRecord> records,
                              std::span<const std::vector<StateChange>> histories,
                              SimTime start, SimTime end,
                              const DeviceConfig& cfg);

/// DRAMPower command mnemonic for a record.
std::string_view drampower_mnemonic(const CommandRecord& rec);

/// One "<cycle>,<CMD>,<bank>" line per record, cycle = issue_at / tCK.
void write_drampower_trace(std::span<const CommandRecord> records, SimTime tCK,
                           std::ostream& os);
/// Throws InputError if the file cannot be written.
void export_drampower_trace(std::span<const CommandRecord> records,
                            SimTime tCK, const std::filesystem::path& path);

/// Parameters for first-order system-level standby / self-refresh power
/// of a population of identical DIMMs. Currents in A, times in s.
struct SystemPowerParams
{
    double n_dimms = 512;
    double VDD = 1.2;
    double VPP = 2.5;
    double IDD5B = 1.8;
    double IPP5B = 0.24;
    double IDD2N = 0.4;
    double IDD6 = 0.24;
    double IPP6 = 0.04;
    double tRFC = 350e-9;
    double tREFI = 7.8e-6;
};

/// 4 TB built from 512 8 GB DDR4 DIMMs. Throws ConfigError if unknown.
SystemPowerParams system_preset(std::string_view name);

/// n * [tRFC (VDD IDD5B + VPP IPP5B) + VDD (tREFI - tRFC) IDD2N] / tREFI
double standby_power_system(const SystemPowerParams& p);
/// n * (VDD IDD6 + VPP IPP6)
double selfrefresh_power_system(const SystemPowerParams& p);

} // namespace dlps
