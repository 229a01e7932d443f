#include "dlps/power.hpp"

#include "dlps/errors.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dlps {

SimTime
Residency::total() const
{
    return std::accumulate(time.begin(), time.end(), SimTime{0});
}

Residency&
Residency::operator+=(const Residency& o)
{
    for (std::size_t i = 0; i < time.size(); ++i)
        time[i] += o.time[i];
    return *this;
}

Residency
accumulate_residency(std::span<const StateChange> history, SimTime start,
                     SimTime end)
{
    if (history.empty())
        throw AccountingError("empty state history");
    if (history.front().at > start)
        throw AccountingError("state history starts after the window");
    Residency r;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i > 0 && history[i].at < history[i - 1].at)
            throw AccountingError(
                "state history out of order at entry " + std::to_string(i) +
                " (" + std::to_string(history[i].at) + " ps after " +
                std::to_string(history[i - 1].at) + " ps)");
        const SimTime lo = std::max(history[i].at, start);
        const SimTime hi =
            i + 1 < history.size() ? std::min(history[i + 1].at, end) : end;
        if (hi > lo)
            r[history[i].state] += hi - lo;
    }
    return r;
}

std::string_view
to_string(EnergyComponent c)
{
    switch (c) {
      case EnergyComponent::ACT_E: return "ACT_E";
      case EnergyComponent::PRE_E: return "PRE_E";
      case EnergyComponent::RD_E: return "RD_E";
      case EnergyComponent::WR_E: return "WR_E";
      case EnergyComponent::REF_E: return "REF_E";
      case EnergyComponent::ACT_BACK_E: return "ACT_BACK_E";
      case EnergyComponent::PRE_BACK_E: return "PRE_BACK_E";
      case EnergyComponent::PDNA_E: return "PDNA_E";
      case EnergyComponent::PDNP_E: return "PDNP_E";
      case EnergyComponent::SREF_E: return "SREF_E";
    }
    return "?";
}

double
EnergyBreakdown::total() const
{
    double sum = 0.0;
    for (double j : joules)
        sum += j;
    return sum;
}

EnergyBreakdown&
EnergyBreakdown::operator+=(const EnergyBreakdown& o)
{
    for (std::size_t i = 0; i < joules.size(); ++i)
        joules[i] += o.joules[i];
    return *this;
}

EnergyBreakdown
EnergyBreakdown::operator-(const EnergyBreakdown& o) const
{
    EnergyBreakdown r = *this;
    for (std::size_t i = 0; i < joules.size(); ++i)
        r.joules[i] -= o.joules[i];
    return r;
}

double
state_power(PowerState s, const DeviceConfig& cfg)
{
    const Currents& c = cfg.currents;
    const double vdd = cfg.voltages.VDD;
    const double vpp = cfg.voltages.VPP;
    switch (s) {
      case PowerState::ACT: return vdd * c.IDD3N + vpp * c.IPP3N;
      case PowerState::IDLE:
      case PowerState::REF: return vdd * c.IDD2N + vpp * c.IPP2N;
      case PowerState::PDNA: return vdd * c.IDD3P + vpp * c.IPP3P;
      case PowerState::PDNP: return vdd * c.IDD2P + vpp * c.IPP2N;
      case PowerState::SREF: return vdd * c.IDD6 + vpp * c.IPP6;
    }
    return 0.0;
}

EnergyComponent
background_component(PowerState s)
{
    switch (s) {
      case PowerState::ACT: return EnergyComponent::ACT_BACK_E;
      case PowerState::IDLE:
      case PowerState::REF: return EnergyComponent::PRE_BACK_E;
      case PowerState::PDNA: return EnergyComponent::PDNA_E;
      case PowerState::PDNP: return EnergyComponent::PDNP_E;
      case PowerState::SREF: return EnergyComponent::SREF_E;
    }
    return EnergyComponent::PRE_BACK_E;
}

double
background_energy(PowerState s, std::int64_t dt_ps, const DeviceConfig& cfg)
{
    if (dt_ps < 0)
        throw std::invalid_argument("background_energy: negative interval");
    return to_seconds(static_cast<SimTime>(dt_ps)) * state_power(s, cfg);
}

EnergyBreakdown
event_energy(CommandKind kind, std::uint32_t banks_closed,
             const DeviceConfig& cfg)
{
    const Currents& c = cfg.currents;
    const Timing& t = cfg.timing;
    const double vdd = cfg.voltages.VDD;
    const double vpp = cfg.voltages.VPP;

    const double act = to_seconds(t.tRAS) *
                       (vdd * (c.IDD0 - c.IDD3N) + vpp * (c.IPP0 - c.IPP3N));
    const double pre = to_seconds(t.tRP) * vdd * (c.IDD0 - c.IDD2N);
    const double rd = to_seconds(t.tBURST) * vdd * (c.IDD4R - c.IDD3N);
    const double wr = to_seconds(t.tBURST) * vdd * (c.IDD4W - c.IDD3N);
    const double ref = to_seconds(t.tRFC) *
                       (vdd * (c.IDD5 - c.IDD2N) + vpp * (c.IPP5 - c.IPP2N));

    EnergyBreakdown e;
    switch (kind) {
      case CommandKind::ACT: e[EnergyComponent::ACT_E] = act; break;
      case CommandKind::PRE:
      case CommandKind::PREA:
        e[EnergyComponent::PRE_E] = pre * banks_closed;
        break;
      case CommandKind::RD: e[EnergyComponent::RD_E] = rd; break;
      case CommandKind::RDA:
        e[EnergyComponent::RD_E] = rd;
        e[EnergyComponent::PRE_E] = pre;
        break;
      case CommandKind::WR: e[EnergyComponent::WR_E] = wr; break;
      case CommandKind::WRA:
        e[EnergyComponent::WR_E] = wr;
        e[EnergyComponent::PRE_E] = pre;
        break;
      case CommandKind::REFA: e[EnergyComponent::REF_E] = ref; break;
      default: break;
    }
    return e;
}

EnergyAccumulator::EnergyAccumulator(const DeviceConfig& cfg,
                                     std::uint32_t ranks)
    : cfg_(cfg), cursors_(ranks)
{
}

void
EnergyAccumulator::on_command(CommandKind kind, std::uint32_t banks_closed)
{
    energy_ += event_energy(kind, banks_closed, cfg_);
}

void
EnergyAccumulator::sync(std::uint32_t rank,
                        std::span<const StateChange> history, SimTime now)
{
    Cursor& cur = cursors_.at(rank);
    // a zero-length entry may have been merged away since the last sync
    cur.next_index = std::min(cur.next_index, history.size());
    // close every interval that has a known successor
    while (cur.next_index < history.size() &&
           history[cur.next_index].at <= now) {
        const StateChange& prev = history[cur.next_index - 1];
        const SimTime until = history[cur.next_index].at;
        if (until < cur.booked_until)
            throw AccountingError("energy sync went backwards on rank " +
                                  std::to_string(rank));
        energy_[background_component(prev.state)] += background_energy(
            prev.state, static_cast<std::int64_t>(until - cur.booked_until),
            cfg_);
        cur.booked_until = until;
        ++cur.next_index;
    }
    const PowerState current = history[cur.next_index - 1].state;
    if (now > cur.booked_until) {
        energy_[background_component(current)] += background_energy(
            current, static_cast<std::int64_t>(now - cur.booked_until), cfg_);
        cur.booked_until = now;
    }
}

EnergyBreakdown
replay_energy(std::span<const CommandRecord> records,
              std::span<const std::vector<StateChange>> histories,
              SimTime start, SimTime end, const DeviceConfig& cfg)
{
    EnergyBreakdown e;
    // rebuild open-bank sets from the command stream itself
    std::vector<std::vector<bool>> open(
        histories.size(),
        std::vector<bool>(cfg.geometry.banks_per_rank, false));
    for (const CommandRecord& rec : records) {
        auto& banks = open.at(rec.cmd.rank);
        std::uint32_t closed = 0;
        switch (rec.cmd.kind) {
          case CommandKind::ACT: banks.at(rec.cmd.bank) = true; break;
          case CommandKind::PRE:
          case CommandKind::RDA:
          case CommandKind::WRA:
            closed = banks.at(rec.cmd.bank) ? 1 : 0;
            banks.at(rec.cmd.bank) = false;
            break;
          case CommandKind::PREA:
            closed = static_cast<std::uint32_t>(
                std::count(banks.begin(), banks.end(), true));
            std::fill(banks.begin(), banks.end(), false);
            break;
          default: break;
        }
        if (rec.issue_at >= start && rec.issue_at < end)
            e += event_energy(rec.cmd.kind, closed, cfg);
    }
    for (const auto& h : histories) {
        const Residency r = accumulate_residency(h, start, end);
        for (PowerState s : kAllPowerStates)
            e[background_component(s)] += background_energy(
                s, static_cast<std::int64_t>(r[s]), cfg);
    }
    return e;
}

std::string_view
drampower_mnemonic(const CommandRecord& rec)
{
    switch (rec.cmd.kind) {
      case CommandKind::ACT: return "ACT";
      case CommandKind::PRE: return "PRE";
      case CommandKind::PREA: return "PREA";
      case CommandKind::RD: return "RD";
      case CommandKind::RDA: return "RDA";
      case CommandKind::WR: return "WR";
      case CommandKind::WRA: return "WRA";
      case CommandKind::REFA: return "REF";
      case CommandKind::PDE:
        return rec.prior == PowerState::IDLE ? "PDN_F_PRE" : "PDN_F_ACT";
      case CommandKind::PDX:
        return rec.prior == PowerState::PDNA ? "PUP_ACT" : "PUP_PRE";
      case CommandKind::SREFEN: return "SREN";
      case CommandKind::SREFEX: return "SREX";
    }
    return "NOP";
}

void
write_drampower_trace(std::span<const CommandRecord> records, SimTime tCK,
                      std::ostream& os)
{
    for (const CommandRecord& rec : records) {
        const std::uint32_t bank =
            is_bank_addressed(rec.cmd.kind) ? rec.cmd.bank : 0;
        os << rec.issue_at / tCK << ',' << drampower_mnemonic(rec) << ','
           << bank << '\n';
    }
}

void
export_drampower_trace(std::span<const CommandRecord> records, SimTime tCK,
                       const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot open '" + path.string() + "' for writing");
    write_drampower_trace(records, tCK, out);
    if (!out)
        throw InputError("write to '" + path.string() + "' failed");
}

SystemPowerParams
system_preset(std::string_view name)
{
    if (name == "ddr4-8gb-dimm-x512")
        return SystemPowerParams{};
    throw ConfigError("unknown system preset '" + std::string(name) + "'");
}

double
standby_power_system(const SystemPowerParams& p)
{
    const double refresh = p.tRFC * (p.VDD * p.IDD5B + p.VPP * p.IPP5B);
    const double standby = p.VDD * (p.tREFI - p.tRFC) * p.IDD2N;
    return p.n_dimms * (refresh + standby) / p.tREFI;
}

double
selfrefresh_power_system(const SystemPowerParams& p)
{
    return p.n_dimms * (p.VDD * p.IDD6 + p.VPP * p.IPP6);
}

} // namespace dlps
