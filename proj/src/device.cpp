#include "dlps/device.hpp"

#include "dlps/errors.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

namespace dlps {

void
DeviceConfig::validate() const
{
    auto fail = [this](const std::string& what) {
        throw ConfigError("device '" + name + "': " + what);
    };
    const Timing& t = timing;
    const std::pair<const char*, SimTime> positive[] = {
        {"tCK", t.tCK},     {"tCCD", t.tCCD},   {"tRP", t.tRP},
        {"tRAS", t.tRAS},   {"tRCD", t.tRCD},   {"tRL", t.tRL},
        {"tWL", t.tWL},     {"tBURST", t.tBURST}, {"tRTP", t.tRTP},
        {"tWR", t.tWR},     {"tRRD", t.tRRD},   {"tRFC", t.tRFC},
        {"tREFI", t.tREFI}, {"tXP", t.tXP},     {"tXS", t.tXS},
    };
    for (const auto& [key, v] : positive)
        if (v == 0)
            fail(std::string(key) + " must be > 0");
    if (t.tRAS < t.tRCD)
        fail("tRAS must be >= tRCD");
    if (t.tRFC >= t.tREFI)
        fail("tRFC must be < tREFI");

    const Geometry& g = geometry;
    if (g.channels != 1)
        fail("only a single channel is supported");
    if (g.ranks < 1 || g.ranks > 2)
        fail("ranks must be 1 or 2");
    if (g.banks_per_rank == 0 || !std::has_single_bit(g.banks_per_rank))
        fail("banks_per_rank must be a power of two");
    if (g.rows_per_bank == 0 || !std::has_single_bit(g.rows_per_bank))
        fail("rows_per_bank must be a power of two");
    if (g.burst_bytes == 0 || !std::has_single_bit(g.burst_bytes))
        fail("burst_bytes must be a power of two");
    if (!std::has_single_bit(g.row_buffer_bytes) ||
        g.row_buffer_bytes % g.burst_bytes != 0)
        fail("row_buffer_bytes must be a power of two and a multiple of "
             "burst_bytes");

    const Currents& c = currents;
    const double all[] = {c.IDD0, c.IPP0, c.IDD2N, c.IDD3N, c.IPP3N,
                          c.IDD2P, c.IDD3P, c.IDD5, c.IDD6, c.IDD4R,
                          c.IDD4W, c.IPP2N, c.IPP3P, c.IPP5, c.IPP6};
    for (double v : all)
        if (!(v >= 0.0))
            fail("currents must be non-negative");
    if (!(voltages.VDD > 0.0) || !(voltages.VPP >= 0.0))
        fail("VDD must be positive and VPP non-negative");
}

DeviceConfig
device_preset(std::string_view name)
{
    if (name == "ddr4-2400-8gb-x4") {
        // defaults in Timing/Currents/Voltages/Geometry are this device
        return DeviceConfig{};
    }
    throw ConfigError("unknown device preset '" + std::string(name) + "'");
}

std::string_view
to_string(PowerState s)
{
    switch (s) {
      case PowerState::ACT: return "ACT";
      case PowerState::IDLE: return "IDLE";
      case PowerState::REF: return "REF";
      case PowerState::PDNA: return "PDNA";
      case PowerState::PDNP: return "PDNP";
      case PowerState::SREF: return "SREF";
    }
    return "?";
}

std::string_view
to_string(CommandKind k)
{
    switch (k) {
      case CommandKind::ACT: return "ACT";
      case CommandKind::PRE: return "PRE";
      case CommandKind::PREA: return "PREA";
      case CommandKind::RD: return "RD";
      case CommandKind::WR: return "WR";
      case CommandKind::RDA: return "RDA";
      case CommandKind::WRA: return "WRA";
      case CommandKind::REFA: return "REFA";
      case CommandKind::PDE: return "PDE";
      case CommandKind::PDX: return "PDX";
      case CommandKind::SREFEN: return "SREFEN";
      case CommandKind::SREFEX: return "SREFEX";
    }
    return "?";
}

std::string
describe(const Command& cmd)
{
    std::ostringstream os;
    os << to_string(cmd.kind) << " rank " << cmd.rank;
    if (is_bank_addressed(cmd.kind))
        os << " bank " << cmd.bank << " row " << cmd.row;
    return os.str();
}

RankState::RankState(const DeviceConfig& cfg, std::uint32_t id,
                     SimTime first_refresh_deadline)
    : t_(cfg.timing),
      id_(id),
      banks_(cfg.geometry.banks_per_rank),
      refresh_deadline_(first_refresh_deadline)
{
    history_.push_back({0, PowerState::IDLE});
}

bool
RankState::any_bank_open() const
{
    return std::any_of(banks_.begin(), banks_.end(),
                       [](const BankState& b) { return b.open_row.has_value(); });
}

std::uint32_t
RankState::open_bank_count() const
{
    return static_cast<std::uint32_t>(
        std::count_if(banks_.begin(), banks_.end(),
                      [](const BankState& b) { return b.open_row.has_value(); }));
}

SimTime
RankState::last_precharge_done() const
{
    SimTime t = 0;
    for (const auto& b : banks_)
        t = std::max(t, b.precharge_done_at);
    return t;
}

PowerState
RankState::settled_power() const
{
    if (power_ == PowerState::REF)
        return PowerState::IDLE;
    if (power_ == PowerState::ACT && !any_bank_open())
        return PowerState::IDLE;
    return power_;
}

PowerState
RankState::power_at(SimTime now) const
{
    if (power_ == PowerState::REF && now >= ref_done_at_)
        return PowerState::IDLE;
    if (power_ == PowerState::ACT && !any_bank_open() &&
        now >= last_precharge_done())
        return PowerState::IDLE;
    return power_;
}

void
RankState::record(SimTime at, PowerState s)
{
    if (s == power_)
        return;
    StateChange& last = history_.back();
    if (at < last.at) {
        throw AccountingError("rank " + std::to_string(id_) + ": state " +
                              std::string(to_string(s)) + " recorded at " +
                              std::to_string(at) + " ps, before " +
                              std::to_string(last.at) + " ps");
    }
    power_ = s;
    if (at == last.at) {
        // zero-length interval: overwrite, and merge with the predecessor
        // if that leaves two equal neighbours
        last.state = s;
        if (history_.size() >= 2 && history_[history_.size() - 2].state == s)
            history_.pop_back();
        return;
    }
    history_.push_back({at, s});
}

void
RankState::advance(SimTime now)
{
    if (power_ == PowerState::REF && ref_done_at_ <= now)
        record(ref_done_at_, PowerState::IDLE);
    if (power_ == PowerState::ACT && !any_bank_open()) {
        const SimTime done = last_precharge_done();
        if (done <= now)
            record(std::max(done, history_.back().at), PowerState::IDLE);
    }
}

bool
RankState::allowed_ignoring_time(const Command& cmd) const
{
    if (cmd.rank != id_)
        return false;
    if (is_bank_addressed(cmd.kind) && cmd.bank >= banks_.size())
        return false;

    const PowerState s = settled_power();
    const bool cke_high = !is_powered_down(s);

    switch (cmd.kind) {
      case CommandKind::ACT:
        return cke_high && !banks_[cmd.bank].open_row;
      case CommandKind::PRE:
        return cke_high && banks_[cmd.bank].open_row.has_value();
      case CommandKind::PREA:
        return cke_high && any_bank_open();
      case CommandKind::RD:
      case CommandKind::WR:
      case CommandKind::RDA:
      case CommandKind::WRA:
        return cke_high && banks_[cmd.bank].open_row == cmd.row;
      case CommandKind::REFA:
        return s == PowerState::IDLE;
      case CommandKind::PDE:
        return cke_high;
      case CommandKind::PDX:
        return s == PowerState::PDNA || s == PowerState::PDNP;
      case CommandKind::SREFEN:
        // self-refresh is entered from precharged standby, or straight
        // from precharge power-down when a refresh falls due there
        return s == PowerState::IDLE || s == PowerState::PDNP;
      case CommandKind::SREFEX:
        return s == PowerState::SREF;
    }
    return false;
}

SimTime
RankState::earliest_issue(const Command& cmd) const
{
    const SimTime base = any_ok_at_;
    switch (cmd.kind) {
      case CommandKind::ACT: {
        const BankState& b = banks_[cmd.bank];
        return std::max({base, b.act_ok_at, act_ok_at_});
      }
      case CommandKind::PRE:
        return std::max(base, banks_[cmd.bank].pre_ok_at);
      case CommandKind::PREA: {
        SimTime t = base;
        for (const auto& b : banks_)
            if (b.open_row)
                t = std::max(t, b.pre_ok_at);
        return t;
      }
      case CommandKind::RD:
      case CommandKind::WR:
      case CommandKind::RDA:
      case CommandKind::WRA:
        return std::max({base, banks_[cmd.bank].col_ok_at, col_ok_at_});
      case CommandKind::REFA:
        return std::max(base, last_precharge_done());
      case CommandKind::PDE:
        return std::max({base, pde_ok_at_, last_precharge_done()});
      case CommandKind::PDX:
      case CommandKind::SREFEX:
        return wake_ok_at_;
      case CommandKind::SREFEN:
        if (power_ == PowerState::PDNP)
            return wake_ok_at_;
        return std::max(base, last_precharge_done());
    }
    return base;
}

bool
RankState::legal(const Command& cmd, SimTime now) const
{
    return allowed_ignoring_time(cmd) && now >= earliest_issue(cmd);
}

void
RankState::close_bank(BankState& b, SimTime precharge_at)
{
    b.open_row.reset();
    b.precharge_done_at = precharge_at + t_.tRP;
    b.act_ok_at = std::max(b.act_ok_at, b.precharge_done_at);
}

void
RankState::apply(const Command& cmd, SimTime now)
{
    advance(now);
    if (!legal(cmd, now)) {
        std::ostringstream os;
        os << "illegal " << describe(cmd) << " at " << now << " ps in state "
           << to_string(power_);
        if (allowed_ignoring_time(cmd))
            os << " (earliest " << earliest_issue(cmd) << " ps)";
        throw ProtocolViolation(os.str());
    }

    switch (cmd.kind) {
      case CommandKind::ACT: {
        BankState& b = banks_[cmd.bank];
        b.open_row = cmd.row;
        b.last_act_at = now;
        b.col_ok_at = now + t_.tRCD;
        b.pre_ok_at = now + t_.tRAS;
        act_ok_at_ = now + t_.tRRD;
        pde_ok_at_ = std::max(pde_ok_at_, now + t_.tCK);
        record(now, PowerState::ACT);
        break;
      }
      case CommandKind::PRE:
        close_bank(banks_[cmd.bank], now);
        break;
      case CommandKind::PREA:
        for (auto& b : banks_)
            if (b.open_row)
                close_bank(b, now);
        break;
      case CommandKind::RD:
      case CommandKind::RDA: {
        BankState& b = banks_[cmd.bank];
        col_ok_at_ = now + t_.tCCD;
        b.pre_ok_at = std::max(b.pre_ok_at, now + t_.tRTP);
        pde_ok_at_ = std::max(pde_ok_at_, now + t_.tRL + t_.tBURST);
        if (cmd.kind == CommandKind::RDA)
            close_bank(b, b.pre_ok_at);
        break;
      }
      case CommandKind::WR:
      case CommandKind::WRA: {
        BankState& b = banks_[cmd.bank];
        const SimTime recovered = now + t_.tWL + t_.tBURST + t_.tWR;
        col_ok_at_ = now + t_.tCCD;
        b.pre_ok_at = std::max(b.pre_ok_at, recovered);
        pde_ok_at_ = std::max(pde_ok_at_, recovered);
        if (cmd.kind == CommandKind::WRA)
            close_bank(b, b.pre_ok_at);
        break;
      }
      case CommandKind::REFA:
        ref_done_at_ = now + t_.tRFC;
        any_ok_at_ = std::max(any_ok_at_, ref_done_at_);
        refresh_deadline_ += t_.tREFI;
        record(now, PowerState::REF);
        break;
      case CommandKind::PDE:
        pd_entered_at_ = now;
        wake_ok_at_ = now + t_.tCKE;
        record(now, any_bank_open() ? PowerState::PDNA : PowerState::PDNP);
        break;
      case CommandKind::PDX:
        any_ok_at_ = std::max(any_ok_at_, now + t_.tXP);
        record(now, power_ == PowerState::PDNA ? PowerState::ACT
                                               : PowerState::IDLE);
        break;
      case CommandKind::SREFEN:
        pd_entered_at_ = now;
        wake_ok_at_ = now + t_.tCKE;
        refresh_deadline_ += t_.tREFI;
        record(now, PowerState::SREF);
        break;
      case CommandKind::SREFEX:
        any_ok_at_ = std::max(any_ok_at_, now + t_.tXS);
        record(now, PowerState::IDLE);
        break;
    }
}

void
RankState::check_invariants() const
{
    auto fail = [this](const std::string& what) {
        throw FatalError("rank " + std::to_string(id_) + " in " +
                         std::string(to_string(power_)) + ": " + what);
    };
    const bool open = any_bank_open();
    if (power_ == PowerState::PDNA && !open)
        fail("PDNA with all banks closed");
    if ((power_ == PowerState::PDNP || power_ == PowerState::SREF) && open)
        fail("bank open in PDNP/SREF");
    if (power_ == PowerState::REF && open)
        fail("bank open during refresh");
    if (power_ == PowerState::IDLE && open)
        fail("IDLE with an open bank");
    if (is_powered_down(power_) && wake_ok_at_ < pd_entered_at_ + t_.tCKE)
        fail("wake window shorter than tCKE");
    if (history_.empty() || history_.back().state != power_)
        fail("history out of sync with power state");
}

} // namespace dlps
