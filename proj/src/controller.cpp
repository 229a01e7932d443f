#include "dlps/controller.hpp"

#include "dlps/errors.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dlps {

std::string_view
to_string(PagePolicy p)
{
    return p == PagePolicy::OpenAdaptive ? "open_adaptive" : "closed_adaptive";
}

PagePolicy
parse_page_policy(std::string_view s)
{
    if (s == "open_adaptive" || s == "open-adaptive")
        return PagePolicy::OpenAdaptive;
    if (s == "closed_adaptive" || s == "closed-adaptive")
        return PagePolicy::ClosedAdaptive;
    throw ConfigError("unknown page policy '" + std::string(s) + "'");
}

void
ControllerConfig::validate() const
{
    if (read_queue_depth < 1 || write_queue_depth < 1)
        throw ConfigError("queue depths must be >= 1");
    if (address_map != "RoRaBaCoCh")
        throw ConfigError("unsupported address map '" + address_map +
                          "' (only RoRaBaCoCh)");
}

namespace {

unsigned
field_bits(std::uint64_t n)
{
    return static_cast<unsigned>(std::bit_width(n) - 1);
}

std::uint32_t
take(std::uint64_t& a, unsigned bits)
{
    const auto v = static_cast<std::uint32_t>(a & ((std::uint64_t{1} << bits) - 1));
    a >>= bits;
    return v;
}

} // namespace

DecodedAddress
decode(std::uint64_t address, const Geometry& g)
{
    if (address >= g.capacity_bytes())
        throw std::invalid_argument("address " + std::to_string(address) +
                                    " beyond capacity " +
                                    std::to_string(g.capacity_bytes()));
    std::uint64_t a = address >> field_bits(g.burst_bytes);
    DecodedAddress d;
    d.channel = take(a, field_bits(g.channels));
    d.column = take(a, field_bits(g.row_buffer_bytes / g.burst_bytes));
    d.bank = take(a, field_bits(g.banks_per_rank));
    d.rank = take(a, field_bits(g.ranks));
    d.row = take(a, field_bits(g.rows_per_bank));
    return d;
}

std::uint64_t
encode(const DecodedAddress& d, const Geometry& g)
{
    std::uint64_t a = d.row;
    a = (a << field_bits(g.ranks)) | d.rank;
    a = (a << field_bits(g.banks_per_rank)) | d.bank;
    a = (a << field_bits(g.row_buffer_bytes / g.burst_bytes)) | d.column;
    a = (a << field_bits(g.channels)) | d.channel;
    return a << field_bits(g.burst_bytes);
}

namespace {

PageDecision
decide(PagePolicy policy, bool bank_requested, bool hit_queued)
{
    if (hit_queued)
        return PageDecision::KeepOpen;
    if (policy == PagePolicy::ClosedAdaptive)
        return PageDecision::Close;
    return bank_requested ? PageDecision::Close : PageDecision::KeepOpen;
}

} // namespace

PageDecision
page_policy_decide(PagePolicy policy, std::uint32_t rank, std::uint32_t bank,
                   std::uint32_t open_row, std::span<const Request> reads,
                   std::span<const Request> writes)
{
    bool requested = false;
    bool hit = false;
    for (auto q : {reads, writes})
        for (const Request& r : q)
            if (r.decoded.rank == rank && r.decoded.bank == bank) {
                requested = true;
                hit = hit || r.decoded.row == open_row;
            }
    return decide(policy, requested, hit);
}

std::optional<std::size_t>
fr_fcfs_pick(std::span<const SchedulingCandidate> candidates)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        if (!c.ready)
            continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = candidates[*best];
        if (c.row_hit != b.row_hit ? c.row_hit : c.id < b.id)
            best = i;
    }
    return best;
}

Controller::Controller(EventQueue& events, const DeviceConfig& device,
                       const ControllerConfig& config)
    : events_(events),
      dev_(device),
      cfg_(config),
      energy_(device, device.geometry.ranks)
{
    dev_.validate();
    cfg_.validate();
    const std::uint32_t n = dev_.geometry.ranks;
    const SimTime tREFI = dev_.timing.tREFI;
    ranks_.reserve(n);
    for (std::uint32_t r = 0; r < n; ++r) {
        // stagger ranks across the refresh interval
        const SimTime first = tREFI * (r + 1) / n;
        ranks_.push_back(RankCtl{RankState(dev_, r, first), {}, {}, 0, false,
                                 0, std::vector<bool>(
                                        dev_.geometry.banks_per_rank, false)});
        events_.schedule(first, EventKind::RefreshDue,
                         [this, r] { on_refresh_due(r); });
    }
    queue_integral_at_ = events_.now();
}

bool
Controller::enqueue(Request req)
{
    const SimTime now = events_.now();
    auto& q = req.op == Op::Read ? reads_ : writes_;
    const std::uint32_t depth =
        req.op == Op::Read ? cfg_.read_queue_depth : cfg_.write_queue_depth;
    if (q.size() >= depth) {
        ++counters_.rejected;
        return false;
    }
    req.decoded = decode(req.address, dev_.geometry);
    req.id = next_request_id_++;
    req.arrive_at = now;
    update_queue_integral(now);
    ++ranks_[req.decoded.rank].queued;
    if (req.op == Op::Read)
        ++counters_.reads_enqueued;
    else
        ++counters_.writes_enqueued;
    q.push_back(req);
    request_issue(now);
    return true;
}

bool
Controller::idle_but_refresh(const RankCtl& rc) const
{
    const PendingEvents& p = rc.pending;
    return rc.queued == 0 && p.read_data == 0 && p.write_data == 0 &&
           p.precharge == 0;
}

bool
Controller::can_power_down(std::uint32_t rank) const
{
    const RankCtl& rc = ranks_.at(rank);
    if (!cfg_.powerdown_enabled)
        return false;
    if (rc.queued != 0 || rc.pending.total() != 0 || rc.refresh_owed != 0)
        return false;
    const PowerState s = rc.dev.power_at(events_.now());
    return s == PowerState::ACT || s == PowerState::IDLE;
}

std::optional<Command>
Controller::powerdown_check(std::uint32_t rank, PowerdownTrigger /*trigger*/)
{
    RankCtl& rc = ranks_.at(rank);
    ++counters_.powerdown_checks;
    if (rc.queued == 0 && rc.pending.total() == 1) {
        ++counters_.idle_one_event;
        if (rc.pending.precharge == 1)
            ++counters_.idle_one_precharge;
    }
    if (!can_power_down(rank))
        return std::nullopt;
    rc.pd_intent = true;
    request_issue(events_.now());
    return Command{CommandKind::PDE, rank};
}

std::vector<Command>
Controller::refresh_due(std::uint32_t rank) const
{
    const RankCtl& rc = ranks_.at(rank);
    const Command pdx{CommandKind::PDX, rank};
    const Command prea{CommandKind::PREA, rank};
    const Command refa{CommandKind::REFA, rank};
    switch (rc.dev.power_at(events_.now())) {
      case PowerState::SREF: return {};
      case PowerState::PDNA: return {pdx, prea, refa};
      case PowerState::PDNP:
        if (cfg_.powerdown_enabled && idle_but_refresh(rc))
            return {Command{CommandKind::SREFEN, rank}};
        return {pdx, refa};
      default:
        if (rc.dev.any_bank_open())
            return {prea, refa};
        return {refa};
    }
}

std::vector<Command>
Controller::wake_for_request(std::uint32_t rank) const
{
    switch (ranks_.at(rank).dev.power_at(events_.now())) {
      case PowerState::PDNA:
      case PowerState::PDNP: return {Command{CommandKind::PDX, rank}};
      case PowerState::SREF: return {Command{CommandKind::SREFEX, rank}};
      default: return {};
    }
}

void
Controller::sync(SimTime now)
{
    for (std::uint32_t r = 0; r < ranks_.size(); ++r) {
        ranks_[r].dev.advance(now);
        energy_.sync(r, ranks_[r].dev.history(), now);
    }
    update_queue_integral(now);
}

std::vector<std::vector<StateChange>>
Controller::histories() const
{
    std::vector<std::vector<StateChange>> h;
    h.reserve(ranks_.size());
    for (const auto& rc : ranks_)
        h.push_back(rc.dev.history());
    return h;
}

bool
Controller::idle() const
{
    if (!reads_.empty() || !writes_.empty())
        return false;
    return std::all_of(ranks_.begin(), ranks_.end(), [](const RankCtl& rc) {
        return rc.pending.total() == 0 && rc.refresh_owed == 0;
    });
}

void
Controller::update_queue_integral(SimTime now)
{
    if (now > queue_integral_at_) {
        counters_.read_queue_integral +=
            static_cast<long double>(reads_.size()) *
            static_cast<long double>(now - queue_integral_at_);
        queue_integral_at_ = now;
    }
}

bool
Controller::queued_hit(std::uint32_t rank, std::uint32_t bank,
                       std::uint32_t row) const
{
    for (const auto* q : {&reads_, &writes_})
        for (const Request& r : *q)
            if (r.decoded.rank == rank && r.decoded.bank == bank &&
                r.decoded.row == row)
                return true;
    return false;
}

bool
Controller::queued_for_bank(std::uint32_t rank, std::uint32_t bank) const
{
    for (const auto* q : {&reads_, &writes_})
        for (const Request& r : *q)
            if (r.decoded.rank == rank && r.decoded.bank == bank)
                return true;
    return false;
}

void
Controller::request_issue(SimTime at)
{
    at = std::max({at, events_.now(), cmd_bus_free_at_});
    if (issue_scheduled_at_ && *issue_scheduled_at_ <= at)
        return;
    const std::uint64_t gen = ++issue_generation_;
    issue_scheduled_at_ = at;
    events_.schedule(at, EventKind::CommandIssueWindow,
                     [this, gen] { on_issue_event(gen); });
}

void
Controller::on_issue_event(std::uint64_t generation)
{
    if (generation != issue_generation_)
        return;
    issue_scheduled_at_.reset();
    tick_issue(events_.now());
}

void
Controller::notify_vacancy()
{
    if (!vacancy_cb_ || vacancy_scheduled_)
        return;
    vacancy_scheduled_ = true;
    events_.schedule(events_.now(), EventKind::RequestArrival, [this] {
        vacancy_scheduled_ = false;
        vacancy_cb_();
    });
}

std::optional<Command>
Controller::next_refresh_command(const RankCtl& rc) const
{
    const std::uint32_t r = rc.dev.id();
    switch (rc.dev.power()) {
      case PowerState::SREF:
        return std::nullopt;
      case PowerState::PDNA:
        return Command{CommandKind::PDX, r};
      case PowerState::PDNP:
        if (cfg_.powerdown_enabled && idle_but_refresh(rc))
            return Command{CommandKind::SREFEN, r};
        return Command{CommandKind::PDX, r};
      default:
        break;
    }
    if (rc.dev.any_bank_open())
        return Command{CommandKind::PREA, r};
    return Command{CommandKind::REFA, r};
}

std::optional<Command>
Controller::next_request_command(const Request& req, bool row_has_hit) const
{
    const DecodedAddress& d = req.decoded;
    const RankState& rs = ranks_[d.rank].dev;
    switch (rs.power()) {
      case PowerState::PDNA:
      case PowerState::PDNP: return Command{CommandKind::PDX, d.rank};
      case PowerState::SREF: return Command{CommandKind::SREFEX, d.rank};
      default: break;
    }
    const BankState& b = rs.bank(d.bank);
    if (b.open_row == d.row) {
        const auto kind = req.op == Op::Read ? CommandKind::RD : CommandKind::WR;
        return Command{kind, d.rank, d.bank, d.row, d.column};
    }
    if (b.open_row) {
        // leave the row to queued hits first
        if (row_has_hit)
            return std::nullopt;
        return Command{CommandKind::PRE, d.rank, d.bank, *b.open_row};
    }
    return Command{CommandKind::ACT, d.rank, d.bank, d.row};
}

SimTime
Controller::earliest_for(const Command& cmd) const
{
    SimTime t = std::max(ranks_[cmd.rank].dev.earliest_issue(cmd),
                         cmd_bus_free_at_);
    if (is_column(cmd.kind)) {
        const SimTime lat =
            is_read(cmd.kind) ? dev_.timing.tRL : dev_.timing.tWL;
        if (data_bus_free_at_ > lat)
            t = std::max(t, data_bus_free_at_ - lat);
    }
    return t;
}

std::vector<CommandRecord>
Controller::tick_issue(SimTime now)
{
    sync(now);
    const std::uint32_t nbanks = dev_.geometry.banks_per_rank;
    SimTime next = std::numeric_limits<SimTime>::max();

    // (1) refresh sequences
    for (const RankCtl& rc : ranks_) {
        if (rc.refresh_owed == 0)
            continue;
        const auto cmd = next_refresh_command(rc);
        if (!cmd)
            continue;
        const SimTime at = earliest_for(*cmd);
        if (at <= now) {
            return {issue(Choice{*cmd, nullptr}, now)};
        }
        next = std::min(next, at);
    }

    // per-bank queue summary: any request, any hit on the open row
    std::vector<std::uint8_t> requested(ranks_.size() * nbanks, 0);
    std::vector<std::uint8_t> hit(ranks_.size() * nbanks, 0);
    for (const auto* q : {&reads_, &writes_})
        for (const Request& r : *q) {
            const std::size_t i = r.decoded.rank * nbanks + r.decoded.bank;
            requested[i] = 1;
            if (ranks_[r.decoded.rank].dev.bank(r.decoded.bank).open_row ==
                r.decoded.row)
                hit[i] = 1;
        }

    // (2) FR-FCFS over both queues
    std::vector<SchedulingCandidate> cands;
    std::vector<Choice> choices;
    cands.reserve(reads_.size() + writes_.size());
    choices.reserve(reads_.size() + writes_.size());
    for (const auto* q : {&reads_, &writes_})
        for (const Request& r : *q) {
            if (ranks_[r.decoded.rank].refresh_owed > 0)
                continue;
            const auto cmd = next_request_command(
                r, hit[r.decoded.rank * nbanks + r.decoded.bank] != 0);
            if (!cmd)
                continue;
            const SimTime at = earliest_for(*cmd);
            if (at > now)
                next = std::min(next, at);
            cands.push_back({r.id, is_column(cmd->kind), at <= now});
            choices.push_back({*cmd, &r});
        }
    if (const auto pick = fr_fcfs_pick(cands)) {
        return {issue(choices[*pick], now)};
    }

    // (3) page-policy precharges
    for (const RankCtl& rc : ranks_) {
        if (rc.refresh_owed > 0 || !rc.dev.cke())
            continue;
        const std::uint32_t r = rc.dev.id();
        for (std::uint32_t b = 0; b < nbanks; ++b) {
            const BankState& bs = rc.dev.bank(b);
            if (!bs.open_row)
                continue;
            const std::size_t i = r * nbanks + b;
            if (decide(cfg_.page_policy, requested[i] != 0, hit[i] != 0) !=
                PageDecision::Close)
                continue;
            const Command cmd{CommandKind::PRE, r, b, *bs.open_row};
            const SimTime at = earliest_for(cmd);
            if (at <= now) {
                return {issue(Choice{cmd, nullptr}, now)};
            }
            next = std::min(next, at);
        }
    }

    // (4) power-down entries
    for (RankCtl& rc : ranks_) {
        if (!rc.pd_intent)
            continue;
        if (!can_power_down(rc.dev.id())) {
            rc.pd_intent = false;
            continue;
        }
        const Command cmd{CommandKind::PDE, rc.dev.id()};
        const SimTime at = earliest_for(cmd);
        if (at <= now) {
            return {issue(Choice{cmd, nullptr}, now)};
        }
        next = std::min(next, at);
    }

    if (next != std::numeric_limits<SimTime>::max())
        request_issue(next);
    return {};
}

Request
Controller::remove_request(const Request* req)
{
    auto& q = req->op == Op::Read ? reads_ : writes_;
    const auto it = q.begin() + (req - q.data());
    Request out = *it;
    update_queue_integral(events_.now());
    q.erase(it);
    --ranks_[out.decoded.rank].queued;
    return out;
}

CommandRecord
Controller::issue(const Choice& choice, SimTime now)
{
    Command cmd = choice.cmd;
    RankCtl& rc = ranks_[cmd.rank];
    RankState& rs = rc.dev;
    const Timing& t = dev_.timing;

    std::optional<Request> served;
    if (is_column(cmd.kind)) {
        served = remove_request(choice.req);
        const PageDecision pd = decide(
            cfg_.page_policy, queued_for_bank(cmd.rank, cmd.bank),
            queued_hit(cmd.rank, cmd.bank, cmd.row));
        if (pd == PageDecision::Close)
            cmd.kind = cmd.kind == CommandKind::RD ? CommandKind::RDA
                                                   : CommandKind::WRA;
    }

    const PowerState prior = rs.power();
    const std::uint32_t open_before = rs.open_bank_count();
    const SimTime deadline = rs.refresh_deadline();
    try {
        rs.apply(cmd, now);
    } catch (const ProtocolViolation& e) {
        std::ostringstream os;
        os << e.what() << "\nlast commands:";
        for (const CommandRecord& c : recent_)
            os << "\n  " << c.issue_at << " ps  " << describe(c.cmd);
        throw ProtocolViolation(os.str());
    }
    cmd_bus_free_at_ = now + t.tCK;

    std::uint32_t closed = 0;
    switch (cmd.kind) {
      case CommandKind::PRE:
      case CommandKind::RDA:
      case CommandKind::WRA: closed = 1; break;
      case CommandKind::PREA: closed = open_before; break;
      default: break;
    }
    energy_.on_command(cmd.kind, closed);

    const CommandRecord rec{now, cmd, prior};
    if (trace_enabled_)
        trace_.push_back(rec);
    recent_.push_back(rec);
    if (recent_.size() > 16)
        recent_.pop_front();

    const std::uint32_t r = cmd.rank;
    switch (cmd.kind) {
      case CommandKind::ACT:
        rc.fresh_act[cmd.bank] = true;
        break;
      case CommandKind::PRE:
      case CommandKind::PREA:
        ++rc.pending.precharge;
        events_.schedule(now + t.tRP, EventKind::PrechargeComplete,
                         [this, r] { on_precharge_end(r); });
        break;
      case CommandKind::REFA:
        --rc.refresh_owed;
        ++rc.counters.refa;
        rc.counters.refresh_epochs.push_back(deadline);
        rc.counters.max_refresh_lateness =
            std::max(rc.counters.max_refresh_lateness,
                     now > deadline ? now - deadline : SimTime{0});
        events_.schedule(now + t.tRFC, EventKind::RefreshComplete,
                         [this, r] { on_refresh_end(r); });
        break;
      case CommandKind::SREFEN:
        --rc.refresh_owed;
        --rc.pending.refresh;
        ++rc.counters.sref_entries;
        rc.counters.refresh_epochs.push_back(deadline);
        break;
      case CommandKind::PDE:
        rc.pd_intent = false;
        break;
      default:
        break;
    }

    if (served) {
        if (rc.fresh_act[cmd.bank]) {
            ++counters_.row_misses;
            rc.fresh_act[cmd.bank] = false;
        } else {
            ++counters_.row_hits;
        }
        counters_.data_bus_busy += t.tBURST;
        if (is_read(cmd.kind)) {
            data_bus_free_at_ = now + t.tRL + t.tBURST;
            ++rc.pending.read_data;
            events_.schedule(now + t.tRL + t.tBURST,
                             EventKind::ReadDataReturned,
                             [this, req = *served] { on_read_data(req); });
        } else {
            data_bus_free_at_ = now + t.tWL + t.tBURST;
            ++rc.pending.write_data;
            events_.schedule(now + t.tWL + t.tBURST,
                             EventKind::ReadDataReturned,
                             [this, req = *served] { on_write_done(req); });
        }
        if (cmd.kind == CommandKind::RDA || cmd.kind == CommandKind::WRA) {
            ++rc.pending.precharge;
            events_.schedule(rs.bank(cmd.bank).precharge_done_at,
                             EventKind::PrechargeComplete,
                             [this, r] { on_precharge_end(r); });
        }
        notify_vacancy();
    }

    if (command_cb_)
        command_cb_(rec);

    if (cmd.kind == CommandKind::REFA)
        powerdown_check(r, PowerdownTrigger::RefreshStart);
    if (served && rc.queued == 0)
        powerdown_check(r, PowerdownTrigger::QueueEmpty);

    request_issue(now + t.tCK);
    return rec;
}

void
Controller::on_refresh_due(std::uint32_t rank)
{
    const SimTime now = events_.now();
    RankCtl& rc = ranks_[rank];
    sync(now);
    if (rc.dev.power() == PowerState::SREF) {
        rc.counters.refresh_epochs.push_back(rc.dev.refresh_deadline());
        rc.dev.note_internal_refresh();
        ++rc.counters.sref_internal;
    } else {
        ++rc.refresh_owed;
        ++rc.pending.refresh;
        rc.pd_intent = false;
        request_issue(now);
    }
    events_.schedule(now + dev_.timing.tREFI, EventKind::RefreshDue,
                     [this, rank] { on_refresh_due(rank); });
}

void
Controller::on_read_data(Request req)
{
    const SimTime now = events_.now();
    RankCtl& rc = ranks_[req.decoded.rank];
    --rc.pending.read_data;
    ++counters_.reads_done;
    counters_.last_completion_at = std::max(counters_.last_completion_at, now);
    if (completion_cb_)
        completion_cb_(req, now);
    powerdown_check(req.decoded.rank, PowerdownTrigger::DataResponded);
}

void
Controller::on_write_done(Request req)
{
    const SimTime now = events_.now();
    RankCtl& rc = ranks_[req.decoded.rank];
    --rc.pending.write_data;
    ++counters_.writes_done;
    counters_.last_completion_at = std::max(counters_.last_completion_at, now);
    if (completion_cb_)
        completion_cb_(req, now);
    powerdown_check(req.decoded.rank, PowerdownTrigger::DataResponded);
}

void
Controller::on_precharge_end(std::uint32_t rank)
{
    --ranks_[rank].pending.precharge;
    request_issue(events_.now());
    powerdown_check(rank, PowerdownTrigger::PrechargeEnd);
}

void
Controller::on_refresh_end(std::uint32_t rank)
{
    --ranks_[rank].pending.refresh;
    request_issue(events_.now());
    powerdown_check(rank, PowerdownTrigger::RefreshEnd);
}

} // namespace dlps
