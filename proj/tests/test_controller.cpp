#include "dlps/controller.hpp"
#include "dlps/errors.hpp"
#include "dlps/runner.hpp"

#include <doctest.h>

#include <algorithm>
#include <stdexcept>

using namespace dlps;

namespace {

DeviceConfig
device(std::uint32_t ranks)
{
    DeviceConfig d = device_preset("ddr4-2400-8gb-x4");
    d.geometry.ranks = ranks;
    return d;
}

struct Rig
{
    EventQueue q;
    DeviceConfig dev;
    ControllerConfig cfg;
    Controller ctl;

    explicit Rig(std::uint32_t ranks = 1,
                 PagePolicy policy = PagePolicy::OpenAdaptive, bool pd = true)
        : dev(device(ranks)), cfg(make_cfg(policy, pd)), ctl(q, dev, cfg)
    {
    }

    static ControllerConfig make_cfg(PagePolicy p, bool pd)
    {
        ControllerConfig c;
        c.page_policy = p;
        c.powerdown_enabled = pd;
        return c;
    }

    bool read(std::uint32_t rank, std::uint32_t bank, std::uint32_t row,
              std::uint32_t column = 0, Op op = Op::Read)
    {
        Request r;
        r.op = op;
        r.address = encode({0, rank, bank, row, column}, dev.geometry);
        return ctl.enqueue(r);
    }

    // commands issued in [from, to]
    std::vector<CommandRecord> between(SimTime from, SimTime to) const
    {
        std::vector<CommandRecord> out;
        for (const auto& c : ctl.trace())
            if (c.issue_at >= from && c.issue_at <= to)
                out.push_back(c);
        return out;
    }
};

std::vector<CommandKind>
kinds(const std::vector<CommandRecord>& v, std::uint32_t rank = 0)
{
    std::vector<CommandKind> k;
    for (const auto& c : v)
        if (c.cmd.rank == rank)
            k.push_back(c.cmd.kind);
    return k;
}

std::vector<CommandKind>
kinds(const std::vector<Command>& v)
{
    std::vector<CommandKind> k;
    for (const auto& c : v)
        k.push_back(c.kind);
    return k;
}

using K = CommandKind;

} // namespace

TEST_SUITE("controller") {

TEST_CASE("decode bit slices")
{
    const Geometry g = device(2).geometry;
    CHECK(decode(0x0, g) == DecodedAddress{});
    CHECK(decode(0x800, g) == DecodedAddress{0, 0, 1, 0, 0});
    CHECK(decode(0x8000, g) == DecodedAddress{0, 1, 0, 0, 0});
    CHECK(decode(0x40, g).column == 1);
    CHECK(decode(0x10000, g).row == 1);
    CHECK(decode(0x3f, g) == DecodedAddress{});
    CHECK_THROWS_AS(decode(g.capacity_bytes(), g), std::invalid_argument);
}

TEST_CASE("decode inverts encode")
{
    for (std::uint32_t ranks : {1u, 2u}) {
        const Geometry g = device(ranks).geometry;
        Rng rng(ranks);
        for (int i = 0; i < 10000; ++i) {
            const std::uint64_t a =
                rng.below(g.capacity_bytes()) / g.burst_bytes * g.burst_bytes;
            const DecodedAddress d = decode(a, g);
            CHECK(d.rank < g.ranks);
            CHECK(d.bank < g.banks_per_rank);
            CHECK(d.row < g.rows_per_bank);
            CHECK(encode(d, g) == a);
        }
    }
}

TEST_CASE("enqueue accepts until the queue is full")
{
    Rig rig;
    for (int i = 0; i < 64; ++i)
        CHECK(rig.read(0, 0, i));
    CHECK_FALSE(rig.read(0, 0, 99));
    CHECK(rig.ctl.counters().rejected == 1);
    CHECK(rig.read(0, 0, 99, 0, Op::Write));
}

TEST_CASE("FR-FCFS picks")
{
    std::vector<SchedulingCandidate> c{{1, false, true}, {2, true, true}};
    CHECK(fr_fcfs_pick(c) == 1u);
    c = {{5, true, true}, {3, true, true}};
    CHECK(fr_fcfs_pick(c) == 1u);
    CHECK_FALSE(fr_fcfs_pick({}).has_value());
    c = {{1, true, false}, {2, false, true}};
    CHECK(fr_fcfs_pick(c) == 1u);
    c = {{1, true, false}};
    CHECK_FALSE(fr_fcfs_pick(c).has_value());
}

TEST_CASE("FR-FCFS choice is invariant under shifting arrival order")
{
    Rng rng(17);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<SchedulingCandidate> c(1 + rng.below(12));
        for (auto& x : c) {
            x.id = rng.below(1000);
            x.row_hit = rng.below(2);
            x.ready = rng.below(4) != 0;
        }
        const auto a = fr_fcfs_pick(c);
        const std::uint64_t shift = 1 + rng.below(1u << 20);
        for (auto& x : c)
            x.id += shift;
        CHECK(fr_fcfs_pick(c) == a);
    }
}

TEST_CASE("page policy decisions")
{
    const Geometry g = device(1).geometry;
    auto req = [&](std::uint32_t bank, std::uint32_t row) {
        Request r;
        r.decoded = {0, 0, bank, row, 0};
        r.address = encode(r.decoded, g);
        return r;
    };
    const std::vector<Request> none;
    const std::vector<Request> other_bank{req(3, 1)};
    const std::vector<Request> miss{req(0, 9)};
    const std::vector<Request> hit{req(0, 9), req(0, 5)};
    using P = PagePolicy;
    using D = PageDecision;

    CHECK(page_policy_decide(P::OpenAdaptive, 0, 0, 5, none, none) == D::KeepOpen);
    CHECK(page_policy_decide(P::OpenAdaptive, 0, 0, 5, other_bank, none) == D::KeepOpen);
    CHECK(page_policy_decide(P::OpenAdaptive, 0, 0, 5, miss, none) == D::Close);
    CHECK(page_policy_decide(P::OpenAdaptive, 0, 0, 5, hit, none) == D::KeepOpen);
    CHECK(page_policy_decide(P::ClosedAdaptive, 0, 0, 5, none, none) == D::Close);
    CHECK(page_policy_decide(P::ClosedAdaptive, 0, 0, 5, other_bank, none) == D::Close);
    CHECK(page_policy_decide(P::ClosedAdaptive, 0, 0, 5, miss, none) == D::Close);
    CHECK(page_policy_decide(P::ClosedAdaptive, 0, 0, 5, none, hit) == D::KeepOpen);
}

TEST_CASE("page policy names")
{
    CHECK(parse_page_policy("open-adaptive") == PagePolicy::OpenAdaptive);
    CHECK(parse_page_policy("closed_adaptive") == PagePolicy::ClosedAdaptive);
    CHECK_THROWS_AS(parse_page_policy("open"), ConfigError);
}

TEST_CASE("can_power_down conditions")
{
    Rig rig(1, PagePolicy::ClosedAdaptive);
    CHECK(rig.ctl.can_power_down(0));
    rig.read(0, 0, 0, 0, Op::Write);
    CHECK_FALSE(rig.ctl.can_power_down(0));

    Rig r2(1, PagePolicy::ClosedAdaptive);
    r2.read(0, 0, 0);
    // run past the RDA but not past its precharge
    SimTime rda = 0;
    r2.ctl.on_command([&](const CommandRecord& c) {
        if (c.cmd.kind == K::RDA)
            rda = c.issue_at;
    });
    r2.q.run_until(14160 + 14160 + 3332);
    REQUIRE(rda != 0);
    CHECK(r2.ctl.queued_for(0) == 0);
    CHECK(r2.ctl.pending(0).precharge == 1);
    CHECK_FALSE(r2.ctl.can_power_down(0));

    Rig off(1, PagePolicy::OpenAdaptive, false);
    CHECK_FALSE(off.ctl.can_power_down(0));
}

TEST_CASE("idle after data with a bank open enters PDNA")
{
    Rig rig;
    rig.read(0, 0, 0);
    rig.q.run_until(kPsPerUs);
    const auto cmds = kinds(rig.ctl.trace());
    CHECK(cmds == std::vector<K>{K::ACT, K::RD, K::PDE});
    CHECK(rig.ctl.trace().back().issue_at == 14160 + 14160 + 3332);
    CHECK(rig.ctl.rank(0).power() == PowerState::PDNA);
    CHECK(rig.ctl.powerdown_check(0, PowerdownTrigger::DataResponded) ==
          std::nullopt);
}

TEST_CASE("idle after precharge end enters PDNP")
{
    Rig rig(1, PagePolicy::ClosedAdaptive);
    rig.read(0, 0, 0);
    rig.q.run_until(kPsPerUs);
    CHECK(kinds(rig.ctl.trace()) == std::vector<K>{K::ACT, K::RDA, K::PDE});
    CHECK(rig.ctl.rank(0).power() == PowerState::PDNP);
    CHECK(rig.ctl.rank_counters(0).refa == 0);
    CHECK(rig.ctl.counters().idle_one_precharge >= 1);
}

TEST_CASE("powerdown_check returns nothing while a request is queued")
{
    Rig rig;
    rig.read(0, 0, 0);
    CHECK_FALSE(rig.ctl.powerdown_check(0, PowerdownTrigger::RefreshEnd));
}

TEST_CASE("refresh in PDNA wakes, precharges, refreshes, then drops to PDNP")
{
    Rig rig;
    const SimTime tREFI = rig.dev.timing.tREFI;
    rig.read(0, 0, 0);
    rig.q.run_until(kPsPerUs);
    CHECK(kinds(rig.ctl.refresh_due(0)) == std::vector<K>{K::PDX, K::PREA, K::REFA});
    rig.q.run_until(tREFI + kPsPerUs);
    const auto seq = rig.between(tREFI, tREFI + kPsPerUs);
    CHECK(kinds(seq) == std::vector<K>{K::PDX, K::PREA, K::REFA, K::PDE});
    CHECK(seq.front().issue_at == tREFI);
    CHECK(seq.back().prior != PowerState::ACT);
    CHECK(rig.ctl.rank(0).power() == PowerState::PDNP);
}

TEST_CASE("refresh in PDNP enters self-refresh")
{
    Rig rig;
    const SimTime tREFI = rig.dev.timing.tREFI;
    rig.read(0, 0, 0);
    rig.q.run_until(tREFI + kPsPerUs);
    CHECK(kinds(rig.ctl.refresh_due(0)) == std::vector<K>{K::SREFEN});
    rig.q.run_until(2 * tREFI + kPsPerUs);
    CHECK(kinds(rig.between(2 * tREFI, 2 * tREFI + kPsPerUs)) ==
          std::vector<K>{K::SREFEN});
    CHECK(rig.ctl.rank(0).power() == PowerState::SREF);
    CHECK(rig.ctl.refresh_due(0).empty());
    CHECK(kinds(rig.ctl.wake_for_request(0)) == std::vector<K>{K::SREFEX});
}

TEST_CASE("refresh in PDNP with a request waiting wakes and refreshes")
{
    Rig rig(1, PagePolicy::ClosedAdaptive);
    rig.read(0, 0, 0);
    rig.q.run_until(kPsPerUs);
    REQUIRE(rig.ctl.rank(0).power() == PowerState::PDNP);
    rig.read(0, 1, 1);
    CHECK(kinds(rig.ctl.refresh_due(0)) == std::vector<K>{K::PDX, K::REFA});
}

TEST_CASE("request in PDNP: PDX, then ACT after tXP")
{
    Rig rig(1, PagePolicy::ClosedAdaptive);
    rig.read(0, 0, 0);
    rig.q.run_until(2 * kPsPerUs);
    CHECK(kinds(rig.ctl.wake_for_request(0)) == std::vector<K>{K::PDX});
    rig.read(0, 2, 3);
    rig.q.run_until(3 * kPsPerUs);
    const auto seq = rig.between(2 * kPsPerUs, 3 * kPsPerUs);
    REQUIRE(seq.size() >= 2);
    CHECK(seq[0].cmd.kind == K::PDX);
    CHECK(seq[0].issue_at == 2 * kPsPerUs);
    CHECK(seq[1].cmd.kind == K::ACT);
    CHECK(seq[1].issue_at == seq[0].issue_at + rig.dev.timing.tXP);
}

TEST_CASE("request in self-refresh: SREFEX, then ACT after tXS")
{
    Rig rig;
    const SimTime t0 = 20 * kPsPerUs;
    rig.read(0, 0, 0);
    rig.q.run_until(t0);
    REQUIRE(rig.ctl.rank(0).power() == PowerState::SREF);
    rig.read(0, 4, 4);
    rig.q.run_until(t0 + kPsPerUs);
    const auto seq = rig.between(t0, t0 + kPsPerUs);
    REQUIRE(seq.size() >= 2);
    CHECK(seq[0].cmd.kind == K::SREFEX);
    CHECK(seq[1].cmd.kind == K::ACT);
    CHECK(seq[1].issue_at - seq[0].issue_at == 408 * 833);
}

TEST_CASE("awake rank needs no wake-up")
{
    Rig rig;
    CHECK(rig.ctl.wake_for_request(0).empty());
}

TEST_CASE("read to a closed bank: ACT, then RD after tRCD")
{
    Rig rig(1, PagePolicy::OpenAdaptive, false);
    rig.read(0, 5, 17);
    rig.q.run_until(kPsPerUs);
    const auto& t = rig.ctl.trace();
    REQUIRE(t.size() == 2);
    CHECK(t[0].cmd == Command{K::ACT, 0, 5, 17, 0});
    CHECK(t[1].cmd.kind == K::RD);
    CHECK(t[1].issue_at - t[0].issue_at == rig.dev.timing.tRCD);
}

TEST_CASE("an overdue refresh goes before queued reads")
{
    Rig rig(1, PagePolicy::OpenAdaptive, false);
    const SimTime tREFI = rig.dev.timing.tREFI;
    rig.read(0, 0, 0);
    rig.q.schedule(tREFI, EventKind::RequestArrival, [&] {
        for (int i = 0; i < 4; ++i)
            rig.read(0, 0, 0, i + 1);
    });
    rig.q.run_until(tREFI + kPsPerUs);
    const auto seq = rig.between(tREFI, tREFI + kPsPerUs);
    REQUIRE(seq.size() >= 3);
    CHECK(seq[0].cmd.kind == K::PREA);
    CHECK(seq[1].cmd.kind == K::REFA);
    CHECK(seq[2].cmd.kind == K::ACT);
    CHECK(seq[2].issue_at >= seq[1].issue_at + rig.dev.timing.tRFC);
}

TEST_CASE("nothing to do with power-down disabled issues nothing")
{
    Rig rig(1, PagePolicy::OpenAdaptive, false);
    CHECK(rig.ctl.tick_issue(0).empty());
    rig.q.run_until(5 * kPsPerUs);
    CHECK(rig.ctl.trace().empty());
    CHECK(rig.ctl.rank(0).history().size() == 1);
    CHECK(rig.ctl.rank(0).power() == PowerState::IDLE);
}

TEST_CASE("without power-down refresh has period tREFI and states stay awake")
{
    for (std::uint32_t ranks : {1u, 2u}) {
        Rig rig(ranks, PagePolicy::OpenAdaptive, false);
        for (std::uint32_t r = 0; r < ranks; ++r)
            rig.read(r, 0, 0);
        rig.q.run_until(2 * kPsPerMs);
        rig.ctl.sync(2 * kPsPerMs);
        for (std::uint32_t r = 0; r < ranks; ++r) {
            std::vector<SimTime> refa;
            for (const auto& c : rig.ctl.trace())
                if (c.cmd.rank == r && c.cmd.kind == K::REFA)
                    refa.push_back(c.issue_at);
            REQUIRE(refa.size() > 10);
            for (std::size_t i = 2; i < refa.size(); ++i)
                CHECK(refa[i] - refa[i - 1] == rig.dev.timing.tREFI);
            for (const auto& h : rig.ctl.rank(r).history())
                CHECK_FALSE(is_powered_down(h.state));
        }
    }
}

TEST_CASE("ranks refresh staggered by tREFI / ranks")
{
    Rig rig(2, PagePolicy::OpenAdaptive, false);
    rig.q.run_until(8 * kPsPerUs);
    const auto& t = rig.ctl.trace();
    REQUIRE(t.size() == 2);
    CHECK(t[0].cmd.rank == 0);
    CHECK(t[0].issue_at == 3900000);
    CHECK(t[1].cmd.rank == 1);
    CHECK(t[1].issue_at == 7800000);
}

TEST_CASE("staggered chain in a long idle interval")
{
    for (std::uint32_t ranks : {1u, 2u}) {
        Rig rig(ranks);
        for (std::uint32_t r = 0; r < ranks; ++r)
            rig.read(r, 0, 0);
        rig.q.run_until(kPsPerMs);
        for (std::uint32_t r = 0; r < ranks; ++r) {
            const auto& h = rig.ctl.rank(r).history();
            auto find = [&](PowerState s) {
                return std::find_if(h.begin(), h.end(),
                                    [s](const StateChange& c) {
                                        return c.state == s;
                                    });
            };
            const auto a = find(PowerState::PDNA);
            const auto p = find(PowerState::PDNP);
            const auto s = find(PowerState::SREF);
            REQUIRE(s != h.end());
            CHECK(a < p);
            CHECK(p < s);
            CHECK(s == h.end() - 1);
        }
    }
}

TEST_CASE("every accepted request is served once and refresh is never late")
{
    DeviceConfig dev = device(2);
    ControllerConfig cfg;
    for (PagePolicy pol : {PagePolicy::OpenAdaptive, PagePolicy::ClosedAdaptive}) {
        cfg.page_policy = pol;
        PhaseConfig ph;
        ph.duration = 40 * kPsPerUs;
        std::tie(ph.itt_min, ph.itt_max) = itt_bounds(dev, DensityProfile::VeryDense);
        ph.n_seq_bytes = 256;
        const RunResult res = simulate_phases(dev, cfg, {ph}, "t", true);
        std::uint64_t columns = 0;
        for (const auto& c : res.trace)
            columns += is_column(c.cmd.kind);
        const ReportRow& row = res.rows.front();
        CHECK(row.requests == res.injected);
        CHECK(columns == row.row_hits + row.row_misses);
        CHECK(columns <= res.injected);
        CHECK(res.injected - columns <= 2 * 64);

        EventQueue q;
        Controller ctl(q, dev, cfg);
        Rng rng(3);
        std::uint64_t done = 0;
        ctl.on_completion([&](const Request&, SimTime) { ++done; });
        std::uint64_t accepted = 0;
        for (int i = 0; i < 400; ++i) {
            q.schedule(i * 20000, EventKind::RequestArrival, [&] {
                Request r;
                r.op = rng.below(3) ? Op::Read : Op::Write;
                r.address = rng.below(dev.geometry.capacity_bytes()) & ~63ULL;
                accepted += ctl.enqueue(r);
            });
        }
        q.run_until(100 * kPsPerUs);
        CHECK(done == accepted);
        CHECK(ctl.counters().row_hits + ctl.counters().row_misses == accepted);
        for (std::uint32_t r = 0; r < 2; ++r)
            CHECK(ctl.rank_counters(r).max_refresh_lateness <= dev.timing.tRFC);
    }
}

TEST_CASE("both page policies agree while every access hits a backlogged bank")
{
    std::vector<std::vector<CommandRecord>> streams;
    for (PagePolicy pol : {PagePolicy::OpenAdaptive, PagePolicy::ClosedAdaptive}) {
        Rig rig(1, pol, false);
        for (int i = 0; i < 32; ++i)
            rig.read(0, 3, 7, i);
        rig.q.run_until(2 * kPsPerUs);
        streams.push_back(rig.ctl.trace());
    }
    REQUIRE(streams[0].size() == 33);
    REQUIRE(streams[1].size() == 33);
    // the final access ends the backlog; up to it the streams match
    for (std::size_t i = 0; i + 1 < 33; ++i) {
        CHECK(streams[0][i].issue_at == streams[1][i].issue_at);
        CHECK(streams[0][i].cmd == streams[1][i].cmd);
    }
    CHECK(streams[1].back().cmd.kind == K::RDA);
}

TEST_CASE("controller config validation")
{
    ControllerConfig c;
    CHECK_NOTHROW(c.validate());
    c.read_queue_depth = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.address_map = "RoBaRaCoCh";
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

}
