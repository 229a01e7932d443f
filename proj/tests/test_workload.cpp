#include "dlps/errors.hpp"
#include "dlps/runner.hpp"
#include "dlps/workload.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace dlps;

namespace {

DeviceConfig
ddr4_preset(std::uint32_t ranks = 1)
{
    DeviceConfig d = device_preset("ddr4-2400-8gb-x4");
    d.geometry.ranks = ranks;
    return d;
}

PhaseConfig
phase(const DeviceConfig& dev, DensityProfile p, std::uint32_t bu,
      std::uint32_t ns, SimTime duration)
{
    PhaseConfig ph;
    ph.profile = p;
    std::tie(ph.itt_min, ph.itt_max) = itt_bounds(dev, p);
    ph.bank_util = bu;
    ph.n_seq_bytes = ns;
    ph.duration = duration;
    return ph;
}

} // namespace

TEST_SUITE("workload") {

TEST_CASE("ITT bounds per profile")
{
    const DeviceConfig d = ddr4_preset();
    CHECK(itt_bounds(d, DensityProfile::VeryDense) ==
          std::pair<SimTime, SimTime>{3332, 46993});
    CHECK(itt_bounds(d, DensityProfile::Dense).second == 939860);
    CHECK(itt_bounds(d, DensityProfile::Sparse).second == 4699300);
    CHECK(parse_density_profile("very-dense") == DensityProfile::VeryDense);
    CHECK_THROWS_AS(parse_density_profile("medium"), ConfigError);
}

TEST_CASE("sweep shape")
{
    SweepConfig s;
    const DeviceConfig d = ddr4_preset();
    CHECK(s.memory_configs().size() == 4);
    const auto phases = s.phases(d);
    REQUIRE(phases.size() == 27);
    for (std::size_t i = 0; i < phases.size(); ++i) {
        CHECK(phases[i].seed == s.base_seed + i);
        CHECK(phases[i].duration == 250 * kPsPerUs);
        CHECK_NOTHROW(phases[i].validate(d));
    }
    CHECK(phases[0].label() == "very_dense/b1/s64");
    CHECK(phases[26].label() == "sparse/b16/s512");
}

TEST_CASE("phase validation")
{
    const DeviceConfig d = ddr4_preset();
    PhaseConfig p = phase(d, DensityProfile::Dense, 8, 256, kPsPerUs);
    CHECK_NOTHROW(p.validate(d));
    PhaseConfig q = p;
    q.n_seq_bytes = 96;
    CHECK_THROWS_AS(q.validate(d), ConfigError);
    q = p;
    q.bank_util = 17;
    CHECK_THROWS_AS(q.validate(d), ConfigError);
    q = p;
    q.itt_min = q.itt_max + 1;
    CHECK_THROWS_AS(q.validate(d), ConfigError);
    q = p;
    q.n_seq_bytes = 4096;
    CHECK_THROWS_AS(q.validate(d), ConfigError);
}

TEST_CASE("address stream: sequential blocks, aligned, confined to banks")
{
    const DeviceConfig d = ddr4_preset();
    for (std::uint32_t bu : {1u, 8u, 16u})
        for (std::uint32_t ns : {64u, 256u, 512u}) {
            PhaseConfig p = phase(d, DensityProfile::VeryDense, bu, ns, kPsPerUs);
            AddressStream s(p, d.geometry);
            Rng rng(bu * 1000 + ns);
            for (int blk = 0; blk < 2000; ++blk) {
                const std::uint64_t first = s.next(rng);
                CHECK(first % ns == 0);
                CHECK(first < p.addr_range);
                CHECK(decode(first, d.geometry).bank < bu);
                for (std::uint32_t k = 1; k < ns / 64; ++k) {
                    const std::uint64_t a = s.next(rng);
                    CHECK(a == first + 64 * k);
                    CHECK(decode(a, d.geometry).row ==
                          decode(first, d.geometry).row);
                }
            }
        }
}

TEST_CASE("injected addresses stay in the allowed banks")
{
    const DeviceConfig d = ddr4_preset(2);
    EventQueue q;
    Controller ctl(q, d, ControllerConfig{});
    TrafficGenerator gen(q, ctl);
    gen.record_injections(true);
    PhaseConfig p = phase(d, DensityProfile::VeryDense, 8, 64, 100 * kPsPerUs);
    gen.start_phase(p, 0);
    q.run_until(100 * kPsPerUs);
    REQUIRE(gen.injected_addresses().size() > 500);
    for (std::uint64_t a : gen.injected_addresses())
        CHECK(decode(a, d.geometry).bank < 8);
    CHECK(gen.stats().injected == gen.injected_addresses().size());
}

TEST_CASE("inter-injection gaps are uniform (KS statistic)")
{
    const DeviceConfig d = ddr4_preset();
    EventQueue q;
    ControllerConfig cfg;
    cfg.read_queue_depth = 1 << 20; // never full
    Controller ctl(q, d, cfg);
    ctl.set_trace_enabled(false);
    TrafficGenerator gen(q, ctl);
    gen.record_injections(true);
    PhaseConfig p = phase(d, DensityProfile::Sparse, 16, 64, 0);
    const std::size_t n = 100000;
    const double mean_gap = (p.itt_min + p.itt_max) / 2.0;
    p.duration = static_cast<SimTime>(mean_gap * (n + 2000));
    gen.start_phase(p, 0);
    q.run_until(p.duration);
    const auto& t = gen.injection_times();
    REQUIRE(t.size() > n);
    CHECK(gen.stats().rejections == 0);
    std::vector<double> gaps;
    for (std::size_t i = 1; i <= n; ++i)
        gaps.push_back(static_cast<double>(t[i] - t[i - 1]));
    std::sort(gaps.begin(), gaps.end());
    const double lo = static_cast<double>(p.itt_min);
    const double span = static_cast<double>(p.itt_max - p.itt_min) + 1;
    double ks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cdf = (gaps[i] - lo + 1) / span;
        ks = std::max({ks, std::abs(cdf - double(i + 1) / n),
                       std::abs(cdf - double(i) / n)});
    }
    CHECK(ks < 0.01);
}

TEST_CASE("back-pressure: a full queue holds requests and lowers the count")
{
    const DeviceConfig d = ddr4_preset();
    PhaseConfig p = phase(d, DensityProfile::VeryDense, 1, 64, 50 * kPsPerUs);
    auto injected = [&](std::uint32_t depth) {
        EventQueue q;
        ControllerConfig cfg;
        cfg.read_queue_depth = depth;
        Controller ctl(q, d, cfg);
        TrafficGenerator gen(q, ctl);
        gen.start_phase(p, 0);
        q.run_until(p.duration);
        return gen.stats();
    };
    const GeneratorStats free = injected(1 << 20);
    const GeneratorStats tight = injected(64);
    CHECK(free.rejections == 0);
    CHECK(free.injected == free.generated);
    CHECK(tight.rejections > 0);
    CHECK(tight.injected < free.injected);
}

TEST_CASE("the first very-dense phase keeps the read queue nearly full")
{
    const DeviceConfig d = ddr4_preset();
    PhaseConfig p = phase(d, DensityProfile::VeryDense, 1, 64, 250 * kPsPerUs);
    const RunResult res = simulate_phases(d, ControllerConfig{}, {p}, "x", false);
    CHECK(res.rows[0].avg_read_queue > 0.9 * 64);
}

TEST_CASE("same phase and seed give the same stream")
{
    const DeviceConfig d = ddr4_preset();
    PhaseConfig p = phase(d, DensityProfile::Dense, 8, 256, 100 * kPsPerUs);
    auto stream = [&](std::uint64_t seed) {
        p.seed = seed;
        EventQueue q;
        Controller ctl(q, d, ControllerConfig{});
        TrafficGenerator gen(q, ctl);
        gen.record_injections(true);
        gen.start_phase(p, 0);
        q.run_until(p.duration);
        return std::pair(gen.injection_times(), gen.injected_addresses());
    };
    CHECK(stream(5) == stream(5));
    CHECK(stream(5) != stream(6));
}

TEST_CASE("row-hit rate follows the sequential block length")
{
    const DeviceConfig d = ddr4_preset();
    const double expect[] = {0.0, 0.75, 0.875};
    const std::uint32_t ns[] = {64, 256, 512};
    for (int i = 0; i < 3; ++i) {
        PhaseConfig p = phase(d, DensityProfile::VeryDense, 16, ns[i],
                              100 * kPsPerUs);
        const RunResult res =
            simulate_phases(d, ControllerConfig{}, {p}, "x", false);
        CHECK(std::abs(res.rows[0].row_hit_rate() - expect[i]) <= 0.02);
    }
}

TEST_CASE("trace parsing")
{
    std::istringstream one("0 R 0x0 64\n");
    const auto r = parse_trace(one);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == TraceRecord{0, Op::Read, 0, 64});

    std::istringstream two("# time op addr size\n100 W 0x40 64\n\n200 r 80 128\n");
    const auto t = parse_trace(two);
    REQUIRE(t.size() == 2);
    CHECK(t[0] == TraceRecord{100, Op::Write, 0x40, 64});
    CHECK(t[1] == TraceRecord{200, Op::Read, 0x80, 128});

    auto fails = [](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        try {
            parse_trace(in, "t.trc");
        } catch (const InputError& e) {
            const std::string msg = e.what();
            CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
            return true;
        }
        return false;
    };
    CHECK(fails("10 R 0x0 64\n5 R 0x0 64\n", "t.trc:2"));
    CHECK(fails("10 X 0x0 64\n", "t.trc:1"));
    CHECK(fails("10 R zz 64\n", "hex"));
    CHECK(fails("10 R 0x0\n", "t.trc:1"));
    CHECK(fails("10 R 0x0 0\n", "size"));
    CHECK(fails("abc R 0x0 64\n", "timestamp"));
    CHECK_THROWS_AS(parse_trace_file("/nonexistent/trace"), InputError);
}

TEST_CASE("trace replay splits large records and hashes the stream")
{
    const DeviceConfig d = ddr4_preset();
    const std::vector<TraceRecord> recs{{0, Op::Read, 0x1000, 256},
                                        {10000, Op::Write, 0x20040, 64}};
    const RunResult a = simulate_trace(d, ControllerConfig{}, recs, "t");
    CHECK(a.injected == 5);
    CHECK(a.rows[0].completed == 5);
    ControllerConfig off;
    off.powerdown_enabled = false;
    const RunResult b = simulate_trace(d, off, recs, "t");
    CHECK(a.stream_hash == b.stream_hash);

    const std::vector<TraceRecord> bad{{0, Op::Read, d.geometry.capacity_bytes(), 64}};
    CHECK_THROWS_AS(simulate_trace(d, ControllerConfig{}, bad, "t"), InputError);
}

TEST_CASE("trace replay stalls under back-pressure")
{
    const DeviceConfig d = ddr4_preset();
    std::vector<TraceRecord> recs;
    for (int i = 0; i < 1000; ++i)
        recs.push_back({0, Op::Read, std::uint64_t(i) * 0x10000, 64});
    const RunResult r = simulate_trace(d, ControllerConfig{}, recs, "burst");
    CHECK(r.injected == 1000);
    CHECK(r.stall > 0);
    CHECK(r.rows[0].completed == 1000);
}

}
