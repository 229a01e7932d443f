#include "dlps/config.hpp"
#include "dlps/errors.hpp"
#include "dlps/runner.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace dlps;

namespace {

// Small sweep: both ranks and policies, one phase per profile, 20 us each.
RunConfig
mini_sweep()
{
    RunConfig c;
    c.workload = WorkloadKind::Sweep;
    c.sweep.bank_utils = {8};
    c.sweep.n_seq_bytes = {256};
    c.sweep.phase_duration = 20 * kPsPerUs;
    c.seed = 3;
    return c;
}

std::string
csv(const std::vector<ReportRow>& rows)
{
    std::ostringstream os;
    write_report_csv(os, rows);
    return os.str();
}

std::string
slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE("runner") {

TEST_CASE("CSV columns are fixed")
{
    const auto cols = report_columns();
    REQUIRE(cols.size() == 39);
    CHECK(cols.front() == "config");
    CHECK(cols[11] == "ACT_ps");
    CHECK(cols[17] == "ACT_E_J");
    CHECK(cols[27] == "total_J");
    CHECK(cols.back() == "exec_time_ps");
}

TEST_CASE("seeded mini-run matches the golden CSV")
{
    const std::string got = csv(run_sweep(mini_sweep(), 2));
    const std::string path =
        std::string(DLPS_SOURCE_DIR) + "/tests/golden/mini_sweep.csv";
    if (std::getenv("DLPS_UPDATE_GOLDEN")) {
        std::ofstream(path) << got;
    }
    const std::string want = slurp(path);
    REQUIRE_FALSE(want.empty());
    CHECK(got == want);
}

TEST_CASE("identical seeded runs produce identical bytes across thread counts")
{
    const std::string a = csv(run_sweep(mini_sweep(), 1));
    const std::string b = csv(run_sweep(mini_sweep(), 4));
    CHECK(a == b);
    RunConfig other = mini_sweep();
    other.seed = 4;
    CHECK(csv(run_sweep(other, 2)) != a);
}

TEST_CASE("rows are ordered by config then phase and residency is exact")
{
    const auto rows = run_sweep(mini_sweep(), 3);
    REQUIRE(rows.size() == 12);
    CHECK(rows[0].config_id == "1r-open_adaptive");
    CHECK(rows[3].config_id == "1r-closed_adaptive");
    CHECK(rows[6].config_id == "2r-open_adaptive");
    CHECK(rows[11].config_id == "2r-closed_adaptive");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].phase == i % 3);
        CHECK(rows[i].residency.total() == rows[i].ranks * rows[i].duration());
        for (const auto& r : rows[i].rank_residency)
            CHECK(r.total() == rows[i].duration());
        double sum = 0;
        for (double j : rows[i].energy.joules) {
            CHECK(j >= 0.0);
            sum += j;
        }
        CHECK(rows[i].energy.total() == doctest::Approx(sum));
    }
}

TEST_CASE("idle run: power-down on reaches self-refresh, off stays awake")
{
    RunConfig c;
    c.workload = WorkloadKind::Idle;
    const ReportRow on = run_single(c).rows.at(0);
    CHECK(on.residency[PowerState::SREF] > 8 * kPsPerMs);
    c.controller.powerdown_enabled = false;
    const ReportRow off = run_single(c).rows.at(0);
    CHECK(off.residency[PowerState::IDLE] + off.residency[PowerState::ACT] +
              off.residency[PowerState::REF] ==
          10 * kPsPerMs);
    CHECK(off.config_id == "1r-open_adaptive-pdoff");
}

TEST_CASE("a 250 us phase sees about 32 refreshes per rank")
{
    RunConfig c;
    const ReportRow r = run_single(c).rows.at(0);
    REQUIRE(r.rank_refresh_epochs.size() == 1);
    CHECK(r.rank_refresh_epochs[0] >= 31);
    CHECK(r.rank_refresh_epochs[0] <= 33);
}

TEST_CASE("worker count from the environment")
{
    setenv("DLPS_THREADS", "3", 1);
    CHECK(worker_threads() == 3);
    setenv("DLPS_THREADS", "zero", 1);
    CHECK_THROWS_AS(worker_threads(), ConfigError);
    unsetenv("DLPS_THREADS");
    CHECK(worker_threads() >= 1);
}

TEST_CASE("compare uses the same request stream for both runs")
{
    std::vector<TraceRecord> recs;
    for (int burst = 0; burst < 4; ++burst)
        for (int i = 0; i < 50; ++i)
            recs.push_back({SimTime(burst) * 40 * kPsPerUs + i * 5000, Op::Read,
                            std::uint64_t(i) * 0x840, 64});
    const CompareReport r = run_compare(RunConfig{}, recs, "bursty");
    CHECK(r.injected_on == r.injected_off);
    CHECK(r.hash_on == r.hash_off);
    CHECK(r.on.energy.total() < r.off.energy.total());
    CHECK(r.on.exec_time >= r.off.exec_time);
    CHECK(r.share_pct(EnergyComponent::SREF_E) +
              r.share_pct(EnergyComponent::PDNP_E) >
          0.0);
}

TEST_CASE("a saturating trace has no power-down to trade")
{
    std::vector<TraceRecord> recs;
    for (int i = 0; i < 2000; ++i)
        recs.push_back({SimTime(i) * 3332, Op::Read, std::uint64_t(i % 64) * 64, 64});
    const CompareReport r = run_compare(RunConfig{}, recs, "stream");
    CHECK(std::abs(r.energy_delta_pct()) < 1.0);
    CHECK(std::abs(r.exec_time_delta_pct()) < 1.0);
}

TEST_CASE("report writers")
{
    const auto rows = run_sweep(mini_sweep(), 2);
    std::ostringstream res, en, rk;
    write_residency_pivot(res, rows);
    write_energy_pivot(en, rows);
    write_ranks_csv(rk, rows);
    const std::string r = res.str(), e = en.str();
    CHECK(r.rfind("config,phase,workload,state,time_ps\n", 0) == 0);
    CHECK(e.rfind("config,phase,workload,component,energy_J\n", 0) == 0);
    CHECK(std::count(r.begin(), r.end(), '\n') == 1 + 12 * 6);
    CHECK(std::count(e.begin(), e.end(), '\n') == 1 + 12 * 10);
    CHECK(!format_summary(rows).empty());
}

}
