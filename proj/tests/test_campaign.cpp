#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kronos/campaign.hpp"

using namespace kronos;
namespace fs = std::filesystem;

namespace {

const Harness& shared_harness() {
    static const Harness h(SystemConfig{}, Thresholds{});
    return h;
}

// Two-sided normal quantile from a Simpson-integrated density and bisection;
// shares nothing with the library's cutoff code.
double numeric_cutoff(double confidence) {
    auto mass = [](double z) {  // P(-z < X < z)
        const int n = 2000;
        const double h = z / n;
        auto f = [](double x) { return std::exp(-x * x / 2) / std::sqrt(2 * std::acos(-1.0)); };
        double s = f(0) + f(z);
        for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
        return 2 * s * h / 3;
    };
    double lo = 0, hi = 10;
    for (int i = 0; i < 100; ++i) {
        const double mid = (lo + hi) / 2;
        (mass(mid) < confidence ? lo : hi) = mid;
    }
    return (lo + hi) / 2;
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("kronos-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CampaignConfig small_config(std::uint32_t n, std::vector<std::string> targets) {
    CampaignConfig c;
    c.n_per_location = n;
    c.targets = std::move(targets);
    return c;
}

}  // namespace

TEST_CASE("sample size") {
    CHECK(compute_sample_size(0.99, 0.05, 0.5) == 666);
    CHECK(compute_sample_size(0.95, 0.05, 0.5) == 385);
    const double t = numeric_cutoff(0.95);
    CHECK(t == doctest::Approx(1.95996).epsilon(1e-4));
    CHECK(static_cast<std::uint64_t>(std::ceil(t * t * 0.25 / 0.0025)) == 385);
    // 99% with the exact cutoff gives 664; the tabulated two-decimal cutoff gives 666.
    const double t99 = numeric_cutoff(0.99);
    CHECK(static_cast<std::uint64_t>(std::ceil(t99 * t99 * 0.25 / 0.0025)) == 664);
    CHECK(normal_cutoff(0.99) == 2.58);
    CHECK(normal_cutoff(0.975) == doctest::Approx(numeric_cutoff(0.975)).epsilon(1e-4));

    CHECK(compute_sample_size(0.99, 0.05, 0.0) == 1);
    for (double conf : {0.9, 0.95, 0.99}) {
        const auto inf = compute_sample_size(conf, 0.05, 0.5);
        const auto fin = compute_sample_size(conf, 0.05, 0.5, 1000000000ull);
        CHECK((inf > fin ? inf - fin : fin - inf) <= 1);
    }
    CHECK(compute_sample_size(0.99, 0.05, 0.5, 100) < 100);

    CHECK_THROWS_AS(compute_sample_size(0.99, 0.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(compute_sample_size(0.99, 1.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(compute_sample_size(1.0, 0.05, 0.5), InvalidParameter);
    CHECK_THROWS_AS(compute_sample_size(0.4, 0.05, 0.5), InvalidParameter);
    CHECK_THROWS_AS(compute_sample_size(0.99, 0.05, 1.5), InvalidParameter);
}

TEST_CASE("campaign config validation") {
    CampaignConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.per_location() == 666);
    c.workers = 0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c.workers = 4;
    c.fault_types.clear();
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("plans") {
    const auto& h = shared_harness();
    CampaignConfig defaults;
    defaults.fault_types = {FaultType::transient};
    const auto full = plan_campaign(defaults, h.catalog(), h.golden());
    CHECK(full.size() == 31302);

    auto c = small_config(10, {"xTickCount", "pxCurrentTCB", "currentTCB.uxPriority"});
    c.fault_types = {FaultType::transient};
    const auto plan = plan_campaign(c, h.catalog(), h.golden());
    CHECK(plan.size() == 30);
    CHECK(plan == plan_campaign(c, h.catalog(), h.golden()));
    c.seed = 2;
    CHECK(plan != plan_campaign(c, h.catalog(), h.golden()));

    c.fault_types = {FaultType::transient, FaultType::permanent};
    const auto both = plan_campaign(c, h.catalog(), h.golden());
    CHECK(both.size() == 60);
    CHECK(both.front().type == FaultType::transient);
    CHECK(both.back().type == FaultType::permanent);

    c.targets = {"nope"};
    CHECK_THROWS_AS(plan_campaign(c, h.catalog(), h.golden()), UnknownTarget);
}

TEST_CASE("worker count does not change results") {
    const auto& h = shared_harness();
    auto c = small_config(12, {});
    c.fault_types = {FaultType::transient, FaultType::permanent};
    const auto plan = plan_campaign(c, h.catalog(), h.golden());
    std::uint64_t last_done = 0;
    const auto one = run_campaign(plan, h, 1, c.seed, [&](std::uint64_t done, std::uint64_t) { last_done = done; });
    const auto four = run_campaign(plan, h, 4, c.seed);
    CHECK(last_done == plan.size());
    CHECK(one.runs == four.runs);
    CHECK(format_runs_csv(one.runs) == format_runs_csv(four.runs));
    REQUIRE(one.runs.size() == plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) CHECK(one.runs[i].run_id == i);

    std::uint64_t conserved = 0;
    for (const auto& t : one.per_target) {
        conserved += t.counts.total();
        double sum = 0;
        for (auto o : kAllOutcomes) sum += t.counts.percent(o);
        CHECK(sum == doctest::Approx(100.0).epsilon(1e-4));
    }
    CHECK(conserved == plan.size());
    CHECK(one.per_target.size() == 2 * h.catalog().size());
}

TEST_CASE("null plan is all BENIGN") {
    const auto& h = shared_harness();
    const CampaignPlan plan(20, FaultSpec{});
    const auto report = run_campaign(plan, h, 2, 9);
    for (const auto& r : report.runs) {
        CHECK(r.outcome == Outcome::BENIGN);
        CHECK(r.target == "none");
        CHECK(r.run_ticks == h.golden().total_ticks);
    }
    CHECK(report.totals.at("none").percent(Outcome::BENIGN) == 100.0);
}

TEST_CASE("failing run surfaces its spec index") {
    const auto& h = shared_harness();
    auto c = small_config(3, {"xTickCount"});
    c.fault_types = {FaultType::transient};
    auto plan = plan_campaign(c, h.catalog(), h.golden());
    plan[1].target = "not-a-target";
    try {
        run_campaign(plan, h, 2, 1);
        FAIL("expected WorkerFailure");
    } catch (const WorkerFailure& f) {
        CHECK(f.spec_index() == 1);
        CHECK(f.partial().runs.size() == 2);  // completed runs are kept
    }
    CHECK_THROWS_AS(run_campaign({}, h, 1, 1), InvalidParameter);
}

TEST_CASE("report files") {
    const auto& h = shared_harness();
    auto c = small_config(6, {"xTickCount", "pxCurrentTCB", "xDelayedTaskList2"});
    const auto plan = plan_campaign(c, h.catalog(), h.golden());
    auto report = run_campaign(plan, h, 2, c.seed);
    report.duration_s = 1.25;

    CHECK(parse_runs_csv(format_runs_csv(report.runs)) == report.runs);
    CHECK(format_runs_csv(report.runs).rfind(kRunsCsvHeader, 0) == 0);
    CHECK_THROWS_AS(parse_runs_csv("bad,header\n"), std::runtime_error);

    const auto plots = format_plot_data(report);
    CHECK(plots.contains("variable_transient"));
    CHECK(plots.contains("list_permanent"));
    for (const auto& [key, csv] : plots) {
        CHECK(csv.rfind("target,BENIGN,DELAY,SDC,SDC_DELAY,HANG,CRASH,INVALID\n", 0) == 0);
    }
    const auto summary = format_summary(report);
    CHECK(summary.find("[totals]") != std::string::npos);
    CHECK(summary.find("duration_s: 1.25") != std::string::npos);

    const auto dir = scratch_dir("report");
    emit_report(report, dir);
    CHECK(fs::exists(dir / "runs.csv"));
    CHECK(fs::exists(dir / "report.summary"));
    CHECK(fs::exists(dir / "plotdata" / "pointer_transient.csv"));

    const auto first = read_text_file(dir / "report.summary");
    const auto regenerated = regenerate_report(dir);
    CHECK(regenerated.runs == report.runs);
    CHECK(read_text_file(dir / "report.summary") == first);
    regenerate_report(dir);
    CHECK(read_text_file(dir / "report.summary") == first);
    CHECK(read_text_file(dir / "plotdata" / "pointer_transient.csv") == plots.at("pointer_transient"));

    CHECK_THROWS_AS(regenerate_report(dir / "missing"), IoError);
    CHECK_THROWS_AS(write_text_file(dir / "no" / "such" / "file", "x"), IoError);
    fs::remove_all(dir);
}
