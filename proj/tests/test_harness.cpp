#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "kronos/harness.hpp"

using namespace kronos;

namespace {

const Harness& shared_harness() {
    static const Harness h(SystemConfig{}, Thresholds{});
    return h;
}

FaultSpec fault(std::string target, std::uint32_t byte, unsigned bit, SimTime at,
                FaultType type = FaultType::transient) {
    FaultSpec s;
    s.target = std::move(target);
    s.byte_off = byte;
    s.bit_off = bit;
    s.type = type;
    s.t_inject = at;
    return s;
}

}  // namespace

TEST_CASE("classification examples") {
    const Thresholds t;
    CHECK(classify(1040, true, false, false, true, 1000, t) == Outcome::BENIGN);
    CHECK(classify(1050, true, false, false, true, 1000, t) == Outcome::BENIGN);
    CHECK(classify(1060, true, false, false, true, 1000, t) == Outcome::DELAY);
    CHECK(classify(1060, false, false, false, true, 1000, t) == Outcome::SDC_DELAY);
    CHECK(classify(1000, false, false, false, true, 1000, t) == Outcome::SDC);
    CHECK(classify(3000, false, false, true, true, 1000, t) == Outcome::HANG);
    CHECK(classify(10, true, true, false, true, 1000, t) == Outcome::CRASH);
    CHECK(classify(10, true, true, true, false, 1000, t) == Outcome::INVALID);
    CHECK(t.hang_limit(1000) == 3000);
    CHECK(t.hang_limit(92) == 276);
}

TEST_CASE("classification is total and follows the precedence") {
    const Thresholds t;
    std::set<Outcome> reached;
    for (int bits = 0; bits < 16; ++bits) {
        const bool match = bits & 1, panicked = bits & 2, timed_out = bits & 4, valid = bits & 8;
        for (std::uint32_t ticks : {1000u, 1049u, 1051u, 2999u}) {
            const auto o = classify(ticks, match, panicked, timed_out, valid, 1000, t);
            reached.insert(o);
            if (!valid) {
                CHECK(o == Outcome::INVALID);
            } else if (panicked) {
                CHECK(o == Outcome::CRASH);
            } else if (timed_out) {
                CHECK(o == Outcome::HANG);
            } else {
                const bool late = ticks * 100 > 105 * 1000;
                const auto expect = match ? (late ? Outcome::DELAY : Outcome::BENIGN)
                                          : (late ? Outcome::SDC_DELAY : Outcome::SDC);
                CHECK(o == expect);
            }
        }
    }
    CHECK(reached.size() == kAllOutcomes.size());
}

TEST_CASE("monotone timing rule") {
    const Thresholds t;
    std::mt19937 rng(11);
    for (int i = 0; i < 10000; ++i) {
        const std::uint32_t golden = 1 + rng() % 500;
        std::uint32_t a = rng() % (2 * golden), b = rng() % (2 * golden);
        if (a > b) std::swap(a, b);
        const auto oa = classify(a, true, false, false, true, golden, t);
        const auto ob = classify(b, true, false, false, true, golden, t);
        if (oa == Outcome::DELAY) CHECK(ob == Outcome::DELAY);
    }
}

TEST_CASE("thresholds validation") {
    CHECK_NOTHROW(Thresholds{}.validate());
    CHECK_THROWS_AS((Thresholds{0.0, 3.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Thresholds{0.5, 0.4}.validate()), std::invalid_argument);
    CHECK(parse_outcome("SDC_DELAY") == Outcome::SDC_DELAY);
    CHECK_FALSE(parse_outcome("benign"));
}

TEST_CASE("golden profile") {
    const auto& h = shared_harness();
    const auto& g = h.golden();
    CHECK(g.per_task.size() == 5);
    std::uint32_t latest = 0;
    for (const auto& [id, out] : g.per_task) latest = std::max(latest, out.completion_tick);
    CHECK(g.total_ticks >= latest);
    CHECK(g.total_ticks > 0);
    CHECK(golden_run(h.config(), h.inputs()) == g);

    const auto text = format_golden_profile(g);
    CHECK(parse_golden_profile(text) == g);
    CHECK_THROWS_AS(parse_golden_profile("total_ticks=abc\n"), std::runtime_error);
}

TEST_CASE("null fault is golden") {
    const auto& h = shared_harness();
    const auto r = h.execute_run(std::nullopt, EventRecording::full);
    CHECK(r.outcome == Outcome::BENIGN);
    CHECK(r.run_ticks == h.golden().total_ticks);
    CHECK(r.outputs == h.golden().per_task);
    REQUIRE_FALSE(r.events.empty());
    CHECK(r.events.back().kind == EventKind::shutdown);
}

TEST_CASE("targeted injections") {
    const auto& h = shared_harness();
    SUBCASE("pxCurrentTCB high byte") {
        const auto r = h.execute_run(fault("pxCurrentTCB", 3, 7, {1, 0}));
        CHECK(r.outcome == Outcome::CRASH);
        REQUIRE(r.panic);
        CHECK(r.panic->reason == PanicReason::invalid_handle);
        CHECK(r.run_ticks <= 2);
    }
    SUBCASE("empty list is INVALID regardless of outcome") {
        const auto r = h.execute_run(fault("xDelayedTaskList2", 0, 0, {3, 1}));
        CHECK(r.outcome == Outcome::INVALID);
        CHECK_FALSE(r.validity.valid);
        const auto s = h.execute_run(fault("xSuspendedTaskList", 0, 0, {0, 0}));
        CHECK(s.outcome == Outcome::INVALID);
    }
    SUBCASE("corrupting xTickCount shifts timing or data") {
        const auto r = h.execute_run(fault("xTickCount", 3, 6, {2, 0}));
        CHECK(r.outcome != Outcome::INVALID);
        CHECK(r.injection);
    }
    SUBCASE("fault scheduled past shutdown never fires") {
        const auto r = h.execute_run(fault("xTickCount", 0, 0, {5000, 0}));
        CHECK(r.outcome == Outcome::INVALID);
        CHECK_FALSE(r.injection);
    }
    SUBCASE("unknown target is rejected") {
        CHECK_THROWS_AS(h.execute_run(fault("nope", 0, 0, {0, 0})), UnknownTarget);
    }
}

TEST_CASE("forced-stop bound holds over random faults") {
    const auto& h = shared_harness();
    const auto limit = h.thresholds().hang_limit(h.golden().total_ticks);
    const auto plan = sample_fault_space(h.catalog(), 4, leading_window(h.golden().total_ticks, 0.1),
                                         FaultType::permanent, 77);
    for (const auto& f : plan) {
        const auto r = h.execute_run(f);
        CHECK(r.run_ticks <= limit + 1);
        if (r.outcome == Outcome::HANG) CHECK(r.timed_out);
    }
}

TEST_CASE("run log round trip") {
    const auto& h = shared_harness();
    std::vector<std::optional<FaultSpec>> faults = {std::nullopt, fault("pxCurrentTCB", 3, 7, {1, 0}),
                                                    fault("xTickCount", 3, 6, {2, 0}),
                                                    fault("xDelayedTaskList2", 0, 0, {3, 1})};
    auto stuck = fault("uxTopReadyPriority", 0, 1, {4, 2}, FaultType::permanent);
    stuck.stuck_value = 1;
    faults.push_back(stuck);
    for (const auto& f : faults) {
        const auto r = h.execute_run(f, EventRecording::full);
        std::stringstream ss;
        emit_run_log(r, 42, ss);
        const auto text = ss.str();
        const auto parsed = parse_run_log(ss);
        CHECK(parsed.seed == 42);
        CHECK(parsed.fault == f);
        CHECK(parsed.outcome == r.outcome);
        CHECK(parsed.run_ticks == r.run_ticks);
        CHECK(parsed.events == r.events);
        CHECK(replay_classification(parsed, h.thresholds()) == r.outcome);
        if (r.outcome == Outcome::CRASH) {
            CHECK(parsed.panic_reason == r.panic->reason);
            CHECK(text.find(std::string("panic=") + to_string(r.panic->reason)) != std::string::npos);
        }
        if (r.outcome == Outcome::BENIGN) CHECK(parsed.events.back().kind == EventKind::shutdown);
    }
    std::stringstream bad("garbage\n");
    CHECK_THROWS_AS(parse_run_log(bad), std::runtime_error);
}
