#include <doctest.h>

#include <map>
#include <set>

#include "kronos/targets.hpp"
#include "kronos/workloads.hpp"
#include "test_support.hpp"

using namespace kronos;
using kronos::testing::step_tick;

namespace {

struct Booted {
    Kernel kernel;
    OutputSink sink;
    Booted() {
        install_workloads(kernel, WorkloadInputs::build({}), sink);
        kernel.start_scheduler();
    }
};

}  // namespace

TEST_CASE("target catalog") {
    Booted b;
    const auto catalog = gather_targets(b.kernel);
    CHECK(catalog.size() == 47);

    std::map<TargetCategory, int> per_category;
    std::set<std::string> names;
    for (const auto& t : catalog) {
        ++per_category[t.category];
        names.insert(t.name);
        CHECK(t.size > 0);
        CHECK(t.fault_space() == std::uint64_t{t.size} * 16);
        CHECK_FALSE(t.hierarchy.empty());
        if (t.category == TargetCategory::tcb_field) {
            CHECK(t.relative_to_current_tcb());
            CHECK(t.base + t.size <= layout::kTcbSize);
        } else {
            CHECK(b.kernel.image().in_range(t.base, t.size));
        }
    }
    CHECK(names.size() == catalog.size());
    CHECK(per_category[TargetCategory::variable] == 12);
    CHECK(per_category[TargetCategory::pointer] == 6);
    CHECK(per_category[TargetCategory::list] == 14);
    CHECK(per_category[TargetCategory::tcb_field] == 15);

    const auto* cur = find_target(catalog, "pxCurrentTCB");
    REQUIRE(cur);
    CHECK(cur->category == TargetCategory::pointer);
    CHECK(cur->size == 4);
    CHECK(cur->base == b.kernel.var_address(Var::pxCurrentTCB));
    CHECK(format_target_line(*cur) == "pxCurrentTCB,pointer,4,always");

    const auto* ready0 = find_target(catalog, "pxReadyTasksLists[0]");
    REQUIRE(ready0);
    CHECK(ready0->base == b.kernel.ready_list_address(0));
    CHECK(ready0->validity == ValidityRule::nonempty_list);
    CHECK(find_target(catalog, "nope") == nullptr);

    // Same catalog regardless of when it is gathered.
    for (std::uint32_t t = 0; t < 5; ++t) step_tick(b.kernel, t);
    const auto later = gather_targets(b.kernel);
    REQUIRE(later.size() == catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        CHECK(later[i].name == catalog[i].name);
        CHECK(later[i].base == catalog[i].base);
    }
}

TEST_CASE("category and rule names round-trip") {
    for (auto c : {TargetCategory::variable, TargetCategory::pointer, TargetCategory::list,
                   TargetCategory::tcb_field}) {
        CHECK(parse_target_category(to_string(c)) == c);
    }
    CHECK_FALSE(parse_target_category("stack"));
    CHECK(std::string(to_string(ValidityRule::mutex_used)) == "mutex_used");
}

TEST_CASE("validity predicates") {
    Booted b;
    const auto catalog = gather_targets(b.kernel);
    auto verdict = [&](std::string_view name) { return check_validity(*find_target(catalog, name), b.kernel); };

    CHECK(verdict("xTickCount").valid);
    CHECK(verdict("pxReadyTasksLists[1]").valid);
    const auto empty = verdict("pxReadyTasksLists[5]");
    CHECK_FALSE(empty.valid);
    CHECK_FALSE(empty.reason.empty());
    CHECK_FALSE(verdict("xTasksWaitingTermination").valid);

    // The timer daemon is current first; it uses neither notifications nor mutexes.
    REQUIRE(b.kernel.current_tcb() == b.kernel.timer_tcb());
    CHECK_FALSE(verdict("currentTCB.ulNotifiedValue").valid);
    CHECK_FALSE(verdict("currentTCB.uxMutexesHeld").valid);
    CHECK_FALSE(verdict("currentTCB.pxTaskTag").valid);
    CHECK(verdict("currentTCB.uxPriority").valid);

    // After their first slice the workloads have exercised both.
    step_tick(b.kernel, 0);
    step_tick(b.kernel, 1);
    REQUIRE(b.kernel.role_of(b.kernel.current_tcb()) == TaskRole::user);
    step_tick(b.kernel, 2);
    const auto f = b.kernel.features(b.kernel.tcb_of("ADPCM_ENC").value());
    CHECK(f.notification_used);
    CHECK(f.mutex_used);
}

TEST_CASE("injection point resolution") {
    Booted b;
    const auto catalog = gather_targets(b.kernel);
    const auto* tick = find_target(catalog, "xTickCount");
    CHECK(resolve_injection_point(*tick, 2, 5, b.kernel) == InjectionPoint{tick->base + 2, 5});
    CHECK_THROWS_AS(resolve_injection_point(*tick, 4, 0, b.kernel), OffsetOutOfRange);
    CHECK_THROWS_AS(resolve_injection_point(*tick, 0, 8, b.kernel), OffsetOutOfRange);

    const auto* prio = find_target(catalog, "currentTCB.uxPriority");
    const auto p = resolve_injection_point(*prio, 1, 0, b.kernel);
    CHECK(p.offset == b.kernel.current_tcb() + prio->base + 1);
    step_tick(b.kernel, 0);
    const auto q = resolve_injection_point(*prio, 1, 0, b.kernel);
    CHECK(q.offset == b.kernel.current_tcb() + prio->base + 1);
    CHECK(p.offset != q.offset);
}
