#include "kronos/targets.hpp"

#include <array>

namespace kronos {

const char* to_string(TargetCategory c) {
    switch (c) {
        case TargetCategory::variable: return "variable";
        case TargetCategory::pointer: return "pointer";
        case TargetCategory::list: return "list";
        case TargetCategory::tcb_field: return "tcb_field";
    }
    return "?";
}

std::optional<TargetCategory> parse_target_category(std::string_view text) {
    for (auto c : {TargetCategory::variable, TargetCategory::pointer, TargetCategory::list, TargetCategory::tcb_field}) {
        if (text == to_string(c)) return c;
    }
    return std::nullopt;
}

const char* to_string(ValidityRule r) {
    switch (r) {
        case ValidityRule::always: return "always";
        case ValidityRule::nonempty_list: return "nonempty_list";
        case ValidityRule::notification_used: return "notification_used";
        case ValidityRule::mutex_used: return "mutex_used";
        case ValidityRule::tag_set: return "tag_set";
    }
    return "?";
}

namespace {

struct TcbField {
    const char* name;
    std::uint32_t offset;
    std::uint32_t size;
    ValidityRule rule;
};

constexpr std::array<TcbField, 15> kTcbFields = {{
    {"pcTaskName", layout::kTaskName, layout::kTaskNameLen, ValidityRule::always},
    {"pxStack", layout::kStack, 4, ValidityRule::always},
    {"pxTaskTag", layout::kTaskTag, 4, ValidityRule::tag_set},
    {"pxTopOfStack", layout::kTopOfStack, 4, ValidityRule::always},
    {"ucDelayAborted", layout::kDelayAborted, 1, ValidityRule::always},
    {"ucNotifyState", layout::kNotifyState, 1, ValidityRule::notification_used},
    {"ulNotifiedValue", layout::kNotifiedValue, 4, ValidityRule::notification_used},
    {"ulRunTimeCounter", layout::kRunTimeCounter, 4, ValidityRule::always},
    {"uxBasePriority", layout::kBasePriority, 4, ValidityRule::mutex_used},
    {"uxMutexesHeld", layout::kMutexesHeld, 4, ValidityRule::mutex_used},
    {"uxPriority", layout::kPriority, 4, ValidityRule::always},
    {"uxTaskNumber", layout::kTaskNumber, 4, ValidityRule::always},
    {"uxTCBNumber", layout::kTcbNumber, 4, ValidityRule::always},
    {"xEventListItem", layout::kEventItem, layout::kListItemSize, ValidityRule::always},
    {"xStateListItem", layout::kStateItem, layout::kListItemSize, ValidityRule::always},
}};

}  // namespace

std::vector<InjectionTarget> gather_targets(const Kernel& kernel) {
    std::vector<InjectionTarget> out;
    for (std::size_t i = 0; i < kVarCount; ++i) {
        const auto v = static_cast<Var>(i);
        const bool pointer = i >= kScalarVarCount;
        out.push_back({var_name(v), pointer ? TargetCategory::pointer : TargetCategory::variable,
                       kernel.var_address(v), 4, pointer ? "kernel/pointers" : "kernel/variables",
                       ValidityRule::always});
    }
    for (std::uint32_t p = 0; p < kernel.config().priorities; ++p) {
        out.push_back({"pxReadyTasksLists[" + std::to_string(p) + "]", TargetCategory::list,
                       kernel.ready_list_address(p), layout::kListSize, "kernel/lists/pxReadyTasksLists",
                       ValidityRule::nonempty_list});
    }
    for (std::size_t i = 0; i < kKListCount; ++i) {
        const auto l = static_cast<KList>(i);
        out.push_back({list_name(l), TargetCategory::list, kernel.list_address(l), layout::kListSize,
                       "kernel/lists", ValidityRule::nonempty_list});
    }
    for (const auto& f : kTcbFields) {
        out.push_back({std::string("currentTCB.") + f.name, TargetCategory::tcb_field, f.offset, f.size,
                       "kernel/pxCurrentTCB", f.rule});
    }
    return out;
}

const InjectionTarget* find_target(const std::vector<InjectionTarget>& catalog, std::string_view name) {
    for (const auto& t : catalog) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

ValidityVerdict check_validity(const InjectionTarget& target, const Kernel& kernel) {
    switch (target.validity) {
        case ValidityRule::always: return {true, "always live"};
        case ValidityRule::nonempty_list: {
            const auto count = kernel.image().read_field(target.base + layout::kListCount, 4);
            if (count == 0) return {false, "list empty"};
            return {true, std::to_string(count) + " items"};
        }
        case ValidityRule::notification_used:
        case ValidityRule::mutex_used:
        case ValidityRule::tag_set: {
            const auto f = kernel.features(kernel.current_tcb());
            const bool used = target.validity == ValidityRule::notification_used ? f.notification_used
                              : target.validity == ValidityRule::mutex_used      ? f.mutex_used
                                                                                  : f.tag_set;
            const std::string who = kernel.task_name(kernel.current_tcb());
            if (!used) return {false, who + " has not used the feature"};
            return {true, who + " used the feature"};
        }
    }
    return {false, "unknown rule"};
}

InjectionPoint resolve_injection_point(const InjectionTarget& target, std::uint32_t byte_off, unsigned bit_off,
                                       const Kernel& kernel) {
    if (byte_off >= target.size) {
        throw OffsetOutOfRange("byte offset " + std::to_string(byte_off) + " outside " + target.name + " (size " +
                               std::to_string(target.size) + ")");
    }
    if (bit_off > 7) throw OffsetOutOfRange("bit offset " + std::to_string(bit_off) + " > 7");
    std::uint32_t base = target.base;
    if (target.relative_to_current_tcb()) {
        const Handle tcb = kernel.current_tcb();
        if (!kernel.image().record_at(tcb, ObjectKind::tcb)) {
            throw OffsetOutOfRange("no valid current TCB to resolve " + target.name);
        }
        base += tcb;
    }
    return {base + byte_off, bit_off};
}

std::string format_target_line(const InjectionTarget& target) {
    return target.name + "," + to_string(target.category) + "," + std::to_string(target.size) + "," +
           to_string(target.validity);
}

}  // namespace kronos
