#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kronos/rtos.hpp"

namespace kronos {

enum class TargetCategory { variable, pointer, list, tcb_field };
const char* to_string(TargetCategory c);
std::optional<TargetCategory> parse_target_category(std::string_view text);

enum class ValidityRule { always, nonempty_list, notification_used, mutex_used, tag_set };
const char* to_string(ValidityRule r);

/// One injectable kernel object. TCB fields are relative to whichever task
/// is current at the injection instant.
struct InjectionTarget {
    std::string name;
    TargetCategory category = TargetCategory::variable;
    std::uint32_t base = 0;  // image offset, or field offset for tcb_field
    std::uint32_t size = 0;
    std::string hierarchy;
    ValidityRule validity = ValidityRule::always;

    bool relative_to_current_tcb() const { return category == TargetCategory::tcb_field; }
    // Fault-space size: every bit position under both fault types.
    std::uint64_t fault_space() const { return std::uint64_t{size} * 8 * 2; }
};

struct ValidityVerdict {
    bool valid = true;
    std::string reason;
};

struct InjectionPoint {
    std::uint32_t offset = 0;
    unsigned bit = 0;
    friend bool operator==(const InjectionPoint&, const InjectionPoint&) = default;
};

class OffsetOutOfRange : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// 12 variables, 6 pointers, 7 ready lists plus 7 named lists, 15 TCB fields.
std::vector<InjectionTarget> gather_targets(const Kernel& kernel);

const InjectionTarget* find_target(const std::vector<InjectionTarget>& catalog, std::string_view name);

ValidityVerdict check_validity(const InjectionTarget& target, const Kernel& kernel);

// Absolute image position; TCB fields resolve against the current TCB.
InjectionPoint resolve_injection_point(const InjectionTarget& target, std::uint32_t byte_off, unsigned bit_off,
                                       const Kernel& kernel);

// `name,category,size_bytes,valid_predicate`
std::string format_target_line(const InjectionTarget& target);

}  // namespace kronos
