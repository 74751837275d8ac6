#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kronos/rtos.hpp"
#include "kronos/targets.hpp"

namespace kronos {

// Events per simulated tick: tick advance, task slice, context switch.
inline constexpr std::uint32_t kEventsPerTick = 3;

/// Simulated instant. A fault at (tick, event) fires just before that event.
struct SimTime {
    std::uint32_t tick = 0;
    std::uint32_t event = 0;

    std::uint64_t index() const { return std::uint64_t{tick} * kEventsPerTick + event; }
    static SimTime from_index(std::uint64_t i) {
        return {static_cast<std::uint32_t>(i / kEventsPerTick), static_cast<std::uint32_t>(i % kEventsPerTick)};
    }
    friend auto operator<=>(const SimTime&, const SimTime&) = default;
};

std::string format_sim_time(SimTime t);  // "<tick>:<event>"
std::optional<SimTime> parse_sim_time(std::string_view text);

enum class FaultType { transient, permanent };
const char* to_string(FaultType t);
std::optional<FaultType> parse_fault_type(std::string_view text);

struct FaultSpec {
    std::string target;
    std::uint32_t byte_off = 0;
    unsigned bit_off = 0;
    FaultType type = FaultType::transient;
    // Permanent only. Unset means "stuck at the opposite of the bit's value
    // when the fault fires", so the fault always changes state.
    std::optional<unsigned> stuck_value;
    SimTime t_inject;
    friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

struct InjectionRecord {
    FaultSpec spec;
    SimTime applied_at;
    InjectionPoint point;
    unsigned pre_bit = 0;
    unsigned post_bit = 0;
    ValidityVerdict validity;
};

/// Half-open range of event indices [begin, end).
struct InjectionWindow {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    std::uint64_t size() const { return end > begin ? end - begin : 0; }
};

// First `fraction` of a timeline of `golden_ticks` ticks, at least one event.
InjectionWindow leading_window(std::uint32_t golden_ticks, double fraction);

class EmptyWindow : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Uniform draw in [0, n) by rejection; identical across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

// n_per_location specs per target, offsets and instants drawn uniformly.
std::vector<FaultSpec> sample_fault_space(const std::vector<InjectionTarget>& catalog, std::uint32_t n_per_location,
                                          InjectionWindow window, FaultType type, std::uint64_t seed);

/// A fault waiting for its instant. Belongs to exactly one run.
class ArmedFault {
public:
    ArmedFault(FaultSpec spec, InjectionTarget target);

    const FaultSpec& spec() const { return spec_; }
    const InjectionTarget& target() const { return target_; }
    bool due(SimTime now) const { return !fired_ && now >= spec_.t_inject; }
    bool fired() const { return fired_; }

    // Evaluates validity, then applies the flip or the stuck-at mask.
    InjectionRecord fire(Kernel& kernel, SimTime now);

private:
    FaultSpec spec_;
    InjectionTarget target_;
    bool fired_ = false;
};

ArmedFault arm(const FaultSpec& spec, const std::vector<InjectionTarget>& catalog);

class UnknownTarget : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace kronos
