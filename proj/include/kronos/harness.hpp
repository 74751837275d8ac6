#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kronos/injector.hpp"
#include "kronos/rtos.hpp"
#include "kronos/targets.hpp"
#include "kronos/workloads.hpp"

namespace kronos {

enum class Outcome { BENIGN, DELAY, SDC, SDC_DELAY, HANG, CRASH, INVALID };
inline constexpr std::array<Outcome, 7> kAllOutcomes = {Outcome::BENIGN, Outcome::DELAY, Outcome::SDC,
                                                        Outcome::SDC_DELAY, Outcome::HANG, Outcome::CRASH,
                                                        Outcome::INVALID};
const char* to_string(Outcome o);
std::optional<Outcome> parse_outcome(std::string_view text);

struct Thresholds {
    double delay_fraction = 0.05;
    double hang_multiplier = 3.0;
    // Classify traversal-budget panics as HANG instead of CRASH.
    bool overrun_is_hang = false;

    void validate() const;  // throws std::invalid_argument
    std::uint32_t hang_limit(std::uint32_t golden_ticks) const;
    bool late(std::uint32_t run_ticks, std::uint32_t golden_ticks) const;
};

struct SystemConfig {
    KernelConfig kernel;
    WorkloadSizes sizes;
};

struct GoldenProfile {
    std::uint32_t total_ticks = 0;
    OutputSet per_task;
    std::uint64_t event_digest = 0;
    std::vector<KernelEvent> events;  // not serialized

    friend bool operator==(const GoldenProfile& a, const GoldenProfile& b) {
        return a.total_ticks == b.total_ticks && a.per_task == b.per_task && a.event_digest == b.event_digest;
    }
};

std::string format_golden_profile(const GoldenProfile& g);
GoldenProfile parse_golden_profile(std::string_view text);  // throws std::runtime_error

class GoldenFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PanicInfo {
    PanicReason reason = PanicReason::assertion;
    std::uint32_t tick = 0;
    std::string detail;
};

struct RunResult {
    Outcome outcome = Outcome::BENIGN;
    std::uint32_t run_ticks = 0;
    std::uint32_t golden_ticks = 0;
    OutputSet outputs;
    bool outputs_match = true;
    bool timed_out = false;
    std::optional<PanicInfo> panic;
    std::optional<FaultSpec> fault;
    std::optional<InjectionRecord> injection;
    ValidityVerdict validity;
    std::vector<KernelEvent> events;
};

// Precedence: INVALID > CRASH > HANG > correctness/timing matrix.
Outcome classify(std::uint32_t run_ticks, bool outputs_match, bool panicked, bool timed_out, bool valid,
                 std::uint32_t golden_ticks, const Thresholds& thresholds);

GoldenProfile golden_run(const SystemConfig& config, std::shared_ptr<const WorkloadInputs> inputs);

/// Everything one run needs. Immutable once built, shared by all workers.
class Harness {
public:
    Harness(SystemConfig config, Thresholds thresholds);
    Harness(SystemConfig config, Thresholds thresholds, std::shared_ptr<const WorkloadInputs> inputs,
            GoldenProfile golden);

    const SystemConfig& config() const { return config_; }
    const Thresholds& thresholds() const { return thresholds_; }
    const GoldenProfile& golden() const { return golden_; }
    const std::vector<InjectionTarget>& catalog() const { return catalog_; }
    const std::shared_ptr<const WorkloadInputs>& inputs() const { return inputs_; }

    // No fault when `fault` is empty. Kernel panics become outcomes; other
    // exceptions propagate.
    RunResult execute_run(const std::optional<FaultSpec>& fault,
                          EventRecording recording = EventRecording::none) const;

private:
    SystemConfig config_;
    Thresholds thresholds_;
    std::shared_ptr<const WorkloadInputs> inputs_;
    GoldenProfile golden_;
    std::vector<InjectionTarget> catalog_;
};

// -- run logs -----------------------------------------------------------------------

// Header (fault, seed), one line per event, trailer (outcome, ticks, panic).
void emit_run_log(const RunResult& run, std::uint64_t seed, std::ostream& out);

struct ParsedRunLog {
    std::optional<FaultSpec> fault;
    std::uint64_t seed = 0;
    std::vector<KernelEvent> events;
    Outcome outcome = Outcome::BENIGN;
    std::uint32_t run_ticks = 0;
    std::uint32_t golden_ticks = 0;
    bool valid = true;
    bool panicked = false;
    bool timed_out = false;
    bool outputs_match = true;
    std::optional<PanicReason> panic_reason;
};

ParsedRunLog parse_run_log(std::istream& in);  // throws std::runtime_error
Outcome replay_classification(const ParsedRunLog& log, const Thresholds& thresholds);

}  // namespace kronos
