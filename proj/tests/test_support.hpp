#pragma once

#include <vector>

#include "kronos/rtos.hpp"

namespace kronos::testing {

// Plays back a fixed list of slice results, then finishes.
class ScriptBody : public TaskBody {
public:
    explicit ScriptBody(std::vector<SliceResult> script = {}) : script_(std::move(script)) {}
    SliceResult run_slice(Kernel&) override {
        ++calls;
        if (next_ < script_.size()) return script_[next_++];
        return {SliceAction::done, 0};
    }
    int calls = 0;

private:
    std::vector<SliceResult> script_;
    std::size_t next_ = 0;
};

// Yields forever.
class SpinBody : public TaskBody {
public:
    SliceResult run_slice(Kernel&) override { return {}; }
};

// One simulated tick: advance, run the current task, switch.
inline void step_tick(Kernel& k, std::uint32_t tick) {
    k.set_clock(tick);
    if (tick > 0) k.tick_advance();
    k.run_slice();
    if (!k.shutdown_requested()) k.schedule_next();
}

// Returns the number of ticks until graceful shutdown, or 0 if `limit` hit.
inline std::uint32_t run_to_shutdown(Kernel& k, std::uint32_t limit = 10000) {
    k.start_scheduler();
    for (std::uint32_t t = 0; t < limit; ++t) {
        step_tick(k, t);
        if (k.shutdown_requested()) return t + 1;
    }
    return 0;
}

}  // namespace kronos::testing
