#include "kronos/harness.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace kronos {

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::BENIGN: return "BENIGN";
        case Outcome::DELAY: return "DELAY";
        case Outcome::SDC: return "SDC";
        case Outcome::SDC_DELAY: return "SDC_DELAY";
        case Outcome::HANG: return "HANG";
        case Outcome::CRASH: return "CRASH";
        case Outcome::INVALID: return "INVALID";
    }
    return "?";
}

std::optional<Outcome> parse_outcome(std::string_view text) {
    for (auto o : kAllOutcomes) {
        if (text == to_string(o)) return o;
    }
    return std::nullopt;
}

void Thresholds::validate() const {
    if (!(delay_fraction > 0.0) || !(hang_multiplier > delay_fraction)) {
        throw std::invalid_argument("thresholds need 0 < delay_fraction < hang_multiplier");
    }
    if (hang_multiplier <= 1.0 + delay_fraction) {
        throw std::invalid_argument("hang_multiplier must exceed 1 + delay_fraction");
    }
}

std::uint32_t Thresholds::hang_limit(std::uint32_t golden_ticks) const {
    return static_cast<std::uint32_t>(std::floor(hang_multiplier * golden_ticks));
}

bool Thresholds::late(std::uint32_t run_ticks, std::uint32_t golden_ticks) const {
    return static_cast<double>(run_ticks) > (1.0 + delay_fraction) * golden_ticks;
}

Outcome classify(std::uint32_t run_ticks, bool outputs_match, bool panicked, bool timed_out, bool valid,
                 std::uint32_t golden_ticks, const Thresholds& thresholds) {
    if (!valid) return Outcome::INVALID;
    if (panicked) return Outcome::CRASH;
    if (timed_out) return Outcome::HANG;
    const bool late = thresholds.late(run_ticks, golden_ticks);
    if (outputs_match) return late ? Outcome::DELAY : Outcome::BENIGN;
    return late ? Outcome::SDC_DELAY : Outcome::SDC;
}

// -- simulation loop --------------------------------------------------------------

namespace {

struct Trace {
    std::uint32_t run_ticks = 0;
    bool shutdown = false;
    bool timed_out = false;
    bool overrun = false;
    std::optional<PanicInfo> panic;
    OutputSet outputs;
    std::optional<InjectionRecord> injection;
    std::vector<KernelEvent> events;
    std::uint64_t event_digest = 0;
};

Trace simulate(const SystemConfig& config, const std::shared_ptr<const WorkloadInputs>& inputs,
               std::optional<ArmedFault> fault, std::uint32_t tick_limit, EventRecording recording) {
    Trace trace;
    Kernel kernel(config.kernel);
    kernel.set_event_recording(recording);
    OutputSink sink;
    install_workloads(kernel, inputs, sink);

    std::uint32_t tick = 0;
    try {
        kernel.start_scheduler();
        for (;; ++tick) {
            if (tick >= tick_limit) {
                trace.timed_out = true;
                break;
            }
            kernel.set_clock(tick);
            for (std::uint32_t event = 0; event < kEventsPerTick; ++event) {
                if (fault && fault->due({tick, event})) trace.injection = fault->fire(kernel, {tick, event});
                switch (event) {
                    case 0:
                        if (tick > 0) kernel.tick_advance();
                        break;
                    case 1: kernel.run_slice(); break;
                    default: kernel.schedule_next(); break;
                }
                if (kernel.shutdown_requested()) break;
            }
            if (kernel.shutdown_requested()) {
                trace.shutdown = true;
                ++tick;
                break;
            }
        }
    } catch (const KernelPanic& p) {
        trace.panic = PanicInfo{p.reason(), tick, p.detail()};
        ++tick;
    } catch (const ImageError& e) {
        trace.panic = PanicInfo{PanicReason::unmapped_access, tick, e.what()};
        ++tick;
    } catch (const WorkloadOverrun&) {
        // A task kept being scheduled long after it should have finished.
        trace.overrun = true;
        ++tick;
    }
    trace.run_ticks = tick;
    trace.outputs = std::move(sink.outputs);
    trace.events = kernel.events();
    trace.event_digest = kernel.event_digest();
    return trace;
}

constexpr std::uint32_t kGoldenTickCap = 1u << 20;

}  // namespace

GoldenProfile golden_run(const SystemConfig& config, std::shared_ptr<const WorkloadInputs> inputs) {
    auto trace = simulate(config, inputs, std::nullopt, kGoldenTickCap, EventRecording::full);
    if (trace.panic) {
        throw GoldenFailure("golden run panicked (" + std::string(to_string(trace.panic->reason)) +
                            "): " + trace.panic->detail);
    }
    if (!trace.shutdown) throw GoldenFailure("golden run did not shut down");
    for (auto id : kAllWorkloads) {
        if (!trace.outputs.contains(id)) {
            throw GoldenFailure(std::string("golden run produced no output for ") + to_string(id));
        }
    }
    GoldenProfile g;
    g.total_ticks = trace.run_ticks;
    g.per_task = std::move(trace.outputs);
    g.event_digest = trace.event_digest;
    g.events = std::move(trace.events);
    return g;
}

namespace {
std::vector<InjectionTarget> catalog_for(const SystemConfig& config) {
    const Kernel kernel(config.kernel);
    return gather_targets(kernel);
}
}  // namespace

Harness::Harness(SystemConfig config, Thresholds thresholds)
    : config_(std::move(config)), thresholds_(thresholds), inputs_(WorkloadInputs::build(config_.sizes)) {
    thresholds_.validate();
    golden_ = golden_run(config_, inputs_);
    catalog_ = catalog_for(config_);
}

Harness::Harness(SystemConfig config, Thresholds thresholds, std::shared_ptr<const WorkloadInputs> inputs,
                 GoldenProfile golden)
    : config_(std::move(config)), thresholds_(thresholds), inputs_(std::move(inputs)), golden_(std::move(golden)) {
    thresholds_.validate();
    catalog_ = catalog_for(config_);
}

RunResult Harness::execute_run(const std::optional<FaultSpec>& fault, EventRecording recording) const {
    std::optional<ArmedFault> armed;
    if (fault) armed = arm(*fault, catalog_);
    auto trace = simulate(config_, inputs_, std::move(armed), thresholds_.hang_limit(golden_.total_ticks), recording);

    RunResult r;
    r.run_ticks = trace.run_ticks;
    r.golden_ticks = golden_.total_ticks;
    r.fault = fault;
    r.injection = trace.injection;
    r.events = std::move(trace.events);
    r.panic = trace.panic;
    r.timed_out = trace.timed_out || trace.overrun;
    if (r.panic && r.panic->reason == PanicReason::traversal_overrun && thresholds_.overrun_is_hang) {
        r.timed_out = true;
    }
    const bool panicked = r.panic.has_value() && !r.timed_out;

    if (fault && !trace.injection) {
        r.validity = {false, "fault instant never reached"};
    } else if (trace.injection) {
        r.validity = trace.injection->validity;
    }

    const auto verdict = verify_outputs(trace.outputs, golden_.per_task);
    r.outputs = std::move(trace.outputs);
    r.outputs_match = verdict.status == VerifyStatus::match;
    // Shut down with a workload that never delivered: the task was lost.
    if (trace.shutdown && verdict.status == VerifyStatus::missing_output) r.timed_out = true;

    r.outcome = classify(r.run_ticks, r.outputs_match, panicked, r.timed_out, r.validity.valid, r.golden_ticks,
                         thresholds_);
    return r;
}

// -- golden profile file -------------------------------------------------------------

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << v;
    return s.str();
}

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
    T v{};
    int base = 10;
    if (text.starts_with("0x")) {
        text.remove_prefix(2);
        base = 16;
    }
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v, base);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
        throw std::runtime_error("bad number for " + what + ": '" + std::string(text) + "'");
    }
    return v;
}

// Splits "k1=v1 k2=v2 ..." where the last key may take the rest of the line.
std::vector<std::pair<std::string, std::string>> fields(std::string_view line, std::string_view tail_key = {}) {
    std::vector<std::pair<std::string, std::string>> out;
    while (!line.empty()) {
        while (line.starts_with(' ')) line.remove_prefix(1);
        if (line.empty()) break;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw std::runtime_error("malformed field '" + std::string(line) + "'");
        const auto key = line.substr(0, eq);
        line.remove_prefix(eq + 1);
        std::size_t end = key == tail_key ? line.size() : line.find(' ');
        if (end == std::string_view::npos) end = line.size();
        out.emplace_back(std::string(key), std::string(line.substr(0, end)));
        line.remove_prefix(end);
    }
    return out;
}

}  // namespace

std::string format_golden_profile(const GoldenProfile& g) {
    std::ostringstream out;
    out << "total_ticks=" << g.total_ticks << "\n";
    out << "event_digest=" << hex64(g.event_digest) << "\n";
    for (const auto& [id, o] : g.per_task) {
        out << "task=" << to_string(id) << " digest=" << hex64(o.digest) << " completion_tick=" << o.completion_tick
            << "\n";
    }
    return out.str();
}

GoldenProfile parse_golden_profile(std::string_view text) {
    GoldenProfile g;
    bool have_ticks = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.starts_with('#')) continue;
        const auto f = fields(line);
        if (f.front().first == "total_ticks") {
            g.total_ticks = parse_number<std::uint32_t>(f.front().second, "total_ticks");
            have_ticks = true;
        } else if (f.front().first == "event_digest") {
            g.event_digest = parse_number<std::uint64_t>(f.front().second, "event_digest");
        } else if (f.front().first == "task" && f.size() == 3) {
            const auto id = parse_workload_id(f[0].second);
            if (!id) throw std::runtime_error("unknown workload '" + f[0].second + "'");
            g.per_task[*id] = {*id, parse_number<std::uint64_t>(f[1].second, "digest"),
                               parse_number<std::uint32_t>(f[2].second, "completion_tick")};
        } else {
            throw std::runtime_error("unrecognized golden profile line '" + line + "'");
        }
    }
    if (!have_ticks) throw std::runtime_error("golden profile lacks total_ticks");
    return g;
}

// -- run logs --------------------------------------------------------------------

void emit_run_log(const RunResult& run, std::uint64_t seed, std::ostream& out) {
    if (run.fault) {
        const auto& f = *run.fault;
        out << "fault target=" << f.target << " byte=" << f.byte_off << " bit=" << f.bit_off
            << " type=" << to_string(f.type)
            << " stuck=" << (f.stuck_value ? std::to_string(*f.stuck_value) : std::string("flip"))
            << " at=" << format_sim_time(f.t_inject) << " seed=" << seed << "\n";
    } else {
        out << "fault none seed=" << seed << "\n";
    }
    if (run.injection) {
        const auto& i = *run.injection;
        out << "injection at=" << format_sim_time(i.applied_at) << " offset=" << i.point.offset
            << " bit=" << i.point.bit << " pre=" << i.pre_bit << " post=" << i.post_bit
            << " valid=" << (i.validity.valid ? 1 : 0) << " reason=" << i.validity.reason << "\n";
    }
    for (const auto& e : run.events) out << e.format() << "\n";
    out << "result outcome=" << to_string(run.outcome) << " run_ticks=" << run.run_ticks
        << " golden_ticks=" << run.golden_ticks << " valid=" << (run.validity.valid ? 1 : 0)
        << " panicked=" << (run.panic && !run.timed_out ? 1 : 0) << " timed_out=" << (run.timed_out ? 1 : 0)
        << " outputs_match=" << (run.outputs_match ? 1 : 0)
        << " panic=" << (run.panic ? to_string(run.panic->reason) : "none") << "\n";
}

ParsedRunLog parse_run_log(std::istream& in) {
    ParsedRunLog log;
    bool have_result = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.starts_with("fault none ")) {
            for (const auto& [k, v] : fields(std::string_view(line).substr(11))) {
                if (k == "seed") log.seed = parse_number<std::uint64_t>(v, k);
            }
        } else if (line.starts_with("fault ")) {
            const auto f = fields(std::string_view(line).substr(6));
            FaultSpec spec;
            for (const auto& [k, v] : f) {
                if (k == "target") spec.target = v;
                else if (k == "byte") spec.byte_off = parse_number<std::uint32_t>(v, k);
                else if (k == "bit") spec.bit_off = parse_number<unsigned>(v, k);
                else if (k == "type") {
                    const auto t = parse_fault_type(v);
                    if (!t) throw std::runtime_error("bad fault type '" + v + "'");
                    spec.type = *t;
                } else if (k == "stuck") {
                    if (v != "flip") spec.stuck_value = parse_number<unsigned>(v, k);
                } else if (k == "at") {
                    const auto t = parse_sim_time(v);
                    if (!t) throw std::runtime_error("bad instant '" + v + "'");
                    spec.t_inject = *t;
                } else if (k == "seed") {
                    log.seed = parse_number<std::uint64_t>(v, k);
                }
            }
            log.fault = spec;
        } else if (line.starts_with("injection ")) {
            continue;
        } else if (line.starts_with("tick=")) {
            auto e = KernelEvent::parse(line);
            if (!e) throw std::runtime_error("malformed event line '" + line + "'");
            log.events.push_back(std::move(*e));
        } else if (line.starts_with("result ")) {
            for (const auto& [k, v] : fields(std::string_view(line).substr(7))) {
                if (k == "outcome") {
                    const auto o = parse_outcome(v);
                    if (!o) throw std::runtime_error("bad outcome '" + v + "'");
                    log.outcome = *o;
                } else if (k == "run_ticks") log.run_ticks = parse_number<std::uint32_t>(v, k);
                else if (k == "golden_ticks") log.golden_ticks = parse_number<std::uint32_t>(v, k);
                else if (k == "valid") log.valid = v == "1";
                else if (k == "panicked") log.panicked = v == "1";
                else if (k == "timed_out") log.timed_out = v == "1";
                else if (k == "outputs_match") log.outputs_match = v == "1";
                else if (k == "panic" && v != "none") log.panic_reason = parse_panic_reason(v);
            }
            have_result = true;
        } else {
            throw std::runtime_error("unrecognized run log line '" + line + "'");
        }
    }
    if (!have_result) throw std::runtime_error("run log has no result trailer");
    return log;
}

Outcome replay_classification(const ParsedRunLog& log, const Thresholds& thresholds) {
    return classify(log.run_ticks, log.outputs_match, log.panicked, log.timed_out, log.valid, log.golden_ticks,
                    thresholds);
}

}  // namespace kronos
