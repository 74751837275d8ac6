#include "kronos/injector.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace kronos {

std::string format_sim_time(SimTime t) { return std::to_string(t.tick) + ":" + std::to_string(t.event); }

std::optional<SimTime> parse_sim_time(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    SimTime t;
    const auto* tick_end = text.data() + colon;
    auto r1 = std::from_chars(text.data(), tick_end, t.tick);
    auto r2 = std::from_chars(tick_end + 1, text.data() + text.size(), t.event);
    if (r1.ec != std::errc{} || r1.ptr != tick_end || r2.ec != std::errc{} || r2.ptr != text.data() + text.size() ||
        colon == 0 || t.event >= kEventsPerTick) {
        return std::nullopt;
    }
    return t;
}

const char* to_string(FaultType t) { return t == FaultType::transient ? "transient" : "permanent"; }

std::optional<FaultType> parse_fault_type(std::string_view text) {
    if (text == "transient") return FaultType::transient;
    if (text == "permanent") return FaultType::permanent;
    return std::nullopt;
}

InjectionWindow leading_window(std::uint32_t golden_ticks, double fraction) {
    const double events = static_cast<double>(golden_ticks) * kEventsPerTick * fraction;
    return {0, std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(events)))};
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

std::vector<FaultSpec> sample_fault_space(const std::vector<InjectionTarget>& catalog, std::uint32_t n_per_location,
                                          InjectionWindow window, FaultType type, std::uint64_t seed) {
    if (window.size() == 0) throw EmptyWindow("injection window is empty");
    if (n_per_location == 0) throw std::invalid_argument("n_per_location must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<FaultSpec> out;
    out.reserve(catalog.size() * n_per_location);
    for (const auto& target : catalog) {
        for (std::uint32_t i = 0; i < n_per_location; ++i) {
            FaultSpec s;
            s.target = target.name;
            s.byte_off = static_cast<std::uint32_t>(uniform_below(rng, target.size));
            s.bit_off = static_cast<unsigned>(uniform_below(rng, 8));
            s.type = type;
            s.t_inject = SimTime::from_index(window.begin + uniform_below(rng, window.size()));
            out.push_back(std::move(s));
        }
    }
    return out;
}

ArmedFault::ArmedFault(FaultSpec spec, InjectionTarget target) : spec_(std::move(spec)), target_(std::move(target)) {
    if (spec_.byte_off >= target_.size || spec_.bit_off > 7) {
        throw OffsetOutOfRange("offset " + std::to_string(spec_.byte_off) + "." + std::to_string(spec_.bit_off) +
                               " outside " + target_.name + " (size " + std::to_string(target_.size) + ")");
    }
    if (spec_.stuck_value && *spec_.stuck_value > 1) {
        throw std::invalid_argument("stuck value must be 0 or 1, got " + std::to_string(*spec_.stuck_value));
    }
}

InjectionRecord ArmedFault::fire(Kernel& kernel, SimTime now) {
    InjectionRecord rec;
    rec.spec = spec_;
    rec.applied_at = now;
    rec.validity = check_validity(target_, kernel);
    rec.point = resolve_injection_point(target_, spec_.byte_off, spec_.bit_off, kernel);
    auto& image = kernel.image();
    rec.pre_bit = image.read_bit(rec.point.offset, rec.point.bit) ? 1 : 0;
    if (spec_.type == FaultType::transient) {
        image.flip_bit(rec.point.offset, rec.point.bit);
    } else {
        const unsigned stuck = spec_.stuck_value.value_or(1 - rec.pre_bit);
        image.install_stuck_mask(rec.point.offset, rec.point.bit, stuck);
    }
    rec.post_bit = image.read_bit(rec.point.offset, rec.point.bit) ? 1 : 0;
    fired_ = true;
    return rec;
}

ArmedFault arm(const FaultSpec& spec, const std::vector<InjectionTarget>& catalog) {
    const auto* target = find_target(catalog, spec.target);
    if (!target) throw UnknownTarget("unknown target '" + spec.target + "'");
    return ArmedFault(spec, *target);
}

}  // namespace kronos
