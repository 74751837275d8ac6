#include "kronos/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace kronos {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T integer(const std::string& key, const std::string& value) {
    T v{};
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) {
        throw ConfigError(key, "config key '" + key + "': expected an unsigned integer, got '" + value + "'");
    }
    return v;
}

double real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw ConfigError(key, "config key '" + key + "': expected a number, got '" + value + "'");
    }
    return v;
}

bool boolean(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key, "config key '" + key + "': expected true or false, got '" + value + "'");
}

using Setter = std::function<void(AppConfig&, const std::string& key, const std::string& value)>;

#define U32(field) [](AppConfig& c, const std::string& k, const std::string& v) { field = integer<std::uint32_t>(k, v); }
#define REAL(field) [](AppConfig& c, const std::string& k, const std::string& v) { field = real(k, v); }

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"kernel.tick_rate_hz", U32(c.system.kernel.tick_rate_hz)},
        {"kernel.priorities", U32(c.system.kernel.priorities)},
        {"kernel.image_capacity", U32(c.system.kernel.image_capacity)},
        {"kernel.idle_stack_words", U32(c.system.kernel.idle_stack_words)},
        {"kernel.timer_stack_words", U32(c.system.kernel.timer_stack_words)},
        {"kernel.traversal_budget_factor", U32(c.system.kernel.traversal_budget_factor)},

        {"workloads.sha_bytes", U32(c.system.sizes.sha_bytes)},
        {"workloads.sha_stride_blocks", U32(c.system.sizes.sha_stride_blocks)},
        {"workloads.fft_frames", U32(c.system.sizes.fft_frames)},
        {"workloads.fft_stride_frames", U32(c.system.sizes.fft_stride_frames)},
        {"workloads.cubic_equations", U32(c.system.sizes.cubic_equations)},
        {"workloads.cubic_stride", U32(c.system.sizes.cubic_stride)},
        {"workloads.cubic_delay_every", U32(c.system.sizes.cubic_delay_every)},
        {"workloads.cubic_delay_ticks", U32(c.system.sizes.cubic_delay_ticks)},
        {"workloads.huffman_bytes", U32(c.system.sizes.huffman_bytes)},
        {"workloads.huffman_stride", U32(c.system.sizes.huffman_stride)},
        {"workloads.adpcm_samples", U32(c.system.sizes.adpcm_samples)},
        {"workloads.adpcm_stride", U32(c.system.sizes.adpcm_stride)},
        {"workloads.stack_words", U32(c.system.sizes.stack_words)},
        {"workloads.heartbeat_period", U32(c.system.sizes.heartbeat_period)},

        {"campaign.fault_types",
         [](AppConfig& c, const std::string& k, const std::string& v) {
             c.campaign.fault_types.clear();
             for (const auto& item : split_list(v)) {
                 const auto t = parse_fault_type(item);
                 if (!t) throw ConfigError(k, "config key '" + k + "': unknown fault type '" + item + "'");
                 c.campaign.fault_types.push_back(*t);
             }
         }},
        {"campaign.confidence", REAL(c.campaign.confidence)},
        {"campaign.margin", REAL(c.campaign.margin)},
        {"campaign.p", REAL(c.campaign.p)},
        {"campaign.n_per_location",
         [](AppConfig& c, const std::string& k, const std::string& v) {
             if (v == "auto") {
                 c.campaign.n_per_location.reset();
             } else {
                 c.campaign.n_per_location = integer<std::uint32_t>(k, v);
             }
         }},
        {"campaign.window_fraction", REAL(c.campaign.window_fraction)},
        {"campaign.seed",
         [](AppConfig& c, const std::string& k, const std::string& v) { c.campaign.seed = integer<std::uint64_t>(k, v); }},
        {"campaign.workers", U32(c.campaign.workers)},
        {"campaign.targets",
         [](AppConfig& c, const std::string&, const std::string& v) {
             c.campaign.targets = v == "all" ? std::vector<std::string>{} : split_list(v);
         }},
        {"campaign.output_dir", [](AppConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},

        {"thresholds.delay_fraction", REAL(c.thresholds.delay_fraction)},
        {"thresholds.hang_multiplier", REAL(c.thresholds.hang_multiplier)},
        {"thresholds.overrun_as_hang",
         [](AppConfig& c, const std::string& k, const std::string& v) { c.thresholds.overrun_is_hang = boolean(k, v); }},
    };
    return table;
}

#undef U32
#undef REAL

}  // namespace

AppConfig parse_config(std::string_view text) {
    AppConfig config;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(line, "line " + std::to_string(line_no) + ": malformed section");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "kernel" && section != "workloads" && section != "campaign" && section != "thresholds") {
                throw ConfigError(section, "unknown config section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(line, "line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = section + "." + trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        const auto it = setters().find(key);
        if (section.empty() || it == setters().end()) throw ConfigError(key, "unknown config key '" + key + "'");
        it->second(config, key, value);
    }
    try {
        config.thresholds.validate();
        config.campaign.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("", e.what());
    }
    if (config.system.kernel.priorities < 4 || config.system.kernel.priorities > 7) {
        throw ConfigError("kernel.priorities", "kernel.priorities must be in [4, 7]");
    }
    if (config.system.kernel.tick_rate_hz == 0) {
        throw ConfigError("kernel.tick_rate_hz", "kernel.tick_rate_hz must be positive");
    }
    return config;
}

AppConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_text_file(path));
}

}  // namespace kronos
