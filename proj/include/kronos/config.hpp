#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "kronos/campaign.hpp"
#include "kronos/harness.hpp"

namespace kronos {

/// Everything a config file can set. Defaults match configs/default.ini.
struct AppConfig {
    SystemConfig system;
    Thresholds thresholds;
    CampaignConfig campaign;
    std::string output_dir = "kronos-out";
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// INI-style: [section] headers, key = value lines, '#' or ';' comments.
// Unknown sections and keys are rejected.
AppConfig parse_config(std::string_view text);
AppConfig load_config(const std::filesystem::path& path);

}  // namespace kronos
