#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kronos/harness.hpp"
#include "kronos/injector.hpp"

namespace kronos {

class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Two-sided normal cutoff. Tabulated levels use the conventional two-decimal
// values; anything else is computed.
double normal_cutoff(double confidence);

// Binomial-proportion sample size; `population` empty means infinite.
std::uint64_t compute_sample_size(double confidence, double margin, double p,
                                  std::optional<std::uint64_t> population = std::nullopt);

struct CampaignConfig {
    std::vector<FaultType> fault_types = {FaultType::transient, FaultType::permanent};
    double confidence = 0.99;
    double margin = 0.05;
    double p = 0.5;
    std::optional<std::uint32_t> n_per_location;  // overrides the computed size
    double window_fraction = 0.10;
    std::uint64_t seed = 1;
    std::uint32_t workers = 4;
    std::vector<std::string> targets;  // empty: whole catalog

    void validate() const;  // throws InvalidParameter
    std::uint32_t per_location() const;
};

// Null faults (empty target) are a test mode: the run executes unfaulted.
using CampaignPlan = std::vector<FaultSpec>;

// n_per_location specs per target for each fault type, in catalog order.
CampaignPlan plan_campaign(const CampaignConfig& config, const std::vector<InjectionTarget>& catalog,
                           const GoldenProfile& golden);

struct RunRow {
    std::uint64_t run_id = 0;
    std::string target;
    std::string category;
    std::string fault_type;
    std::uint32_t byte = 0;
    unsigned bit = 0;
    SimTime t_inject;
    Outcome outcome = Outcome::BENIGN;
    std::uint32_t run_ticks = 0;
    std::uint32_t golden_ticks = 0;
    std::string panic_reason = "none";
    std::uint64_t seed = 0;
    friend bool operator==(const RunRow&, const RunRow&) = default;
};

struct OutcomeCounts {
    std::array<std::uint64_t, kAllOutcomes.size()> counts{};

    void add(Outcome o) { ++counts[static_cast<std::size_t>(o)]; }
    std::uint64_t operator[](Outcome o) const { return counts[static_cast<std::size_t>(o)]; }
    std::uint64_t total() const;
    double percent(Outcome o) const;
};

struct TargetSummary {
    std::string fault_type;
    std::string target;
    std::string category;
    OutcomeCounts counts;
};

struct CampaignReport {
    std::uint64_t seed = 0;
    std::vector<RunRow> runs;
    // Built from `runs` by aggregate(); first-appearance order.
    std::vector<TargetSummary> per_target;
    std::map<std::pair<std::string, std::string>, OutcomeCounts> per_category;  // (fault type, category)
    std::map<std::string, OutcomeCounts> totals;                                 // fault type
    std::optional<double> duration_s;

    void aggregate();
};

class WorkerFailure : public std::runtime_error {
public:
    WorkerFailure(std::uint64_t spec_index, const std::string& what, CampaignReport partial);
    std::uint64_t spec_index() const noexcept { return index_; }
    const CampaignReport& partial() const noexcept { return partial_; }

private:
    std::uint64_t index_;
    CampaignReport partial_;
};

using ProgressFn = std::function<void(std::uint64_t done, std::uint64_t total)>;

// Rows are ordered by spec index whatever the worker count. A non-panic
// failure in any run raises WorkerFailure after the other runs finish.
CampaignReport run_campaign(const CampaignPlan& plan, const Harness& harness, std::uint32_t workers,
                            std::uint64_t seed, const ProgressFn& progress = {});

// -- outputs ---------------------------------------------------------------------

inline constexpr const char* kRunsCsvHeader =
    "run_id,target,category,fault_type,byte,bit,t_tick,t_event,outcome,run_ticks,golden_ticks,panic_reason,seed";

std::string format_runs_csv(const std::vector<RunRow>& rows);
std::vector<RunRow> parse_runs_csv(std::string_view text);  // throws std::runtime_error
std::string format_summary(const CampaignReport& report);
// "<category>_<faulttype>" -> CSV of per-target percentages.
std::map<std::string, std::string> format_plot_data(const CampaignReport& report);

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Writes runs.csv, report.summary and plotdata/ under `dir`.
void emit_report(const CampaignReport& report, const std::filesystem::path& dir);
// Rebuilds report.summary and plotdata/ from an existing runs.csv.
CampaignReport regenerate_report(const std::filesystem::path& dir);

}  // namespace kronos
