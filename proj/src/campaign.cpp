#include "kronos/campaign.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace kronos {

// -- sample size ---------------------------------------------------------------

double normal_cutoff(double confidence) {
    if (!(confidence >= 0.5 && confidence < 1.0)) {
        throw InvalidParameter("confidence must lie in [0.5, 1), got " + std::to_string(confidence));
    }
    static constexpr std::array<std::pair<double, double>, 4> table = {
        {{0.90, 1.645}, {0.95, 1.96}, {0.99, 2.58}, {0.999, 3.29}}};
    for (const auto& [level, t] : table) {
        if (std::fabs(confidence - level) < 1e-12) return t;
    }
    // Solve erf(t / sqrt 2) = confidence by bisection.
    double lo = 0.0;
    double hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::erf(mid / std::sqrt(2.0)) < confidence ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::uint64_t compute_sample_size(double confidence, double margin, double p,
                                  std::optional<std::uint64_t> population) {
    if (!(margin > 0.0 && margin < 1.0)) throw InvalidParameter("margin must lie in (0, 1)");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("p must lie in [0, 1]");
    if (population && *population == 0) throw InvalidParameter("population must be positive");
    const double t = normal_cutoff(confidence);
    const double variance = p * (1.0 - p);
    double n = 0.0;
    if (variance > 0.0) {
        const double n0 = t * t * variance / (margin * margin);
        n = n0;
        if (population) {
            const auto big_n = static_cast<double>(*population);
            n = big_n / (1.0 + (big_n - 1.0) / n0);
        }
    }
    // Guard against 665.64000000001-style representation error before ceil.
    const auto result = static_cast<std::uint64_t>(std::ceil(n - 1e-9));
    return std::max<std::uint64_t>(1, result);
}

void CampaignConfig::validate() const {
    if (!(margin > 0.0 && margin < 1.0)) throw InvalidParameter("margin must lie in (0, 1)");
    if (!(confidence >= 0.5 && confidence < 1.0)) throw InvalidParameter("confidence must lie in [0.5, 1)");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("p must lie in [0, 1]");
    if (workers < 1) throw InvalidParameter("workers must be >= 1");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0)) throw InvalidParameter("window must lie in (0, 1]");
    if (n_per_location && *n_per_location == 0) throw InvalidParameter("n_per_location must be >= 1");
    if (fault_types.empty()) throw InvalidParameter("no fault types selected");
}

std::uint32_t CampaignConfig::per_location() const {
    if (n_per_location) return *n_per_location;
    return static_cast<std::uint32_t>(compute_sample_size(confidence, margin, p));
}

// -- planning ---------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

CampaignPlan plan_campaign(const CampaignConfig& config, const std::vector<InjectionTarget>& catalog,
                           const GoldenProfile& golden) {
    config.validate();
    std::vector<InjectionTarget> selected;
    if (config.targets.empty()) {
        selected = catalog;
    } else {
        for (const auto& name : config.targets) {
            const auto* t = find_target(catalog, name);
            if (!t) throw UnknownTarget("unknown target '" + name + "'");
            selected.push_back(*t);
        }
    }
    const auto window = leading_window(golden.total_ticks, config.window_fraction);
    CampaignPlan plan;
    for (auto type : config.fault_types) {
        const auto seed = splitmix64(config.seed ^ (static_cast<std::uint64_t>(type) << 32));
        auto specs = sample_fault_space(selected, config.per_location(), window, type, seed);
        plan.insert(plan.end(), std::make_move_iterator(specs.begin()), std::make_move_iterator(specs.end()));
    }
    return plan;
}

// -- aggregation ---------------------------------------------------------------------

std::uint64_t OutcomeCounts::total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

double OutcomeCounts::percent(Outcome o) const {
    const auto n = total();
    return n == 0 ? 0.0 : 100.0 * static_cast<double>((*this)[o]) / static_cast<double>(n);
}

void CampaignReport::aggregate() {
    per_target.clear();
    per_category.clear();
    totals.clear();
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& r : runs) {
        const auto key = std::pair(r.fault_type, r.target);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, per_target.size()).first;
            per_target.push_back({r.fault_type, r.target, r.category, {}});
        }
        per_target[it->second].counts.add(r.outcome);
        per_category[{r.fault_type, r.category}].add(r.outcome);
        totals[r.fault_type].add(r.outcome);
    }
}

WorkerFailure::WorkerFailure(std::uint64_t spec_index, const std::string& what, CampaignReport partial)
    : std::runtime_error("run " + std::to_string(spec_index) + " failed: " + what),
      index_(spec_index),
      partial_(std::move(partial)) {}

namespace {

RunRow make_row(std::uint64_t id, const FaultSpec& spec, const Harness& harness, const RunResult& result,
                std::uint64_t seed) {
    RunRow row;
    row.run_id = id;
    if (spec.target.empty()) {
        row.target = "none";
        row.category = "none";
        row.fault_type = "none";
    } else {
        row.target = spec.target;
        row.category = to_string(find_target(harness.catalog(), spec.target)->category);
        row.fault_type = to_string(spec.type);
        row.byte = spec.byte_off;
        row.bit = spec.bit_off;
        row.t_inject = spec.t_inject;
    }
    row.outcome = result.outcome;
    row.run_ticks = result.run_ticks;
    row.golden_ticks = result.golden_ticks;
    if (result.panic) row.panic_reason = to_string(result.panic->reason);
    row.seed = seed;
    return row;
}

}  // namespace

CampaignReport run_campaign(const CampaignPlan& plan, const Harness& harness, std::uint32_t workers,
                            std::uint64_t seed, const ProgressFn& progress) {
    if (plan.empty()) throw InvalidParameter("campaign plan is empty");
    if (workers < 1) throw InvalidParameter("workers must be >= 1");
    workers = std::min<std::uint32_t>(workers, static_cast<std::uint32_t>(plan.size()));

    std::vector<std::optional<RunRow>> rows(plan.size());
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> done{0};
    std::mutex failure_mutex;
    std::optional<std::pair<std::uint64_t, std::string>> failure;
    std::mutex progress_mutex;

    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= plan.size()) return;
            const auto& spec = plan[i];
            try {
                const auto result =
                    harness.execute_run(spec.target.empty() ? std::nullopt : std::optional<FaultSpec>(spec));
                rows[i] = make_row(i, spec, harness, result, seed);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                if (!failure || i < failure->first) failure.emplace(i, e.what());
            }
            const auto n = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(n, plan.size());
            }
        }
    };

    std::vector<std::thread> pool;
    for (std::uint32_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    CampaignReport report;
    report.seed = seed;
    for (auto& r : rows) {
        if (r) report.runs.push_back(std::move(*r));
    }
    report.aggregate();
    if (failure) throw WorkerFailure(failure->first, failure->second, std::move(report));
    return report;
}

// -- files ---------------------------------------------------------------------------

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to " + path.string() + " failed");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string format_runs_csv(const std::vector<RunRow>& rows) {
    std::ostringstream out;
    out << kRunsCsvHeader << "\n";
    for (const auto& r : rows) {
        out << r.run_id << ',' << r.target << ',' << r.category << ',' << r.fault_type << ',' << r.byte << ','
            << r.bit << ',' << r.t_inject.tick << ',' << r.t_inject.event << ',' << to_string(r.outcome) << ','
            << r.run_ticks << ',' << r.golden_ticks << ',' << r.panic_reason << ',' << r.seed << "\n";
    }
    return out.str();
}

namespace {

template <typename T>
T csv_number(std::string_view text, std::size_t line) {
    T v{};
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
        throw std::runtime_error("runs.csv line " + std::to_string(line) + ": bad number '" + std::string(text) +
                                 "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto pos = line.find(sep);
        out.push_back(line.substr(0, pos));
        if (pos == std::string_view::npos) return out;
        line.remove_prefix(pos + 1);
    }
}

}  // namespace

std::vector<RunRow> parse_runs_csv(std::string_view text) {
    std::vector<RunRow> rows;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != kRunsCsvHeader) throw std::runtime_error("runs.csv has an unexpected header");
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 13) throw std::runtime_error("runs.csv line " + std::to_string(line_no) + ": 13 columns expected");
        RunRow r;
        r.run_id = csv_number<std::uint64_t>(f[0], line_no);
        r.target = f[1];
        r.category = f[2];
        r.fault_type = f[3];
        r.byte = csv_number<std::uint32_t>(f[4], line_no);
        r.bit = csv_number<unsigned>(f[5], line_no);
        r.t_inject = {csv_number<std::uint32_t>(f[6], line_no), csv_number<std::uint32_t>(f[7], line_no)};
        const auto o = parse_outcome(f[8]);
        if (!o) throw std::runtime_error("runs.csv line " + std::to_string(line_no) + ": bad outcome");
        r.outcome = *o;
        r.run_ticks = csv_number<std::uint32_t>(f[9], line_no);
        r.golden_ticks = csv_number<std::uint32_t>(f[10], line_no);
        r.panic_reason = f[11];
        r.seed = csv_number<std::uint64_t>(f[12], line_no);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

void outcome_columns(std::ostream& out) {
    for (auto o : kAllOutcomes) out << ',' << to_string(o);
}

void percent_columns(std::ostream& out, const OutcomeCounts& c) {
    for (auto o : kAllOutcomes) out << ',' << std::fixed << std::setprecision(4) << c.percent(o);
}

}  // namespace

std::string format_summary(const CampaignReport& report) {
    std::ostringstream out;
    out << "# campaign summary; outcome columns are percentages of runs\n";
    out << "seed: " << report.seed << "\n";
    out << "runs: " << report.runs.size() << "\n";
    out << "duration_s: ";
    if (report.duration_s) {
        out << std::fixed << std::setprecision(3) << *report.duration_s << "\n";
    } else {
        out << "n/a\n";
    }
    out << "\n[totals]\nfault_type,runs";
    outcome_columns(out);
    out << "\n";
    for (const auto& [type, c] : report.totals) {
        out << type << ',' << c.total();
        percent_columns(out, c);
        out << "\n";
    }
    out << "\n[categories]\nfault_type,category,runs";
    outcome_columns(out);
    out << "\n";
    for (const auto& [key, c] : report.per_category) {
        out << key.first << ',' << key.second << ',' << c.total();
        percent_columns(out, c);
        out << "\n";
    }
    out << "\n[targets]\nfault_type,target,category,runs";
    outcome_columns(out);
    out << "\n";
    for (const auto& t : report.per_target) {
        out << t.fault_type << ',' << t.target << ',' << t.category << ',' << t.counts.total();
        percent_columns(out, t.counts);
        out << "\n";
    }
    return out.str();
}

std::map<std::string, std::string> format_plot_data(const CampaignReport& report) {
    std::map<std::string, std::ostringstream> files;
    for (const auto& t : report.per_target) {
        auto& out = files[t.category + "_" + t.fault_type];
        if (out.tellp() == 0) {
            out << "target";
            outcome_columns(out);
            out << "\n";
        }
        out << t.target;
        percent_columns(out, t.counts);
        out << "\n";
    }
    std::map<std::string, std::string> result;
    for (auto& [name, s] : files) result[name] = s.str();
    return result;
}

namespace {

void write_summaries(const CampaignReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "plotdata", ec);
    if (ec) throw IoError("cannot create " + (dir / "plotdata").string() + ": " + ec.message());
    write_text_file(dir / "report.summary", format_summary(report));
    for (const auto& [name, text] : format_plot_data(report)) {
        write_text_file(dir / "plotdata" / (name + ".csv"), text);
    }
}

}  // namespace

void emit_report(const CampaignReport& report, const std::filesystem::path& dir) {
    write_summaries(report, dir);
    write_text_file(dir / "runs.csv", format_runs_csv(report.runs));
}

CampaignReport regenerate_report(const std::filesystem::path& dir) {
    CampaignReport report;
    report.runs = parse_runs_csv(read_text_file(dir / "runs.csv"));
    if (!report.runs.empty()) report.seed = report.runs.front().seed;
    // Wall-clock time is not recoverable from the per-run table; keep the old value.
    std::error_code ec;
    if (std::filesystem::exists(dir / "report.summary", ec)) {
        std::istringstream old(read_text_file(dir / "report.summary"));
        std::string line;
        while (std::getline(old, line)) {
            if (line.starts_with("duration_s: ") && line != "duration_s: n/a") {
                report.duration_s = std::stod(line.substr(12));
                break;
            }
        }
    }
    report.aggregate();
    write_summaries(report, dir);
    return report;
}

}  // namespace kronos
