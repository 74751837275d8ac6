#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "kronos/campaign.hpp"
#include "kronos/config.hpp"
#include "kronos/harness.hpp"
#include "kronos/targets.hpp"

namespace fs = std::filesystem;
using namespace kronos;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitExecution = 2;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::uint32_t> workers;
};

// Errors the user can fix by changing arguments or config.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

AppConfig resolve_config(const Globals& g) {
    AppConfig config = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
    if (g.seed) config.campaign.seed = *g.seed;
    if (g.out) config.output_dir = *g.out;
    if (g.workers) {
        if (*g.workers == 0) throw UsageError("--workers must be >= 1");
        config.campaign.workers = *g.workers;
    }
    return config;
}

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

fs::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    return dir;
}

int cmd_golden(const Globals& g) {
    const auto config = resolve_config(g);
    const auto inputs = WorkloadInputs::build(config.system.sizes);
    const auto golden = golden_run(config.system, inputs);
    const auto path = ensure_dir(config.output_dir) / "golden.profile";
    write_text_file(path, format_golden_profile(golden));
    std::cout << "total_ticks " << golden.total_ticks << "\n";
    for (const auto& [id, out] : golden.per_task) {
        std::cout << to_string(id) << " digest " << hex(out.digest) << " completed at tick " << out.completion_tick
                  << "\n";
    }
    std::cout << "wrote " << path.string() << "\n";
    return kExitOk;
}

int cmd_targets_list(const Globals& g) {
    const auto config = resolve_config(g);
    const Kernel kernel(config.system.kernel);
    for (const auto& t : gather_targets(kernel)) std::cout << format_target_line(t) << "\n";
    return kExitOk;
}

struct InjectArgs {
    std::string target;
    std::uint32_t byte = 0;
    unsigned bit = 0;
    std::string type = "transient";
    std::optional<unsigned> stuck;
    std::string at;
};

int cmd_inject(const Globals& g, const InjectArgs& a) {
    const auto config = resolve_config(g);
    FaultSpec spec;
    spec.target = a.target;
    spec.byte_off = a.byte;
    spec.bit_off = a.bit;
    const auto type = parse_fault_type(a.type);
    if (!type) throw UsageError("--type must be transient or permanent");
    spec.type = *type;
    if (a.stuck && spec.type != FaultType::permanent) throw UsageError("--stuck only applies to permanent faults");
    spec.stuck_value = a.stuck;
    const auto at = parse_sim_time(a.at);
    if (!at) throw UsageError("--at expects <tick>:<event> with event in 0..2, got '" + a.at + "'");
    spec.t_inject = *at;

    const Harness harness(config.system, config.thresholds);
    if (!find_target(harness.catalog(), spec.target)) {
        std::string names;
        for (const auto& t : harness.catalog()) names += "\n  " + t.name;
        throw UsageError("unknown target '" + spec.target + "'; valid targets:" + names);
    }
    const auto& target = *find_target(harness.catalog(), spec.target);
    if (spec.byte_off >= target.size || spec.bit_off > 7) {
        throw UsageError("offset " + std::to_string(spec.byte_off) + "." + std::to_string(spec.bit_off) +
                         " out of range for " + target.name + " (" + std::to_string(target.size) + " bytes)");
    }

    const auto result = harness.execute_run(spec, EventRecording::full);
    const auto log_path = ensure_dir(config.output_dir) / "inject.log";
    std::ofstream log(log_path);
    if (!log) throw IoError("cannot write " + log_path.string());
    emit_run_log(result, config.campaign.seed, log);

    std::cout << "outcome " << to_string(result.outcome) << "\n";
    std::cout << "run_ticks " << result.run_ticks << " golden_ticks " << result.golden_ticks << "\n";
    if (result.panic) {
        std::cout << "panic " << to_string(result.panic->reason) << ": " << result.panic->detail << "\n";
    }
    if (!result.validity.valid) std::cout << "invalid: " << result.validity.reason << "\n";
    std::cout << "log " << log_path.string() << "\n";
    return kExitOk;
}

struct CampaignArgs {
    std::optional<std::uint32_t> per_location;
    std::vector<std::string> targets;
    std::vector<std::string> fault_types;
    bool quiet = false;
};

int cmd_campaign(const Globals& g, const CampaignArgs& a) {
    auto config = resolve_config(g);
    if (a.per_location) config.campaign.n_per_location = *a.per_location;
    if (!a.targets.empty()) config.campaign.targets = a.targets;
    if (!a.fault_types.empty()) {
        config.campaign.fault_types.clear();
        for (const auto& t : a.fault_types) {
            const auto type = parse_fault_type(t);
            if (!type) throw UsageError("unknown fault type '" + t + "'");
            config.campaign.fault_types.push_back(*type);
        }
    }
    try {
        config.campaign.validate();
    } catch (const InvalidParameter& e) {
        throw UsageError(e.what());
    }

    const Harness harness(config.system, config.thresholds);
    CampaignPlan plan;
    try {
        plan = plan_campaign(config.campaign, harness.catalog(), harness.golden());
    } catch (const UnknownTarget& e) {
        throw UsageError(e.what());
    }
    const auto dir = ensure_dir(config.output_dir);
    write_text_file(dir / "golden.profile", format_golden_profile(harness.golden()));

    std::cout << "golden run: " << harness.golden().total_ticks << " ticks; " << plan.size() << " runs ("
              << config.campaign.per_location() << " per location), " << config.campaign.workers << " workers\n";
    ProgressFn progress;
    if (!a.quiet) {
        progress = [](std::uint64_t done, std::uint64_t total) {
            if (done % 5000 == 0 || done == total) std::cerr << "  " << done << "/" << total << "\n";
        };
    }
    const auto start = std::chrono::steady_clock::now();
    auto report = run_campaign(plan, harness, config.campaign.workers, config.campaign.seed, progress);
    report.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit_report(report, dir);

    for (const auto& [type, counts] : report.totals) {
        std::cout << type;
        for (auto o : kAllOutcomes) std::cout << " " << to_string(o) << "=" << std::fixed << std::setprecision(2)
                                              << counts.percent(o) << "%";
        std::cout << "\n";
    }
    std::cout << "wrote " << dir.string() << " in " << std::setprecision(1) << *report.duration_s << " s\n";
    return kExitOk;
}

int cmd_report(const Globals& g, const std::string& dir_arg) {
    const auto config = resolve_config(g);
    const fs::path dir = dir_arg.empty() ? fs::path(config.output_dir) : fs::path(dir_arg);
    const auto report = regenerate_report(dir);
    std::cout << format_summary(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fault-injection campaigns against a simulated FreeRTOS-style kernel"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "campaign seed (overrides campaign.seed)");
    app.add_option("--out", g.out, "output directory (overrides campaign.output_dir)");
    app.add_option("--workers", g.workers, "worker threads (overrides campaign.workers)");

    auto* golden = app.add_subcommand("golden", "profile the fault-free run and write golden.profile");

    auto* targets = app.add_subcommand("targets", "inspect the injection target catalog");
    targets->require_subcommand(1);
    auto* targets_list = targets->add_subcommand("list", "print name,category,size_bytes,valid_predicate");

    InjectArgs inject_args;
    auto* inject = app.add_subcommand("inject", "run once with a single fault");
    inject->add_option("--target", inject_args.target, "target name")->required();
    inject->add_option("--byte", inject_args.byte, "byte offset within the target")->required();
    inject->add_option("--bit", inject_args.bit, "bit within the byte (0-7)")->required();
    inject->add_option("--type", inject_args.type, "transient or permanent");
    inject->add_option("--stuck", inject_args.stuck, "stuck-at value for permanent faults (default: opposite of current)")
        ->check(CLI::Range(0, 1));
    inject->add_option("--at", inject_args.at, "injection instant <tick>:<event>")->required();

    CampaignArgs campaign_args;
    auto* campaign = app.add_subcommand("campaign", "plan, run and report a fault-injection campaign");
    campaign->add_option("--per-location", campaign_args.per_location, "runs per target (overrides sizing)");
    campaign->add_option("--target", campaign_args.targets, "restrict to these targets");
    campaign->add_option("--fault-type", campaign_args.fault_types, "transient and/or permanent");
    campaign->add_flag("--quiet", campaign_args.quiet, "no progress output");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "regenerate summaries and plot data from runs.csv");
    report->add_option("--dir", report_dir, "campaign output directory (default: --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*golden) return cmd_golden(g);
        if (*targets_list) return cmd_targets_list(g);
        if (*inject) return cmd_inject(g, inject_args);
        if (*campaign) return cmd_campaign(g, campaign_args);
        if (*report) return cmd_report(g, report_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const WorkerFailure& e) {
        std::cerr << "campaign failed: " << e.what() << " (" << e.partial().runs.size() << " runs completed)\n";
        return kExitExecution;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExecution;
    }
    return kExitUsage;
}
