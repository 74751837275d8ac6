// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "kronos/campaign.hpp"
#include "test_support.hpp"

using namespace kronos;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Verdict()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("[%s] criterion %d: %s | %s | %.1fs\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Normal quantile by Simpson integration of the density plus bisection.
double numeric_cutoff(double confidence) {
    auto mass = [](double z) {
        const int n = 4000;
        const double h = z / n;
        auto f = [](double x) { return std::exp(-x * x / 2) / std::sqrt(2 * std::acos(-1.0)); };
        double s = f(0) + f(z);
        for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
        return 2 * s * h / 3;
    };
    double lo = 0, hi = 10;
    for (int i = 0; i < 100; ++i) {
        const double mid = (lo + hi) / 2;
        (mass(mid) < confidence ? lo : hi) = mid;
    }
    return (lo + hi) / 2;
}

CampaignPlan single_target_plan(const Harness& h, const std::string& target, FaultType type, std::uint64_t seed) {
    CampaignConfig c;
    c.fault_types = {type};
    c.targets = {target};
    c.seed = seed;
    return plan_campaign(c, h.catalog(), h.golden());
}

// Item count of `list` just before event (tick, event) of an unfaulted run.
std::uint32_t list_count_before(const Harness& h, KList list, SimTime at) {
    Kernel k(h.config().kernel);
    OutputSink sink;
    install_workloads(k, h.inputs(), sink);
    k.start_scheduler();
    for (std::uint32_t tick = 0;; ++tick) {
        k.set_clock(tick);
        for (std::uint32_t e = 0; e < kEventsPerTick; ++e) {
            if (SimTime{tick, e} == at) return k.image().read_field(k.list_address(list) + layout::kListCount, 4);
            if (e == 0 && tick > 0) k.tick_advance();
            if (e == 1) k.run_slice();
            if (e == 2) k.schedule_next();
            if (k.shutdown_requested()) return 0;
        }
    }
}

struct CategoryMeans {
    double all_runs = 0;
    double valid_runs = 0;
};

// Mean over a category's targets of the per-target CRASH rate. The valid-run
// variant divides by non-INVALID runs and skips never-valid targets.
std::map<std::string, CategoryMeans> crash_means(const CampaignReport& r, const std::string& type) {
    std::map<std::string, std::vector<double>> all, valid;
    for (const auto& t : r.per_target) {
        if (t.fault_type != type) continue;
        all[t.category].push_back(t.counts.percent(Outcome::CRASH));
        const auto n = t.counts.total() - t.counts[Outcome::INVALID];
        if (n > 0) valid[t.category].push_back(100.0 * static_cast<double>(t.counts[Outcome::CRASH]) / n);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    std::map<std::string, CategoryMeans> out;
    for (const auto& [cat, v] : all) out[cat] = {mean(v), mean(valid[cat])};
    return out;
}

}  // namespace

int main() {
    const Harness harness(SystemConfig{}, Thresholds{});
    std::printf("golden run: %u ticks, %zu targets\n", harness.golden().total_ticks, harness.catalog().size());

    report(1, "sample sizing", [] {
        const auto n99 = compute_sample_size(0.99, 0.05, 0.5);
        const auto n95 = compute_sample_size(0.95, 0.05, 0.5);
        const double t = numeric_cutoff(0.95);
        const auto oracle = static_cast<std::uint64_t>(std::ceil(t * t * 0.25 / (0.05 * 0.05)));
        return Verdict{n99 == 666 && n95 == 385 && oracle == n95,
                       "n(0.99)=" + std::to_string(n99) + " n(0.95)=" + std::to_string(n95) +
                           " numeric oracle=" + std::to_string(oracle)};
    });

    report(2, "null-fault soundness", [&] {
        const CampaignPlan plan(1000, FaultSpec{});
        const auto a = run_campaign(plan, harness, 4, 1);
        const auto b = run_campaign(plan, harness, 4, 1);
        const auto benign = a.totals.at("none").percent(Outcome::BENIGN);
        const bool identical = format_runs_csv(a.runs) == format_runs_csv(b.runs);
        return Verdict{benign == 100.0 && identical && a.runs.size() == 1000,
                       fmt("BENIGN %.2f%%", benign) + (identical ? ", runs.csv identical" : ", runs.csv differs")};
    });

    report(3, "pxCurrentTCB crash rate", [&] {
        std::string detail;
        bool pass = true;
        for (auto type : {FaultType::transient, FaultType::permanent}) {
            const auto r = run_campaign(single_target_plan(harness, "pxCurrentTCB", type, 3), harness, 4, 3);
            const double crash = r.totals.at(to_string(type)).percent(Outcome::CRASH);
            pass = pass && r.runs.size() == 666 && crash >= 90.0;
            detail += std::string(detail.empty() ? "" : ", ") + to_string(type) + fmt(" CRASH %.2f%%", crash);
        }
        return Verdict{pass, detail + " over 666 runs each (need >= 90%)"};
    });

    report(6, "empty delayed lists are INVALID", [&] {
        std::uint64_t empty = 0, empty_invalid = 0, total = 0;
        for (auto list : {KList::xDelayedTaskList1, KList::xDelayedTaskList2}) {
            for (auto type : {FaultType::transient, FaultType::permanent}) {
                for (const auto& spec : single_target_plan(harness, list_name(list), type, 6)) {
                    ++total;
                    if (list_count_before(harness, list, spec.t_inject) != 0) continue;
                    ++empty;
                    if (harness.execute_run(spec).outcome == Outcome::INVALID) ++empty_invalid;
                }
            }
        }
        return Verdict{empty > 0 && empty == empty_invalid,
                       std::to_string(empty_invalid) + "/" + std::to_string(empty) +
                           " injections into an empty list INVALID (" + std::to_string(total) + " sampled)"};
    });

    report(7, "fault-model properties", [&] {
        std::mt19937_64 rng(7);
        const auto& catalog = harness.catalog();
        int single_bit = 0, restored = 0;
        const int trials = 2000;
        for (int i = 0; i < trials; ++i) {
            Kernel k(harness.config().kernel);
            OutputSink sink;
            install_workloads(k, harness.inputs(), sink);
            k.start_scheduler();
            const auto& t = catalog[uniform_below(rng, catalog.size())];
            FaultSpec spec{t.name, static_cast<std::uint32_t>(uniform_below(rng, t.size)),
                           static_cast<unsigned>(uniform_below(rng, 8)), FaultType::transient, std::nullopt, {0, 1}};
            const auto before = k.image().snapshot();
            auto first = arm(spec, catalog);
            first.fire(k, {0, 1});
            if (KernelImage::diff(before, k.image().snapshot()).size() == 1) ++single_bit;
            auto second = arm(spec, catalog);
            second.fire(k, {0, 1});
            if (k.image().snapshot().bytes == before.bytes) ++restored;
        }

        Kernel k(harness.config().kernel);
        OutputSink sink;
        install_workloads(k, harness.inputs(), sink);
        k.start_scheduler();
        const auto* tick = find_target(catalog, "xTickCount");
        FaultSpec stuck{"xTickCount", 2, 5, FaultType::permanent, 1, {0, 1}};
        arm(stuck, catalog).fire(k, {0, 1});
        int held = 0;
        const int writes = 10000;
        for (int i = 0; i < writes; ++i) {
            k.image().write_field(tick->base, 4, static_cast<std::uint32_t>(rng()));
            if (k.image().read_bit(tick->base + 2, 5)) ++held;
        }
        return Verdict{single_bit == trials && restored == trials && held == writes,
                       "(a) one-bit diffs " + std::to_string(single_bit) + "/" + std::to_string(trials) +
                           ", (b) stuck bit held " + std::to_string(held) + "/" + std::to_string(writes) +
                           ", (c) double flip restored " + std::to_string(restored) + "/" + std::to_string(trials)};
    });

    report(8, "list oracle equivalence", [] {
        std::mt19937_64 rng(8);
        int matched = 0;
        const int sequences = 10000;
        for (int seq = 0; seq < sequences; ++seq) {
            Kernel k;
            auto& img = k.image();
            const auto list = img.allocate("oracle", layout::kListSize, ObjectKind::list);
            img.add_child("oracle.xListEnd", "oracle", list + layout::kListEnd, layout::kMiniItemSize,
                          ObjectKind::list_item);
            k.list_init(list);
            std::vector<Handle> spare;
            const auto items = 1 + rng() % 32;
            for (std::size_t i = 0; i < items; ++i) {
                spare.push_back(img.allocate("oracle." + std::to_string(i), layout::kListItemSize, ObjectKind::list_item));
            }
            std::vector<std::pair<std::uint32_t, Handle>> model;
            bool ok = true;
            const int ops = 1 + static_cast<int>(rng() % 48);
            for (int op = 0; op < ops && ok; ++op) {
                if (!spare.empty() && (model.empty() || rng() % 3 != 0)) {
                    const auto pick = rng() % spare.size();
                    const auto item = spare[pick];
                    spare.erase(spare.begin() + static_cast<long>(pick));
                    const auto value = static_cast<std::uint32_t>(rng() % 10);
                    img.write_field(item + layout::kItemValue, 4, value);
                    k.list_insert_ordered(list, item);
                    model.insert(std::upper_bound(model.begin(), model.end(), value,
                                                  [](std::uint32_t v, const auto& e) { return v < e.first; }),
                                 {value, item});
                } else {
                    const auto pick = rng() % model.size();
                    k.list_remove(model[pick].second);
                    spare.push_back(model[pick].second);
                    model.erase(model.begin() + static_cast<long>(pick));
                }
                std::vector<Handle> expect;
                for (const auto& e : model) expect.push_back(e.second);
                ok = k.list_items(list) == expect;
            }
            if (ok) ++matched;
        }
        return Verdict{matched == sequences, std::to_string(matched) + "/" + std::to_string(sequences) +
                                                 " sequences match the sorted-array model"};
    });

    // Criteria 4, 5, 9 and 10 share the full default campaign.
    CampaignConfig full;
    const auto plan = plan_campaign(full, harness.catalog(), harness.golden());
    std::printf("full campaign: %zu runs per worker setting\n", plan.size());
    std::fflush(stdout);
    auto timed = [&](std::uint32_t workers) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = run_campaign(plan, harness, workers, full.seed);
        r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    };
    const auto four = timed(4);
    const auto one = timed(1);

    report(4, "category crash ordering", [&] {
        bool pass = true;
        std::string detail;
        for (auto type : {"transient", "permanent"}) {
            const auto m = crash_means(four, type);
            const auto& p = m.at("pointer");
            const auto& l = m.at("list");
            const auto& t = m.at("tcb_field");
            pass = pass && p.valid_runs > l.valid_runs && l.valid_runs >= t.valid_runs;
            const bool all_order = p.all_runs > l.all_runs && l.all_runs >= t.all_runs;
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "%s%s: valid-run means pointer %.2f > list %.2f >= tcb_field %.2f; "
                          "all-run means %.2f/%.2f/%.2f (%s)",
                          detail.empty() ? "" : "; ", type, p.valid_runs, l.valid_runs, t.valid_runs, p.all_runs,
                          l.all_runs, t.all_runs, all_order ? "ordered" : "not ordered");
            detail += buf;
        }
        return Verdict{pass, detail};
    });

    report(5, "zero SDC outside variables", [&] {
        std::map<std::string, std::uint64_t> sdc;
        for (const auto& [key, counts] : four.per_category) {
            sdc[key.second] += counts[Outcome::SDC] + counts[Outcome::SDC_DELAY];
        }
        const auto bad = sdc["pointer"] + sdc["list"] + sdc["tcb_field"];
        return Verdict{bad == 0, "SDC+SDC_DELAY pointer=" + std::to_string(sdc["pointer"]) +
                                     " list=" + std::to_string(sdc["list"]) +
                                     " tcb_field=" + std::to_string(sdc["tcb_field"]) +
                                     " (variable=" + std::to_string(sdc["variable"]) + ")"};
    });

    report(9, "full campaign runtime and parallel soundness", [&] {
        bool same = one.runs.size() == four.runs.size();
        for (std::size_t i = 0; same && i < one.runs.size(); ++i) same = one.runs[i] == four.runs[i];
        const double slowest = std::max(*one.duration_s, *four.duration_s);
        return Verdict{same && slowest <= 600.0 && four.runs.size() == plan.size(),
                       std::to_string(four.runs.size()) + " runs; 4 workers " + fmt("%.1fs", *four.duration_s) +
                           ", 1 worker " + fmt("%.1fs", *one.duration_s) +
                           (same ? "; outcomes identical" : "; outcomes differ")};
    });

    report(10, "percentage conservation", [&] {
        bool pass = true;
        std::uint64_t counted = 0;
        double worst = 0;
        auto check = [&](const OutcomeCounts& c) {
            double sum = 0;
            for (auto o : kAllOutcomes) sum += c.percent(o);
            worst = std::max(worst, std::abs(sum - 100.0));
            pass = pass && std::abs(sum - 100.0) <= 0.01;
        };
        for (const auto& t : four.per_target) {
            check(t.counts);
            counted += t.counts.total();
        }
        std::uint64_t total_counts = 0;
        for (const auto& [type, c] : four.totals) {
            check(c);
            total_counts += c.total();
        }
        pass = pass && counted == plan.size() && total_counts == plan.size();
        return Verdict{pass, std::to_string(four.per_target.size()) + " target rows; counts " +
                                 std::to_string(counted) + "/" + std::to_string(plan.size()) +
                                 fmt("; max deviation %.2e%%", worst)};
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
    return failures == 0 ? 0 : 1;
}
