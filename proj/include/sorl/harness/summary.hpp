#pragma once

// Post-run analysis of a run directory: per-run statistics, the Pareto
// summary across algorithms, violations-vs-return curves and the audit of the
// penalty bound over every logged lambda/C state.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sorl/harness/experiment.hpp"
#include "sorl/records.hpp"
#include "sorl/shaping.hpp"

namespace sorl {

/// Fraction of episodes forming the final window.
inline constexpr double kFinalWindowFraction = 0.10;

struct LoadedRun {
    std::string label;
    std::string algo;
    std::uint64_t seed = 0;
    std::optional<double> delta;
    bool ok = false;
    std::vector<RunRecord> records;
    std::vector<TimelineEntry> timeline;
};

/// Runs listed in the manifest of `dir` with their logs.
inline std::vector<LoadedRun> load_runs(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw InputError("no manifest.json in " + dir.string());
    nlohmann::json m;
    {
        std::ifstream f(manifest_path);
        try {
            f >> m;
        } catch (const nlohmann::json::exception& e) {
            throw InputError("manifest: " + std::string(e.what()));
        }
    }
    std::vector<LoadedRun> out;
    for (const auto& r : m.at("runs")) {
        LoadedRun run;
        run.label = r.at("label").get<std::string>();
        run.algo = r.at("algo").get<std::string>();
        run.seed = r.at("seed").get<std::uint64_t>();
        if (!r.at("delta").is_null()) run.delta = r.at("delta").get<double>();
        run.ok = r.at("status").get<std::string>() == "ok";
        const fs::path log = dir / r.at("log").get<std::string>();
        if (fs::exists(log))
            for (const auto& j : read_jsonl(log)) run.records.push_back(RunRecord::from_json(j));
        const fs::path tl = dir / r.at("timeline").get<std::string>();
        if (fs::exists(tl))
            for (const auto& j : read_jsonl(tl)) run.timeline.push_back(TimelineEntry::from_json(j));
        out.push_back(std::move(run));
    }
    if (out.empty()) throw InputError("run directory " + dir.string() + " lists no runs");
    return out;
}

struct RunStats {
    std::string label;
    std::uint64_t seed = 0;
    std::int64_t episodes = 0;
    std::int64_t total_steps = 0;
    std::int64_t violations = 0;
    double final_return = 0.0;        // mean undiscounted return in the final window
    double final_failure_rate = 0.0;  // fraction of final-window episodes ending in a violation
    double cumulative_failure_rate = 0.0;
};

inline std::size_t final_window_size(std::size_t episodes) {
    if (episodes == 0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kFinalWindowFraction * episodes)));
}

inline RunStats run_stats(const LoadedRun& run) {
    RunStats s;
    s.label = run.label;
    s.seed = run.seed;
    s.episodes = static_cast<std::int64_t>(run.records.size());
    if (run.records.empty()) return s;
    const auto& last = run.records.back();
    s.total_steps = last.total_steps;
    s.violations = last.violations_cumulative;
    s.cumulative_failure_rate = last.failure_rate_cumulative;
    const std::size_t w = final_window_size(run.records.size());
    for (std::size_t i = run.records.size() - w; i < run.records.size(); ++i) {
        s.final_return += run.records[i].episode_return;
        s.final_failure_rate += run.records[i].episode_violation;
    }
    s.final_return /= static_cast<double>(w);
    s.final_failure_rate /= static_cast<double>(w);
    return s;
}

// ---------------------------------------------------------------------------
// Pareto summary

struct ParetoPoint {
    std::string label;
    double mean_return = 0.0;
    double mean_failure_rate = 0.0;
    double normalized_return = 0.0;   // in [0,1]
    double normalized_failure = 0.0;  // in [-1,0]; 0 is the lowest failure rate
    bool dominated = false;
    std::vector<std::string> dominated_by;
};

struct ParetoSummary {
    std::vector<ParetoPoint> points;
    double return_min = 0.0, return_max = 0.0;
    double failure_min = 0.0, failure_max = 0.0;

    const ParetoPoint& at(const std::string& label) const {
        for (const auto& p : points)
            if (p.label == label) return p;
        throw InputError("no Pareto point labelled " + label);
    }
};

/// a dominates b: return no worse, failure no worse, one of them strictly better.
inline bool dominates(double ret_a, double fail_a, double ret_b, double fail_b) {
    return ret_a >= ret_b && fail_a <= fail_b && (ret_a > ret_b || fail_a < fail_b);
}

/// Min-max maps returns to [0,1] and constraint scores (-failure) to [-1,0].
/// Applying it to already normalized coordinates returns them unchanged.
inline void normalize_points(std::vector<double>& returns, std::vector<double>& scores) {
    auto minmax = [](std::vector<double>& v, double shift) {
        if (v.empty()) return;
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double a = *lo, b = *hi;
        for (double& x : v) x = (b > a ? (x - a) / (b - a) : 1.0) + shift;
    };
    minmax(returns, 0.0);
    minmax(scores, -1.0);
}

/// Points are (mean return, mean failure rate) per label; dominance is
/// decided on the raw means.
inline ParetoSummary pareto_from_points(std::vector<ParetoPoint> pts) {
    if (pts.empty()) throw InputError("pareto summary needs at least one point");
    ParetoSummary s;
    std::vector<double> r, c;
    for (const auto& p : pts) {
        r.push_back(p.mean_return);
        c.push_back(-p.mean_failure_rate);
    }
    s.return_min = *std::min_element(r.begin(), r.end());
    s.return_max = *std::max_element(r.begin(), r.end());
    s.failure_min = -*std::max_element(c.begin(), c.end());
    s.failure_max = -*std::min_element(c.begin(), c.end());
    normalize_points(r, c);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i].normalized_return = r[i];
        pts[i].normalized_failure = c[i];
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (i != j && dominates(pts[j].mean_return, pts[j].mean_failure_rate, pts[i].mean_return,
                                    pts[i].mean_failure_rate)) {
                pts[i].dominated = true;
                pts[i].dominated_by.push_back(pts[j].label);
            }
    }
    s.points = std::move(pts);
    return s;
}

inline ParetoSummary pareto_summary(const std::vector<LoadedRun>& runs) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_label;
    std::vector<std::string> order;
    for (const auto& run : runs) {
        if (!run.ok || run.records.empty()) continue;
        const RunStats st = run_stats(run);
        if (!by_label.count(run.label)) order.push_back(run.label);
        by_label[run.label].first.push_back(st.final_return);
        by_label[run.label].second.push_back(st.final_failure_rate);
    }
    if (order.empty()) throw InputError("no completed runs to summarize");
    std::vector<ParetoPoint> pts;
    for (const auto& label : order) {
        const auto& [rets, fails] = by_label[label];
        ParetoPoint p;
        p.label = label;
        for (double x : rets) p.mean_return += x / static_cast<double>(rets.size());
        for (double x : fails) p.mean_failure_rate += x / static_cast<double>(fails.size());
        pts.push_back(p);
    }
    return pareto_from_points(std::move(pts));
}

inline ParetoSummary pareto_summary(const fs::path& dir) { return pareto_summary(load_runs(dir)); }

// ---------------------------------------------------------------------------
// Violations vs return

/// Episodes averaged for the return attached to a violation count.
inline constexpr std::size_t kCurveWindow = 10;

struct CurvePoint {
    std::string label;
    std::uint64_t seed = 0;
    std::int64_t violations = 0;
    std::int64_t episode = 0;
    double episode_return = 0.0;
};

/// One row per distinct cumulative violation count of each run: the mean
/// return over the last kCurveWindow episodes at the final episode that still
/// had that count, i.e. the policy's return when the next violation occurred.
inline std::vector<CurvePoint> violations_vs_return_curve(const std::vector<LoadedRun>& runs,
                                                          const std::string& label_prefix = "sorl") {
    std::vector<CurvePoint> out;
    for (const auto& run : runs) {
        if (run.label.rfind(label_prefix, 0) != 0 || run.records.empty()) continue;
        double window_sum = 0.0;
        for (std::size_t i = 0; i < run.records.size(); ++i) {
            window_sum += run.records[i].episode_return;
            if (i >= kCurveWindow) window_sum -= run.records[i - kCurveWindow].episode_return;
            const bool last_with_count = i + 1 == run.records.size() ||
                                         run.records[i + 1].violations_cumulative != run.records[i].violations_cumulative;
            if (!last_with_count) continue;
            const auto n = static_cast<double>(std::min(i + 1, kCurveWindow));
            out.push_back({run.label, run.seed, run.records[i].violations_cumulative, run.records[i].episode,
                           window_sum / n});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Penalty audit

struct PenaltyAudit {
    std::size_t runs_audited = 0;
    std::size_t states_checked = 0;  // timeline entries and per-episode records
    std::size_t failures = 0;
    std::size_t non_monotone = 0;  // C decreased within a run
    std::vector<std::string> messages;

    bool passed() const { return failures == 0 && non_monotone == 0 && runs_audited > 0; }
};

/// Checks C > (r_max - r_min)/gamma^H - r_max on every logged lambda/C state
/// of runs that use the penalty with a C derived from the reward range.
inline PenaltyAudit audit_penalty(const std::vector<LoadedRun>& runs) {
    PenaltyAudit a;
    auto check = [&](const LoadedRun& run, double c, double lo, double hi, double gamma, int h, const std::string& where) {
        ++a.states_checked;
        const double bound = penalty_lower_bound(lo, hi, gamma, h);
        if (!(c > bound)) {
            ++a.failures;
            std::ostringstream m;
            m << run.label << " seed " << run.seed << " " << where << ": C=" << c << " <= bound " << bound;
            a.messages.push_back(m.str());
        }
    };
    for (const auto& run : runs) {
        if (run.algo == "lagrangian" || run.timeline.empty()) continue;
        if (std::any_of(run.timeline.begin(), run.timeline.end(), [](const auto& e) { return e.overridden; })) continue;
        ++a.runs_audited;
        const double gamma = run.timeline.front().gamma;
        const int h = run.timeline.front().h_star;
        double prev_c = -std::numeric_limits<double>::infinity();
        for (const auto& e : run.timeline) {
            check(run, e.penalty_c, e.r_min_emp, e.r_max_emp, e.gamma, e.h_star, "step " + std::to_string(e.step));
            if (e.penalty_c < prev_c) ++a.non_monotone;
            prev_c = e.penalty_c;
        }
        for (const auto& r : run.records)
            check(run, r.penalty_c, r.r_min_emp, r.r_max_emp, gamma, h, "episode " + std::to_string(r.episode));
    }
    return a;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string csv_number(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

inline void write_summary_csv(const std::vector<LoadedRun>& runs, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << "label,seed,status,episodes,total_steps,violations,final_return,final_failure_rate,cumulative_failure_rate\n";
    for (const auto& run : runs) {
        const RunStats s = run_stats(run);
        f << s.label << ',' << s.seed << ',' << (run.ok ? "ok" : "failed") << ',' << s.episodes << ',' << s.total_steps
          << ',' << s.violations << ',' << csv_number(s.final_return) << ',' << csv_number(s.final_failure_rate) << ','
          << csv_number(s.cumulative_failure_rate) << '\n';
    }
}

inline void write_pareto_csv(const ParetoSummary& p, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << "label,mean_return,mean_failure_rate,normalized_return,normalized_failure,dominated,dominated_by\n";
    for (const auto& x : p.points) {
        std::string by;
        for (const auto& l : x.dominated_by) by += (by.empty() ? "" : ";") + l;
        f << x.label << ',' << csv_number(x.mean_return) << ',' << csv_number(x.mean_failure_rate) << ','
          << csv_number(x.normalized_return) << ',' << csv_number(x.normalized_failure) << ','
          << (x.dominated ? 1 : 0) << ',' << by << '\n';
    }
}

inline void write_curve_csv(const std::vector<CurvePoint>& pts, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << "label,seed,violations,episode,return\n";
    for (const auto& p : pts)
        f << p.label << ',' << p.seed << ',' << p.violations << ',' << p.episode << ',' << csv_number(p.episode_return)
          << '\n';
}

struct SummaryFiles {
    ParetoSummary pareto;
    PenaltyAudit audit;
    std::vector<fs::path> curves;
};

/// Writes summary.csv, pareto.csv and one curve_<label>.csv per SORL label.
inline SummaryFiles summarize_directory(const fs::path& dir) {
    const auto runs = load_runs(dir);
    SummaryFiles out;
    write_summary_csv(runs, dir / "summary.csv");
    out.pareto = pareto_summary(runs);
    write_pareto_csv(out.pareto, dir / "pareto.csv");
    std::vector<std::string> labels;
    for (const auto& r : runs)
        if (r.algo == "sorl" && std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
    for (const auto& label : labels) {
        std::vector<LoadedRun> subset;
        for (const auto& r : runs)
            if (r.label == label) subset.push_back(r);
        const fs::path p = dir / ("curve_" + label + ".csv");
        write_curve_csv(violations_vs_return_curve(subset, label), p);
        out.curves.push_back(p);
    }
    out.audit = audit_penalty(runs);
    return out;
}

}  // namespace sorl
