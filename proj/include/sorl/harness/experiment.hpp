#pragma once

// Multi-seed experiment runs. Output layout under the run directory:
//
//   manifest.json                      resolved config, code version, run list
//   runs/<label>-seed<N>.jsonl         one RunRecord per line
//   runs/<label>-seed<N>.timeline.jsonl  lambda / C / range changes
//
// <label> is the algorithm name, or sorl_delta<X> when SORL sweeps Delta.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sorl/agent.hpp"
#include "sorl/harness/config.hpp"
#include "sorl/records.hpp"

#ifndef SORL_CODE_VERSION
#define SORL_CODE_VERSION "0.1.0"
#endif

namespace sorl {

namespace fs = std::filesystem;

/// Appends whole lines; each line goes out in one write followed by a flush,
/// so a crash never leaves a partial line behind.
class JsonlWriter {
public:
    explicit JsonlWriter(const fs::path& path) : path_(path) {
        file_ = std::fopen(path.string().c_str(), "wb");
        if (!file_) throw InputError("cannot open log for writing: " + path.string());
    }
    JsonlWriter(const JsonlWriter&) = delete;
    JsonlWriter& operator=(const JsonlWriter&) = delete;
    ~JsonlWriter() {
        if (file_) std::fclose(file_);
    }

    void write(const OrderedJson& j) {
        const std::string line = j.dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0)
            throw InputError("failed writing " + path_.string());
    }

private:
    fs::path path_;
    std::FILE* file_ = nullptr;
};

/// Reads a JSONL file, one parsed object per non-empty line.
inline std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open " + path.string());
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(f, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

inline std::string format_delta(double d) {
    std::ostringstream s;
    s << d;
    return s.str();
}

struct RunSpec {
    Algorithm algo = Algorithm::Sorl;
    std::uint64_t seed = 0;
    std::optional<double> delta;  // SORL only
    std::string label;

    std::string stem() const { return label + "-seed" + std::to_string(seed); }
};

struct RunOutcome {
    RunSpec spec;
    bool ok = false;
    std::string error;
    std::int64_t episodes = 0;
    std::int64_t total_steps = 0;
    std::int64_t violations = 0;
};

/// Every (algo, seed) pair, with SORL expanded over the Delta sweep.
inline std::vector<RunSpec> plan_runs(const ExperimentConfig& cfg) {
    std::vector<RunSpec> out;
    const bool sweep = cfg.deltas.size() > 1;
    for (Algorithm a : cfg.algos) {
        std::vector<std::optional<double>> deltas{std::nullopt};
        if (a == Algorithm::Sorl) {
            deltas.clear();
            if (cfg.deltas.empty()) deltas.push_back(cfg.agent.delta_target);
            for (double d : cfg.deltas) deltas.push_back(d);
        }
        for (const auto& d : deltas)
            for (std::uint64_t seed : cfg.seeds) {
                RunSpec r{a, seed, d, algorithm_name(a)};
                if (a == Algorithm::Sorl && sweep) r.label += "_delta" + format_delta(*d);
                out.push_back(r);
            }
    }
    return out;
}

/// Trains one pair and streams its logs. Failures are captured in the outcome.
inline RunOutcome execute_run(const ExperimentConfig& cfg, const RunSpec& spec, const fs::path& run_dir) {
    RunOutcome out;
    out.spec = spec;
    try {
        AgentConfig agent = cfg.agent;
        agent.algo = spec.algo;
        if (spec.delta) agent.delta_target = *spec.delta;
        auto env = cfg.make_environment(spec.seed);
        JsonlWriter log(run_dir / (spec.stem() + ".jsonl"));
        TrainHooks hooks;
        hooks.on_episode = [&](const RunRecord& r) {
            auto rec = r;
            rec.algo = spec.label;
            log.write(rec.to_json());
        };
        TrainResult res;
        try {
            res = train(*env, agent, spec.seed, hooks);
        } catch (const RunFault& f) {
            JsonlWriter timeline(run_dir / (spec.stem() + ".timeline.jsonl"));
            for (const auto& e : f.partial().timeline) timeline.write(e.to_json());
            throw;
        }
        JsonlWriter timeline(run_dir / (spec.stem() + ".timeline.jsonl"));
        for (const auto& e : res.timeline) timeline.write(e.to_json());
        out.ok = true;
        out.episodes = static_cast<std::int64_t>(res.records.size());
        out.total_steps = res.total_steps;
        out.violations = res.violations;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

struct ExperimentResult {
    fs::path directory;
    std::vector<RunOutcome> runs;

    std::size_t failures() const {
        std::size_t n = 0;
        for (const auto& r : runs) n += r.ok ? 0 : 1;
        return n;
    }
};

inline void write_manifest(const ExperimentConfig& cfg, const ExperimentResult& res) {
    OrderedJson m;
    m["schema"] = kLogSchemaVersion;
    m["code_version"] = SORL_CODE_VERSION;
    m["config"] = OrderedJson::parse(cfg.resolved().dump());
    m["runs"] = OrderedJson::array();
    for (const auto& r : res.runs) {
        OrderedJson j;
        j["label"] = r.spec.label;
        j["algo"] = algorithm_name(r.spec.algo);
        j["seed"] = r.spec.seed;
        j["delta"] = r.spec.delta ? OrderedJson(*r.spec.delta) : OrderedJson(nullptr);
        j["log"] = "runs/" + r.spec.stem() + ".jsonl";
        j["timeline"] = "runs/" + r.spec.stem() + ".timeline.jsonl";
        j["status"] = r.ok ? "ok" : "failed";
        if (!r.ok) j["error"] = r.error;
        j["episodes"] = r.episodes;
        j["total_steps"] = r.total_steps;
        j["violations"] = r.violations;
        m["runs"].push_back(j);
    }
    std::ofstream f(res.directory / "manifest.json", std::ios::binary);
    if (!f) throw InputError("cannot write manifest in " + res.directory.string());
    f << m.dump(2) << "\n";
}

/// Runs every planned pair (in parallel up to cfg.workers) and writes the manifest.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir / "runs");
    const auto plan = plan_runs(cfg);
    ExperimentResult res;
    res.directory = out_dir;
    res.runs.resize(plan.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < plan.size(); i = next++) res.runs[i] = execute_run(cfg, plan[i], out_dir / "runs");
    };
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), plan.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    write_manifest(cfg, res);
    return res;
}

}  // namespace sorl
