#pragma once

// Experiment configuration file (JSON).
//
// {
//   "name":    "slippery_grid",              optional label
//   "env":     {"name": "hazard_grid", ...}, environment and its keys
//   "algos":   ["sorl", "sac_c", "lagrangian"],
//   "seeds":   [0, 1, 2]  or  "num_seeds": 10 (seeds 0..n-1),
//   "deltas":  [-50, 300],                    SORL sweep (default: agent.delta_target)
//   "workers": 1,                             concurrent runs
//   "agent":   {...}                          AgentConfig keys, see parse_agent_config
// }

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sorl/agent.hpp"
#include "sorl/config_reader.hpp"
#include "sorl/envs.hpp"

namespace sorl {

namespace detail {

/// Numbers, or the strings "inf" / "-inf".
inline double parse_extended_number(const Json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(where + ": expected a number or \"inf\"");
}

}  // namespace detail

inline CriticConfig parse_critic_config(const Json& j) {
    ConfigReader in(j, "agent.critic");
    CriticConfig c;
    c.hidden = in.get("hidden", c.hidden);
    c.activation = in.get("activation", c.activation);
    c.init_scale = in.get("init_scale", c.init_scale);
    c.lr_actor = in.get("lr_actor", c.lr_actor);
    c.lr_critic = in.get("lr_critic", c.lr_critic);
    c.lr_safety = in.get("lr_safety", c.lr_safety);
    c.alpha = in.get("alpha", c.alpha);
    c.tau = in.get("tau", c.tau);
    c.log_std_min = in.get("log_std_min", c.log_std_min);
    c.log_std_max = in.get("log_std_max", c.log_std_max);
    in.finish();
    if (c.hidden.empty()) throw ConfigError("agent.critic.hidden must list at least one layer");
    for (int h : c.hidden)
        if (h < 1) throw ConfigError("agent.critic.hidden widths must be positive");
    if (c.activation != "tanh" && c.activation != "relu") throw ConfigError("agent.critic.activation must be tanh or relu");
    if (!(c.lr_actor > 0 && c.lr_critic > 0 && c.lr_safety > 0)) throw ConfigError("learning rates must be positive");
    if (!(c.log_std_min < c.log_std_max)) throw ConfigError("need log_std_min < log_std_max");
    return c;
}

/// Keys: algo, max_episodes, max_total_steps, t_max, batch_size, capacity,
/// safe_capacity, updates_per_step, warmup_steps, safe_mix, gamma, gamma_safe,
/// lambda_init, delta_target, h_star, epsilon_clamp, resolve_every,
/// lambda (fixes lambda), penalty_c (fixes C), clamp_shaping_factor,
/// cost_threshold (number or "inf"), multiplier_lr, multiplier_init,
/// deterministic_logs, critic {hidden, activation, init_scale, lr_actor,
/// lr_critic, lr_safety, alpha, tau, log_std_min, log_std_max}.
inline AgentConfig parse_agent_config(const Json& j) {
    try {
        ConfigReader in(j, "agent");
        AgentConfig c;
        if (in.has("algo")) c.algo = parse_algorithm(in.get<std::string>("algo", "sorl"));
        c.max_episodes = in.get("max_episodes", c.max_episodes);
        c.max_total_steps = in.get("max_total_steps", c.max_total_steps);
        c.t_max = in.get("t_max", c.t_max);
        c.batch_size = in.get("batch_size", c.batch_size);
        c.capacity = in.get("capacity", c.capacity);
        c.safe_capacity = in.get("safe_capacity", c.safe_capacity);
        c.updates_per_step = in.get("updates_per_step", c.updates_per_step);
        c.warmup_steps = in.get("warmup_steps", c.warmup_steps);
        c.safe_mix = in.get("safe_mix", c.safe_mix);
        c.gamma = in.get("gamma", c.gamma);
        c.gamma_safe = in.get("gamma_safe", c.gamma_safe);
        c.lambda_init = in.get("lambda_init", c.lambda_init);
        c.delta_target = in.get("delta_target", c.delta_target);
        c.h_star = in.get("h_star", c.h_star);
        c.epsilon_clamp = in.get("epsilon_clamp", c.epsilon_clamp);
        c.resolve_every = in.get("resolve_every", c.resolve_every);
        if (in.has("lambda")) c.fixed_lambda = in.get("lambda", 0.0);
        if (in.has("penalty_c")) c.fixed_penalty = in.get("penalty_c", 0.0);
        c.clamp_shaping_factor = in.get("clamp_shaping_factor", c.clamp_shaping_factor);
        if (in.has("cost_threshold")) c.cost_threshold = detail::parse_extended_number(in.raw("cost_threshold"), "agent.cost_threshold");
        c.multiplier_lr = in.get("multiplier_lr", c.multiplier_lr);
        c.multiplier_init = in.get("multiplier_init", c.multiplier_init);
        c.deterministic_logs = in.get("deterministic_logs", c.deterministic_logs);
        if (in.has("critic")) c.critic = parse_critic_config(in.raw("critic"));
        in.finish();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("agent: ") + e.what());
    }
}

struct ExperimentConfig {
    std::string name = "experiment";
    std::string env_name;
    Json env_config = Json::object();
    std::vector<Algorithm> algos{Algorithm::Sorl};
    std::vector<std::uint64_t> seeds{0};
    std::vector<double> deltas;  // empty: agent.delta_target
    int workers = 1;
    AgentConfig agent;
    Json raw = Json::object();  // the file as read

    /// Resolved configuration, for the manifest.
    Json resolved() const {
        Json j;
        j["name"] = name;
        j["env"] = env_config;
        j["env"]["name"] = env_name;
        j["algos"] = Json::array();
        for (auto a : algos) j["algos"].push_back(algorithm_name(a));
        j["seeds"] = seeds;
        j["deltas"] = deltas.empty() ? std::vector<double>{agent.delta_target} : deltas;
        j["workers"] = workers;
        j["agent"] = raw.contains("agent") ? raw["agent"] : Json::object();
        return j;
    }

    std::unique_ptr<Env> make_environment(std::uint64_t seed) const { return make_env(env_name, seed, env_config); }
};

inline ExperimentConfig parse_experiment_config(const Json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    try {
        ConfigReader in(j, "config");
        ExperimentConfig c;
        c.raw = j;
        c.name = in.get<std::string>("name", c.name);
        if (!in.has("env")) throw ConfigError("config: missing 'env' section");
        const Json& env = in.raw("env");
        if (!env.is_object() || !env.contains("name") || !env["name"].is_string())
            throw ConfigError("config.env: needs a string 'name'");
        c.env_name = env["name"].get<std::string>();
        c.env_config = env;
        c.env_config.erase("name");
        make_env(c.env_name, 0, c.env_config);  // validates the env keys
        if (in.has("algos")) {
            c.algos.clear();
            for (const auto& a : in.raw("algos")) c.algos.push_back(parse_algorithm(a.get<std::string>()));
            if (c.algos.empty()) throw ConfigError("config.algos must not be empty");
        }
        if (in.has("seeds") && in.has("num_seeds")) throw ConfigError("config: give either seeds or num_seeds");
        if (in.has("seeds")) c.seeds = in.raw("seeds").get<std::vector<std::uint64_t>>();
        if (in.has("num_seeds")) {
            const int n = in.get("num_seeds", 1);
            if (n < 1) throw ConfigError("config.num_seeds must be positive");
            c.seeds.clear();
            for (int i = 0; i < n; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
        }
        if (c.seeds.empty()) throw ConfigError("config.seeds must not be empty");
        if (in.has("deltas")) c.deltas = in.raw("deltas").get<std::vector<double>>();
        c.workers = in.get("workers", c.workers);
        if (c.workers < 1) throw ConfigError("config.workers must be positive");
        c.agent = parse_agent_config(in.raw("agent"));
        in.finish();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

}  // namespace sorl
