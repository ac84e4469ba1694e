#pragma once

// Off-policy training loop shared by SORL and the two baselines:
//
//   sorl        shaped reward with the safety critic, adaptive C and lambda,
//               violation transitions duplicated into D_safe;
//   sac_c       reward r, or -C on a violation; no safety critic;
//   lagrangian  reward r - mu c with a projected dual ascent on mu.
//
// All three share the backbone, buffers and random streams, so SORL with
// lambda = 0 and C = 0 replays SAC+C with C = 0 step for step on
// nonnegative-reward environments.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sorl/critics.hpp"
#include "sorl/mdp.hpp"
#include "sorl/records.hpp"
#include "sorl/replay.hpp"
#include "sorl/shaping.hpp"
#include "sorl/tuning.hpp"

namespace sorl {

enum class Algorithm { Sorl, SacC, Lagrangian };

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "sorl") return Algorithm::Sorl;
    if (name == "sac_c") return Algorithm::SacC;
    if (name == "lagrangian") return Algorithm::Lagrangian;
    throw ConfigError("unknown algorithm '" + name + "' (expected sorl, sac_c or lagrangian)");
}

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Sorl: return "sorl";
        case Algorithm::SacC: return "sac_c";
        case Algorithm::Lagrangian: return "lagrangian";
    }
    return "?";
}

struct AgentConfig {
    Algorithm algo = Algorithm::Sorl;
    std::int64_t max_episodes = 1'000'000;
    std::int64_t max_total_steps = 20'000;
    int t_max = 0;  // per-episode step cap; 0 uses the environment's
    int batch_size = 64;
    std::size_t capacity = 100'000;
    std::size_t safe_capacity = 20'000;
    int updates_per_step = 1;
    std::int64_t warmup_steps = 1000;
    double safe_mix = 0.25;  // fraction of a safety batch drawn from D_safe
    double gamma = 0.99;
    double gamma_safe = 0.85;
    double lambda_init = 1.0;
    double delta_target = 50.0;
    int h_star = 0;  // 0 uses the environment's
    double epsilon_clamp = 0.01;
    std::int64_t resolve_every = 1000;
    std::optional<double> fixed_lambda;
    std::optional<double> fixed_penalty;
    bool clamp_shaping_factor = false;
    // Lagrangian relaxation
    double cost_threshold = 0.0;  // limit on the discounted episode cost
    double multiplier_lr = 1e-3;
    double multiplier_init = 0.0;
    CriticConfig critic;
    /// Write 0 instead of elapsed seconds so reruns produce identical logs.
    bool deterministic_logs = true;

    void validate() const {
        if (max_episodes < 1 || max_total_steps < 1) throw ConfigError("episode and step budgets must be positive");
        if (t_max < 0) throw ConfigError("t_max must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be positive");
        if (capacity < 1 || safe_capacity < 1) throw ConfigError("buffer capacities must be positive");
        if (updates_per_step < 1) throw ConfigError("updates_per_step must be positive");
        if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
        if (!(safe_mix >= 0.0 && safe_mix <= 1.0)) throw ConfigError("safe_mix must lie in [0,1]");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
        if (!(gamma_safe > 0.0 && gamma_safe < 1.0)) throw ConfigError("gamma_safe must lie in (0,1)");
        if (!(lambda_init > 0.0)) throw ConfigError("lambda_init must be positive");
        if (!std::isfinite(delta_target)) throw ConfigError("delta_target must be finite");
        if (h_star < 0) throw ConfigError("h_star must be >= 0");
        if (!(epsilon_clamp > 0.0)) throw ConfigError("epsilon_clamp must be positive");
        if (resolve_every < 1) throw ConfigError("resolve_every must be positive");
        if (fixed_lambda && !(*fixed_lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
        if (fixed_penalty && !(*fixed_penalty >= 0.0)) throw ConfigError("penalty_c must be >= 0");
        if (std::isnan(cost_threshold)) throw ConfigError("cost_threshold must not be NaN");
        if (!(multiplier_lr >= 0.0) || !(multiplier_init >= 0.0)) throw ConfigError("multiplier settings must be >= 0");
        if (!(critic.tau > 0.0 && critic.tau <= 1.0)) throw ConfigError("tau must lie in (0,1]");
        if (!(critic.alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    }
};

/// Independent random streams, so that e.g. safety-critic updates never
/// perturb the reward-side sampling.
struct RandomStreams {
    std::mt19937_64 init, action, reward_update, safety_update;

    explicit RandomStreams(std::uint64_t seed) {
        auto make = [seed](std::uint64_t stream) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(stream)};
            return std::mt19937_64(seq);
        };
        init = make(1);
        action = make(2);
        reward_update = make(3);
        safety_update = make(4);
    }
};

/// Callbacks during training: every environment step, every finished episode.
struct TrainHooks {
    std::function<void(std::int64_t step, const Transition&)> on_step;
    std::function<void(const RunRecord&)> on_episode;
};

struct TrainResult {
    ApproximatorBundle bundle;
    std::vector<RunRecord> records;
    std::vector<TimelineEntry> timeline;
    std::int64_t total_steps = 0;
    std::int64_t violations = 0;
    std::size_t safe_buffer_size = 0;
};

/// Wraps a training fault with the run context in which it happened.
class RunFault : public TrainingFault {
public:
    RunFault(const TrainingFault& inner, const std::string& context, TrainResult partial)
        : TrainingFault(context + ": " + inner.what(), inner.snapshot()), partial_(std::move(partial)) {}
    const TrainResult& partial() const noexcept { return partial_; }

private:
    TrainResult partial_;
};

class Trainer {
public:
    Trainer(Env& env, AgentConfig cfg, std::uint64_t seed)
        : env_(env),
          cfg_(std::move(cfg)),
          seed_(seed),
          rng_(seed),
          space_(env.action_space()),
          h_star_(cfg_.h_star > 0 ? cfg_.h_star : env.h_star()),
          range_(cfg_.epsilon_clamp),
          d_(cfg_.capacity),
          d_safe_(cfg_.safe_capacity) {
        cfg_.validate();
        if (h_star_ < 1) throw ConfigError("h_star must be >= 1");
        result_.bundle = ApproximatorBundle(env.state_dim(), space_, cfg_.critic, rng_.init());
        multiplier_ = cfg_.multiplier_init;
        params_.gamma = cfg_.gamma;
        params_.gamma_safe = cfg_.gamma_safe;
        params_.horizon_h_star = h_star_;
        params_.delta_target = cfg_.delta_target;
        params_.clamp_shaping_factor = cfg_.clamp_shaping_factor;
    }

    void set_hooks(TrainHooks hooks) { hooks_ = std::move(hooks); }

    const SafetyParams& params() const noexcept { return params_; }

    TrainResult run() {
        const auto start = std::chrono::steady_clock::now();
        retune("init");
        std::int64_t& episode = episode_;
        while (episode < cfg_.max_episodes && steps_ < cfg_.max_total_steps) {
            State s = env_.reset();
            std::vector<double> rewards;
            double cost_discounted = 0.0, discount = 1.0;
            bool violated = false, finished = false;
            const int cap = cfg_.t_max > 0 ? cfg_.t_max : env_.episode_cap();
            for (int t = 0; t < cap && steps_ < cfg_.max_total_steps; ++t) {
                Transition tr = act_and_step(s, t + 1 == cap);
                rewards.push_back(tr.reward_raw);
                cost_discounted += discount * tr.safety_signal;
                discount *= cfg_.gamma;
                violated = tr.safety_signal == 1;
                finished = tr.done;
                s = tr.next_state;
                ++steps_;
                if (hooks_.on_step) hooks_.on_step(steps_, tr);
                if (steps_ > 1 && (steps_ - 1) % cfg_.resolve_every == 0) retune("periodic");
                store(std::move(tr));
                learn();
                if (finished) break;
            }
            if (!finished && steps_ >= cfg_.max_total_steps) break;  // budget hit mid-episode
            if (violated) ++result_.violations;
            if (cfg_.algo == Algorithm::Lagrangian)
                multiplier_ = std::max(0.0, multiplier_ + cfg_.multiplier_lr * (cost_discounted - cfg_.cost_threshold));
            if (!std::isfinite(multiplier_)) throw TrainingFault("non-finite Lagrange multiplier", "mu=nan");
            RunRecord rec;
            rec.episode = episode;
            rec.episode_return = 0.0;
            for (double r : rewards) rec.episode_return += r;
            rec.discounted_return = discounted_return(rewards, cfg_.gamma);
            rec.violations_cumulative = result_.violations;
            rec.episode_violation = violated ? 1 : 0;
            rec.failure_rate_cumulative = static_cast<double>(result_.violations) / static_cast<double>(episode + 1);
            rec.length = static_cast<std::int64_t>(rewards.size());
            rec.total_steps = steps_;
            fill_tuning_fields(rec);
            rec.multiplier = multiplier_;
            rec.wall_clock = cfg_.deterministic_logs
                                 ? 0.0
                                 : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            rec.seed = seed_;
            rec.algo = algorithm_name(cfg_.algo);
            result_.records.push_back(rec);
            if (hooks_.on_episode) hooks_.on_episode(rec);
            ++episode;
        }
        result_.total_steps = steps_;
        result_.safe_buffer_size = d_safe_.size();
        return std::move(result_);
    }

    /// Training loop with faults re-raised together with the partial result.
    TrainResult run_or_fault() {
        try {
            return run();
        } catch (const TrainingFault& f) {
            result_.total_steps = steps_;
            throw RunFault(f, algorithm_name(cfg_.algo) + " seed " + std::to_string(seed_) + " step " +
                                  std::to_string(steps_),
                           std::move(result_));
        }
    }

private:
    bool uses_penalty() const { return cfg_.algo != Algorithm::Lagrangian; }

    /// Recomputes C from the current reward range and solves lambda.
    void retune(const std::string& reason) {
        const std::int64_t episode = episode_;
        if (!uses_penalty()) {
            if (reason == "init") push_timeline(reason, episode, false);
            return;
        }
        params_.r_min_emp = range_.r_min();
        params_.r_max_emp = range_.r_max();
        params_.penalty_c = cfg_.fixed_penalty ? *cfg_.fixed_penalty
                                               : admissible_penalty(range_.r_min(), range_.r_max(), cfg_.gamma, h_star_);
        const ConditionInputs in{cfg_.gamma, cfg_.gamma_safe, h_star_, range_.r_min(), range_.r_max(),
                                 params_.penalty_c, cfg_.lambda_init};
        if (cfg_.algo == Algorithm::SacC) {
            params_.lambda = 0.0;
            delta_ = delta_margin(in.with_lambda(0.0));
            attainable_ = true;
        } else if (cfg_.fixed_lambda) {
            params_.lambda = *cfg_.fixed_lambda;
            delta_ = delta_margin(in.with_lambda(params_.lambda));
            attainable_ = true;
        } else {
            const LambdaSolution sol = solve_lambda(cfg_.delta_target, in, cfg_.lambda_init);
            params_.lambda = sol.lambda;
            delta_ = sol.achieved_delta;
            attainable_ = sol.attainable;
        }
        push_timeline(reason, episode, cfg_.fixed_penalty.has_value() || cfg_.fixed_lambda.has_value());
    }

    void push_timeline(const std::string& reason, std::int64_t episode, bool overridden) {
        TimelineEntry e;
        e.step = steps_;
        e.episode = episode;
        e.reason = reason;
        e.lambda = uses_penalty() ? params_.lambda : 0.0;
        e.penalty_c = uses_penalty() ? params_.penalty_c : 0.0;
        e.r_min_emp = range_.r_min();
        e.r_max_emp = range_.r_max();
        e.gamma = cfg_.gamma;
        e.h_star = h_star_;
        if (uses_penalty()) e.delta_achieved = delta_;
        e.delta_attainable = attainable_;
        e.overridden = overridden;
        result_.timeline.push_back(e);
    }

    void fill_tuning_fields(RunRecord& rec) const {
        rec.r_min_emp = range_.r_min();
        rec.r_max_emp = range_.r_max();
        if (uses_penalty()) {
            rec.lambda = params_.lambda;
            rec.penalty_c = params_.penalty_c;
            rec.delta_achieved = delta_;
            rec.delta_attainable = attainable_;
        }
    }

    Transition act_and_step(const State& s, bool last_allowed_step) {
        ApproximatorBundle& b = result_.bundle;
        const Action a = steps_ < cfg_.warmup_steps ? b.random_action(rng_.action) : b.sample_action(s, rng_.action);
        const double c_hat = cfg_.algo == Algorithm::Sorl ? b.safety_estimate(s, a) : 0.0;
        const StepResult sr = env_.step(a);
        if (!std::isfinite(sr.reward)) throw TrainingFault("environment returned a non-finite reward", env_.name());
        if (range_.observe(sr.reward)) retune("range");
        Transition tr;
        tr.state = s;
        tr.action = a;
        tr.reward_raw = sr.reward;
        tr.safety_signal = sr.safety_signal;
        tr.next_state = sr.next_state;
        tr.done = sr.done || sr.safety_signal == 1 || last_allowed_step;
        tr.truncated = sr.safety_signal == 0 && (sr.truncated || (last_allowed_step && !sr.done));
        switch (cfg_.algo) {
            case Algorithm::Sorl:
                tr.reward_shaped = shape_reward(sr.reward, c_hat, params_, sr.safety_signal == 1);
                break;
            case Algorithm::SacC:
                tr.reward_shaped = sr.safety_signal == 1 ? -params_.penalty_c : sr.reward;
                break;
            case Algorithm::Lagrangian:
                tr.reward_shaped = sr.reward;  // mu is applied when sampled
                break;
        }
        return tr;
    }

    void store(Transition tr) {
        if (cfg_.algo == Algorithm::Sorl && tr.safety_signal == 1) d_safe_.push(tr);
        d_.push(std::move(tr));
    }

    void learn() {
        if (steps_ <= cfg_.warmup_steps || d_.size() < static_cast<std::size_t>(cfg_.batch_size)) return;
        const auto n = static_cast<std::size_t>(cfg_.batch_size);
        const RewardTargetOptions opt{cfg_.gamma, cfg_.algo != Algorithm::Lagrangian};
        for (int u = 0; u < cfg_.updates_per_step; ++u) {
            picks_.clear();
            d_.sample(n, rng_.reward_update, picks_);
            Batch reward_batch = cfg_.algo == Algorithm::Lagrangian
                                     ? make_batch(picks_, space_,
                                                  [mu = multiplier_](const Transition& t) {
                                                      return t.reward_raw - mu * t.safety_signal;
                                                  })
                                     : make_batch(picks_, space_);
            std::optional<Batch> safety_batch;
            if (cfg_.algo == Algorithm::Sorl) {
                picks_.clear();
                const std::size_t from_safe =
                    d_safe_.empty() ? 0 : static_cast<std::size_t>(std::lround(cfg_.safe_mix * static_cast<double>(n)));
                if (from_safe > 0) d_safe_.sample(from_safe, rng_.safety_update, picks_);
                if (n > from_safe) d_.sample(n - from_safe, rng_.safety_update, picks_);
                safety_batch = make_batch(picks_, space_);
            }
            update_critics(result_.bundle, reward_batch, safety_batch ? &*safety_batch : nullptr, opt,
                           cfg_.gamma_safe, rng_.reward_update, rng_.safety_update);
        }
    }

    Env& env_;
    AgentConfig cfg_;
    std::uint64_t seed_;
    RandomStreams rng_;
    ActionSpace space_;
    int h_star_;
    RewardRangeTracker range_;
    ReplayBuffer d_;
    ReplayBuffer d_safe_;
    SafetyParams params_;
    double delta_ = 0.0;
    bool attainable_ = true;
    double multiplier_ = 0.0;
    std::int64_t steps_ = 0;
    std::int64_t episode_ = 0;
    TrainResult result_;
    TrainHooks hooks_;
    std::vector<const Transition*> picks_;
};

/// Runs the configured algorithm on env.
inline TrainResult train(Env& env, const AgentConfig& cfg, std::uint64_t seed, TrainHooks hooks = {}) {
    Trainer t(env, cfg, seed);
    t.set_hooks(std::move(hooks));
    return t.run_or_fault();
}

struct Evaluation {
    double mean_return = 0.0;
    double violation_rate = 0.0;
    double mean_length = 0.0;
};

/// Greedy rollouts of any state -> action policy, without learning.
template <typename Policy>
Evaluation evaluate_policy(Env& env, Policy&& policy, int episodes, int t_max = 0) {
    if (episodes < 1) throw InputError("evaluate: episodes must be positive");
    Evaluation ev;
    const int cap = t_max > 0 ? t_max : env.episode_cap();
    for (int e = 0; e < episodes; ++e) {
        State s = env.reset();
        double ret = 0.0;
        int len = 0;
        bool violated = false;
        for (int t = 0; t < cap; ++t) {
            const StepResult r = env.step(policy(s));
            ret += r.reward;
            ++len;
            s = r.next_state;
            if (r.safety_signal == 1) violated = true;
            if (r.done || r.truncated || r.safety_signal == 1) break;
        }
        ev.mean_return += ret;
        ev.mean_length += len;
        ev.violation_rate += violated ? 1.0 : 0.0;
    }
    ev.mean_return /= episodes;
    ev.mean_length /= episodes;
    ev.violation_rate /= episodes;
    return ev;
}

/// Mode-of-actor rollouts. Stochastic starts come from the environment's own
/// random stream, so the caller controls them through the environment seed.
inline Evaluation evaluate(const ApproximatorBundle& bundle, Env& env, int episodes, int t_max = 0) {
    return evaluate_policy(env, [&](const State& s) { return bundle.greedy_action(s); }, episodes, t_max);
}

}  // namespace sorl
