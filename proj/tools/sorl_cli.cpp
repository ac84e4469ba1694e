// Command-line front end.
//
//   sorl run       --config PATH [--out DIR] [--seed N] [--algo NAME] [--delta X]
//   sorl tune      --config PATH [--delta X]
//   sorl verify    --config PATH | --env NAME [--delta X]
//   sorl summarize --out DIR
//
// Exit codes: 0 success, 1 configuration or input error, 2 some runs failed,
// 3 verification failed.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sorl/sorl.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;
constexpr int kVerificationFailure = 3;

struct Options {
    std::string config;
    std::string out = "runs_out";
    std::optional<std::uint64_t> seed;
    std::string algo;
    std::optional<double> delta;
    std::string env;
};

sorl::ExperimentConfig load_with_overrides(const Options& o) {
    auto cfg = sorl::load_experiment_config(o.config);
    if (o.seed) cfg.seeds = {*o.seed};
    if (!o.algo.empty()) cfg.algos = {sorl::parse_algorithm(o.algo)};
    if (o.delta) {
        cfg.deltas = {*o.delta};
        cfg.agent.delta_target = *o.delta;
    }
    return cfg;
}

int cmd_run(const Options& o) {
    const auto cfg = load_with_overrides(o);
    const auto res = sorl::run_experiment(cfg, o.out);
    for (const auto& r : res.runs) {
        std::cout << r.spec.stem() << ": " << (r.ok ? "ok" : "FAILED") << " episodes=" << r.episodes
                  << " steps=" << r.total_steps << " violations=" << r.violations;
        if (!r.ok) std::cout << " error=" << r.error;
        std::cout << "\n";
    }
    std::cout << "manifest: " << (res.directory / "manifest.json").string() << "\n";
    return res.failures() > 0 ? kPartialFailure : kOk;
}

int cmd_tune(const Options& o) {
    const auto cfg = load_with_overrides(o);
    auto env = cfg.make_environment(0);
    const auto& a = cfg.agent;
    sorl::RewardRangeTracker range(env->reward_lower(), env->reward_upper(), a.epsilon_clamp);
    const int h = a.h_star > 0 ? a.h_star : env->h_star();
    sorl::ConditionInputs in{a.gamma, a.gamma_safe, h, range.r_min(), range.r_max(), 0.0, a.lambda_init};
    in.penalty_c = a.fixed_penalty ? *a.fixed_penalty : sorl::admissible_penalty(in.r_min, in.r_max, in.gamma, h);
    const auto sol = sorl::solve_lambda(a.delta_target, in, a.lambda_init);
    const auto at = in.with_lambda(sol.lambda);
    const auto closed = sorl::worst_trajectory_length_closed_form(at);
    nlohmann::ordered_json j;
    j["env"] = env->name();
    j["gamma"] = in.gamma;
    j["gamma_safe"] = in.gamma_safe;
    j["h_star"] = h;
    j["r_min"] = in.r_min;
    j["r_max"] = in.r_max;
    j["penalty_bound"] = sorl::penalty_lower_bound(in.r_min, in.r_max, in.gamma, h);
    j["penalty_c"] = in.penalty_c;
    j["delta_target"] = a.delta_target;
    j["lambda"] = sol.lambda;
    j["delta_achieved"] = sol.achieved_delta;
    j["attainable"] = sol.attainable;
    j["worst_length"] = sorl::worst_trajectory_length(at);
    j["worst_length_closed_form"] = closed.length;
    j["unsafe_return_bound"] = sorl::unsafe_return_bound(sorl::worst_trajectory_length(at), at);
    j["safe_return_lower_bound"] = sorl::safe_return_lower_bound(at);
    std::cout << j.dump(2) << "\n";
    return kOk;
}

int cmd_verify(const Options& o) {
    std::unique_ptr<sorl::Env> env;
    sorl::AgentConfig agent;
    if (!o.config.empty()) {
        const auto cfg = load_with_overrides(o);
        env = cfg.make_environment(0);
        agent = cfg.agent;
    } else if (!o.env.empty()) {
        sorl::Json env_cfg = sorl::Json::object();
        std::string name = o.env;
        if (name == "slippery_grid") {
            name = "hazard_grid";
            env_cfg["layout"] = "slippery";
        } else if (name == "point_velocity") {
            env_cfg["grid_size"] = 21;  // verification needs the finite lattice
        }
        env = sorl::make_env(name, 0, env_cfg);
        if (o.delta) agent.delta_target = *o.delta;
    } else {
        throw sorl::ConfigError("verify needs --config or --env");
    }
    auto mdp = sorl::enumerate_tabular(*env);
    if (agent.h_star > 0) mdp.h_star = agent.h_star;  // the horizon training would use
    const auto labels = sorl::label_irrecoverable(mdp);
    sorl::SafetyParams base;
    base.gamma = agent.gamma;
    base.gamma_safe = agent.gamma_safe;
    const auto tuned = sorl::tune_for_table(mdp, base, agent.delta_target, agent.lambda_init);
    const auto bound = labels.horizon_respected ? std::optional(sorl::check_doomed_bound(mdp, agent.gamma_safe)) : std::nullopt;
    const auto ordering = sorl::check_safe_ordering(mdp, tuned.params);

    nlohmann::ordered_json j;
    j["env"] = env->name();
    j["states"] = mdp.num_states;
    j["actions"] = mdp.num_actions;
    j["h_star"] = mdp.h_star;
    j["labels"] = {{"safe", labels.count(sorl::StateLabel::Safe)},
                   {"irrecoverable", labels.count(sorl::StateLabel::Irrecoverable)},
                   {"unsafe", labels.count(sorl::StateLabel::Unsafe)}};
    j["horizon"] = {{"respected", labels.horizon_respected}, {"max_steps_to_violation", labels.max_steps_to_violation}};
    if (bound) {
        j["doomed_bound"] = {{"passed", bound->passed},
                       {"trajectories", bound->trajectories},
                       {"checks", bound->checks},
                       {"min_slack", bound->trajectories ? bound->min_slack : 0.0},
                       {"tight_trajectories", bound->tight_trajectories}};
    } else {
        j["doomed_bound"] = {{"passed", false}, {"reason", "declared horizon violated"}};
    }
    j["safe_ordering"] = {{"passed", ordering.passed},
                     {"lambda", tuned.params.lambda},
                     {"penalty_c", tuned.params.penalty_c},
                     {"delta_target", agent.delta_target},
                     {"delta_achieved", tuned.solution.achieved_delta},
                     {"attainable", tuned.solution.attainable},
                     {"states_compared", ordering.states_compared},
                     {"comparisons", ordering.comparisons},
                     {"skipped_states", ordering.skipped_states},
                     {"tightest_margin", ordering.comparisons ? ordering.tightest_margin : 0.0},
                     {"converged", ordering.converged}};
    if (ordering.witness)
        j["safe_ordering"]["witness"] = {{"state", ordering.witness->state},
                                    {"safe_action", ordering.witness->safe_action},
                                    {"doomed_action", ordering.witness->doomed_action}};
    std::cout << j.dump(2) << "\n";
    const bool ok = labels.horizon_respected && bound && bound->passed && ordering.passed;
    return ok ? kOk : kVerificationFailure;
}

int cmd_summarize(const Options& o) {
    const auto files = sorl::summarize_directory(o.out);
    std::cout << "label,mean_return,mean_failure_rate,normalized_return,normalized_failure,dominated\n";
    for (const auto& p : files.pareto.points)
        std::cout << p.label << ',' << p.mean_return << ',' << p.mean_failure_rate << ',' << p.normalized_return << ','
                  << p.normalized_failure << ',' << (p.dominated ? 1 : 0) << "\n";
    std::cout << "penalty audit: " << (files.audit.passed() ? "ok" : "FAILED") << " (" << files.audit.runs_audited
              << " runs, " << files.audit.states_checked << " states)\n";
    for (const auto& m : files.audit.messages) std::cout << "  " << m << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safety-optimized reinforcement learning experiments"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)");
        sub->add_option("--seed", o.seed, "run a single seed");
        sub->add_option("--algo", o.algo, "sorl | sac_c | lagrangian");
        sub->add_option("--delta", o.delta, "target Delta for SORL");
    };
    auto* run = app.add_subcommand("run", "train every (algo, seed) pair and write logs");
    add_common(run);
    run->add_option("--out", o.out, "output directory");
    auto* tune = app.add_subcommand("tune", "print C and lambda for a config");
    add_common(tune);
    auto* verify = app.add_subcommand("verify", "exact checks of the safety guarantees on a finite environment");
    add_common(verify);
    verify->add_option("--env", o.env, "hazard_grid | slippery_grid | doom_corridor | point_velocity");
    auto* summarize = app.add_subcommand("summarize", "write summary.csv, pareto.csv and curves for a run directory");
    summarize->add_option("--out", o.out, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }
    try {
        if (run->parsed() || tune->parsed()) {
            if (o.config.empty()) throw sorl::ConfigError("--config is required");
            return run->parsed() ? cmd_run(o) : cmd_tune(o);
        }
        if (verify->parsed()) return cmd_verify(o);
        return cmd_summarize(o);
    } catch (const sorl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const sorl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}
