#include <gtest/gtest.h>

#include <cstring>

#include "sorl/baselines.hpp"
#include "sorl/envs.hpp"

using namespace sorl;

namespace {

AgentConfig small_agent(Algorithm algo, std::int64_t steps = 1500) {
    AgentConfig c;
    c.algo = algo;
    c.max_total_steps = steps;
    c.warmup_steps = 200;
    c.batch_size = 16;
    c.critic.hidden = {16, 16};
    return c;
}

std::unique_ptr<Env> corridor(int length = 3) { return make_env("doom_corridor", 0, Json{{"length", length}}); }

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// Delegates to another environment but poisons the reward after `bad_after` steps.
class PoisonedEnv final : public Env {
public:
    PoisonedEnv(std::unique_ptr<Env> inner, int bad_after) : inner_(std::move(inner)), bad_after_(bad_after) {}
    std::string name() const override { return "poisoned"; }
    State reset() override { return inner_->reset(); }
    StepResult step(const Action& a) override {
        auto r = inner_->step(a);
        if (++steps_ > bad_after_) r.reward = std::nan("");
        return r;
    }
    int safety_signal(std::span<const double> s) const override { return inner_->safety_signal(s); }
    std::size_t state_dim() const override { return inner_->state_dim(); }
    ActionSpace action_space() const override { return inner_->action_space(); }
    int h_star() const override { return inner_->h_star(); }
    int episode_cap() const override { return inner_->episode_cap(); }
    double reward_lower() const override { return inner_->reward_lower(); }
    double reward_upper() const override { return inner_->reward_upper(); }
    std::unique_ptr<Env> clone() const override { return std::make_unique<PoisonedEnv>(inner_->clone(), bad_after_); }

private:
    std::unique_ptr<Env> inner_;
    int bad_after_;
    int steps_ = 0;
};

}  // namespace

TEST(AgentConfig, ValidationRejectsBadValues) {
    auto bad = [](auto mutate) {
        AgentConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), ConfigError);
    };
    bad([](AgentConfig& c) { c.batch_size = 0; });
    bad([](AgentConfig& c) { c.gamma = 1.0; });
    bad([](AgentConfig& c) { c.gamma_safe = 0.0; });
    bad([](AgentConfig& c) { c.safe_mix = 1.5; });
    bad([](AgentConfig& c) { c.fixed_lambda = -1.0; });
    bad([](AgentConfig& c) { c.cost_threshold = std::nan(""); });
    bad([](AgentConfig& c) { c.critic.tau = 0.0; });
    EXPECT_THROW(parse_algorithm("ppo"), ConfigError);
    for (auto a : {Algorithm::Sorl, Algorithm::SacC, Algorithm::Lagrangian})
        EXPECT_EQ(parse_algorithm(algorithm_name(a)), a);
}

TEST(RandomStreams, AreDistinctAndSeeded) {
    RandomStreams a(5), b(5), c(6);
    EXPECT_EQ(a.action(), b.action());
    EXPECT_NE(a.init(), a.action());
    EXPECT_NE(RandomStreams(5).init(), c.init());
}

TEST(ReplayBuffer, RingOrderAndSampling) {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
        Transition t;
        t.reward_raw = i;
        buf.push(t);
    }
    EXPECT_EQ(buf.size(), 3u);
    EXPECT_EQ(buf.pushed(), 5u);
    EXPECT_EQ(buf.at(0).reward_raw, 2.0);
    EXPECT_EQ(buf.at(2).reward_raw, 4.0);
    std::mt19937_64 rng(0);
    std::vector<const Transition*> out;
    buf.sample(100, rng, out);
    EXPECT_EQ(out.size(), 100u);
    for (auto* t : out) EXPECT_GE(t->reward_raw, 2.0);
    EXPECT_THROW(ReplayBuffer(0), InputError);
    ReplayBuffer empty(2);
    EXPECT_THROW(empty.sample(1, rng, out), InputError);
}

TEST(Trainer, ViolationsRouteIntoSafeBufferForSorlOnly) {
    auto env = corridor();
    const auto sorl = train(*env, small_agent(Algorithm::Sorl, 800), 1);
    EXPECT_GT(sorl.violations, 0);
    EXPECT_EQ(static_cast<std::int64_t>(sorl.safe_buffer_size), sorl.violations);
    const auto sac = train(*env, small_agent(Algorithm::SacC, 800), 1);
    EXPECT_EQ(sac.safe_buffer_size, 0u);
}

TEST(Trainer, RecordsAreConsistent) {
    auto env = corridor();
    const auto res = train(*env, small_agent(Algorithm::Sorl), 2);
    ASSERT_FALSE(res.records.empty());
    std::int64_t prev = 0, steps = 0;
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const auto& r = res.records[i];
        EXPECT_EQ(r.episode, static_cast<std::int64_t>(i));
        EXPECT_GE(r.violations_cumulative, prev);
        EXPECT_EQ(r.violations_cumulative - prev, r.episode_violation);
        prev = r.violations_cumulative;
        steps += r.length;
        EXPECT_EQ(r.total_steps, steps);
        EXPECT_EQ(r.algo, "sorl");
        EXPECT_EQ(r.wall_clock, 0.0);
    }
    EXPECT_LE(res.total_steps, 1500);
    EXPECT_EQ(res.violations, res.records.back().violations_cumulative);
}

TEST(Trainer, SameSeedSameRecords) {
    for (auto algo : {Algorithm::Sorl, Algorithm::SacC, Algorithm::Lagrangian}) {
        auto e1 = corridor(), e2 = corridor();
        const auto a = train(*e1, small_agent(algo, 600), 3);
        const auto b = train(*e2, small_agent(algo, 600), 3);
        ASSERT_EQ(a.records.size(), b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i)
            EXPECT_EQ(a.records[i].to_json().dump(), b.records[i].to_json().dump());
        EXPECT_EQ(a.bundle.actor.params(), b.bundle.actor.params());
    }
    auto e1 = corridor(), e2 = corridor();
    const auto a = train(*e1, small_agent(Algorithm::Sorl, 600), 3);
    const auto b = train(*e2, small_agent(Algorithm::Sorl, 600), 4);
    EXPECT_NE(a.bundle.actor.params(), b.bundle.actor.params());
}

// With lambda = 0 and C = 0 the shaped reward equals r on nonnegative
// rewards, so SORL and SAC+C must take exactly the same steps.
TEST(Trainer, ZeroShapingReducesSorlToSacC) {
    auto cfg = small_agent(Algorithm::Sorl, 1000);
    cfg.fixed_lambda = 0.0;
    cfg.fixed_penalty = 0.0;
    auto sac_cfg = small_agent(Algorithm::SacC, 1000);
    sac_cfg.fixed_penalty = 0.0;
    std::vector<Transition> a, b;
    auto e1 = corridor(), e2 = corridor();
    train(*e1, cfg, 9, {[&](std::int64_t, const Transition& t) { a.push_back(t); }, {}});
    train(*e2, sac_cfg, 9, {[&](std::int64_t, const Transition& t) { b.push_back(t); }, {}});
    ASSERT_EQ(a.size(), 1000u);
    ASSERT_EQ(b.size(), 1000u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].state, b[i].state) << "step " << i;
        ASSERT_EQ(a[i].action, b[i].action) << "step " << i;
        ASSERT_TRUE(same_bits(a[i].reward_shaped, b[i].reward_shaped)) << "step " << i;
        ASSERT_EQ(a[i].safety_signal, b[i].safety_signal);
    }
}

TEST(Trainer, PenaltyStaysAdmissibleThroughout) {
    auto env = make_env("hazard_grid", 0, Json{{"layout", "slippery"}});
    auto cfg = small_agent(Algorithm::Sorl, 3000);
    cfg.resolve_every = 500;
    const auto res = train(*env, cfg, 5);
    ASSERT_FALSE(res.timeline.empty());
    EXPECT_EQ(res.timeline.front().reason, "init");
    double prev_c = 0.0;
    int periodic = 0;
    for (const auto& e : res.timeline) {
        EXPECT_GT(e.penalty_c, penalty_lower_bound(e.r_min_emp, e.r_max_emp, e.gamma, e.h_star));
        EXPECT_GE(e.lambda, 0.0);
        EXPECT_GE(e.penalty_c, prev_c);
        prev_c = e.penalty_c;
        periodic += e.reason == "periodic";
    }
    EXPECT_EQ(periodic, 5);
    for (const auto& r : res.records)
        EXPECT_GT(r.penalty_c, penalty_lower_bound(r.r_min_emp, r.r_max_emp, 0.99, env->h_star()));
}

TEST(Trainer, SacCKeepsLambdaZero) {
    auto env = corridor();
    const auto res = train(*env, small_agent(Algorithm::SacC, 500), 1);
    for (const auto& e : res.timeline) EXPECT_EQ(e.lambda, 0.0);
    for (const auto& r : res.records) EXPECT_EQ(r.lambda, 0.0);
}

TEST(Trainer, LagrangeMultiplierIsProjected) {
    auto env = corridor();
    auto cfg = small_agent(Algorithm::Lagrangian, 1000);
    cfg.multiplier_lr = 0.05;
    const auto res = train(*env, cfg, 1);
    double max_mu = 0.0;
    for (const auto& r : res.records) {
        EXPECT_GE(r.multiplier, 0.0);
        max_mu = std::max(max_mu, r.multiplier);
    }
    EXPECT_GT(max_mu, 0.0);
    cfg.cost_threshold = std::numeric_limits<double>::infinity();
    const auto relaxed = train(*env, cfg, 1);
    for (const auto& r : relaxed.records) EXPECT_EQ(r.multiplier, 0.0);
}

TEST(Trainer, BaselineWrappersSetTheAlgorithm) {
    auto env = corridor();
    EXPECT_EQ(train_sac_c(*env, small_agent(Algorithm::Sorl, 100), 0).records.front().algo, "sac_c");
    EXPECT_EQ(train_lagrangian(*env, small_agent(Algorithm::Sorl, 100), 0).records.front().algo, "lagrangian");
    EXPECT_EQ(train_sorl(*env, small_agent(Algorithm::SacC, 100), 0).records.front().algo, "sorl");
}

TEST(Trainer, FaultCarriesPartialResult) {
    PoisonedEnv env(corridor(), 50);
    try {
        train(env, small_agent(Algorithm::Sorl, 500), 0);
        FAIL() << "expected RunFault";
    } catch (const RunFault& f) {
        EXPECT_EQ(f.partial().total_steps, 50);
        EXPECT_FALSE(f.partial().records.empty());
        EXPECT_NE(std::string(f.what()).find("seed 0"), std::string::npos);
    }
}

TEST(Trainer, BoxActionsOnContinuousEnv) {
    auto env = make_env("point_velocity", 0);
    const auto res = train(*env, small_agent(Algorithm::Sorl, 600), 0);
    EXPECT_EQ(res.total_steps, 600);
}

TEST(Evaluate, FixedPoliciesOnCorridor) {
    auto env = corridor(3);
    const auto safe = evaluate_policy(*env, [](const State&) { return Action::discrete(0); }, 5);
    EXPECT_DOUBLE_EQ(safe.mean_return, 0.05);
    EXPECT_EQ(safe.violation_rate, 0.0);
    EXPECT_EQ(safe.mean_length, 1.0);
    const auto doomed = evaluate_policy(*env, [](const State&) { return Action::discrete(1); }, 5);
    EXPECT_NEAR(doomed.mean_return, 0.8, 1e-12);
    EXPECT_EQ(doomed.violation_rate, 1.0);
    EXPECT_EQ(doomed.mean_length, 4.0);
    EXPECT_THROW(evaluate_policy(*env, [](const State&) { return Action::discrete(0); }, 0), InputError);
}

TEST(Trainer, SorlLearnsTheSafeBranch) {
    auto env = corridor(3);
    auto cfg = small_agent(Algorithm::Sorl, 6000);
    cfg.critic.hidden = {32, 32};
    cfg.critic.lr_actor = cfg.critic.lr_critic = cfg.critic.lr_safety = 1e-3;
    cfg.delta_target = 1.0;
    const auto res = train(*env, cfg, 0);
    const auto ev = evaluate(res.bundle, *env, 3);
    EXPECT_EQ(ev.violation_rate, 0.0);
    EXPECT_DOUBLE_EQ(ev.mean_return, 0.05);
}
