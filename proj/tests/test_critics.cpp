#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sorl/critics.hpp"

using namespace sorl;

namespace {

CriticConfig small_config() {
    CriticConfig c;
    c.hidden = {16, 16};
    return c;
}

ApproximatorBundle discrete_bundle(std::uint64_t seed = 7) {
    return ApproximatorBundle(3, ActionSpace{ActionSpace::Kind::Discrete, 4}, small_config(), seed);
}

ApproximatorBundle box_bundle(std::uint64_t seed = 7) {
    return ApproximatorBundle(3, ActionSpace{ActionSpace::Kind::Box, 2}, small_config(), seed);
}

Batch random_batch(const ApproximatorBundle& b, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Batch batch;
    batch.states = Matrix::NullaryExpr(b.state_dim(), n, [&] { return u(rng); });
    batch.next_states = Matrix::NullaryExpr(b.state_dim(), n, [&] { return u(rng); });
    if (b.discrete())
        for (int i = 0; i < n; ++i) batch.actions.push_back(std::uniform_int_distribution<int>(0, b.action_space().size - 1)(rng));
    else
        batch.action_values = Matrix::NullaryExpr(b.action_space().size, n, [&] { return u(rng); });
    batch.rewards = Vector::NullaryExpr(n, [&] { return u(rng); });
    batch.safety = Vector::Zero(n);
    batch.terminal = Vector::Zero(n);
    return batch;
}

// Checks the analytic gradient stored in net.grads() against central
// differences of `loss` on ten parameter coordinates.
void expect_gradient_matches(Mlp& net, const std::function<double()>& loss, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, net.params().size() - 1);
    int checked = 0;
    for (int tries = 0; checked < 10 && tries < 200; ++tries) {
        const auto i = pick(rng);
        const double fd = oracle::central_difference(loss, net.params()[i], 1e-6);
        if (std::abs(fd) < 1e-6) continue;  // relative error is meaningless here
        EXPECT_LE(oracle::relative_error(net.grads()[i], fd), 1e-4) << "coordinate " << i;
        ++checked;
    }
    EXPECT_EQ(checked, 10);
}

}  // namespace

TEST(CriticGradients, RewardCriticLoss) {
    for (auto b : {discrete_bundle(), box_bundle()}) {
        const Batch batch = random_batch(b, 8, 1);
        const Vector y = Vector::LinSpaced(8, -1.0, 2.0);
        b.q1.zero_grad();
        b.q2.zero_grad();
        reward_critic_loss(b, batch, y);
        auto loss = [&] {
            auto copy = b;
            return reward_critic_loss(copy, batch, y);
        };
        expect_gradient_matches(b.q1, loss, 2);
        expect_gradient_matches(b.q2, loss, 3);
    }
}

TEST(CriticGradients, SafetyCriticLoss) {
    for (auto b : {discrete_bundle(), box_bundle()}) {
        const Batch batch = random_batch(b, 8, 4);
        const Vector y = Vector::LinSpaced(8, 0.0, 1.0);
        b.qs1.zero_grad();
        b.qs2.zero_grad();
        safety_critic_loss(b, batch, y);
        auto loss = [&] {
            auto copy = b;
            return safety_critic_loss(copy, batch, y);
        };
        expect_gradient_matches(b.qs1, loss, 5);
        expect_gradient_matches(b.qs2, loss, 6);
    }
}

TEST(CriticGradients, ActorLossDiscrete) {
    auto b = discrete_bundle();
    const Batch batch = random_batch(b, 8, 7);
    b.actor.zero_grad();
    actor_loss(b, batch.states, Matrix());
    auto loss = [&] {
        auto copy = b;
        return actor_loss(copy, batch.states, Matrix());
    };
    expect_gradient_matches(b.actor, loss, 8);
}

TEST(CriticGradients, ActorLossBox) {
    auto b = box_bundle();
    const Batch batch = random_batch(b, 8, 9);
    std::mt19937_64 rng(10);
    const Matrix noise = b.standard_normal(2, 8, rng);
    b.actor.zero_grad();
    actor_loss(b, batch.states, noise);
    auto loss = [&] {
        auto copy = b;
        return actor_loss(copy, batch.states, noise);
    };
    expect_gradient_matches(b.actor, loss, 11);
}

TEST(SafetyTargets, BackupExamples) {
    EXPECT_DOUBLE_EQ(safety_backup(1.0, 0.9, 0.3), 1.0);
    EXPECT_DOUBLE_EQ(safety_backup(0.0, 0.9, 0.5), 0.45);
    EXPECT_DOUBLE_EQ(safety_backup(0.0, 0.9, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(safety_target_value(true, true, 0.85, 0.2), 0.85);
    EXPECT_DOUBLE_EQ(safety_target_value(false, true, 0.85, 0.7), 0.0);
    EXPECT_DOUBLE_EQ(safety_target_value(false, false, 0.85, 0.4), 0.85 * 0.4);
}

TEST(SafetyTargets, SingleTransitionForm) {
    auto b = discrete_bundle();
    std::mt19937_64 rng(0);
    SafetyParams p;
    p.gamma_safe = 0.8;
    Transition t{{0, 0, 0}, Action::discrete(1), 0.0, 0.0, 1, {1, 1, 1}, true, false};
    EXPECT_DOUBLE_EQ(safety_critic_target(t, b, p, rng), 0.8);
    t.safety_signal = 0;
    EXPECT_DOUBLE_EQ(safety_critic_target(t, b, p, rng), 0.0);
    t.done = false;
    const double v = safety_critic_target(t, b, p, rng);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 0.8);
}

TEST(SafetyTargets, ZeroResidualGivesZeroLossAndGradient) {
    auto b = discrete_bundle();
    b.qs2 = b.qs1;
    const Batch batch = random_batch(b, 6, 12);
    const Vector y = b.evaluate(b.qs1, batch.states, batch.actions, batch.action_values);
    b.qs1.zero_grad();
    b.qs2.zero_grad();
    EXPECT_NEAR(safety_critic_loss(b, batch, y), 0.0, 1e-30);
    EXPECT_EQ(b.qs1.grads().norm(), 0.0);
    EXPECT_EQ(b.qs2.grads().norm(), 0.0);
}

TEST(RewardTargets, AbsorbingTerminalAndTruncated) {
    auto b = discrete_bundle();
    Batch batch = random_batch(b, 3, 13);
    batch.rewards << -2.0, 0.5, 0.5;
    batch.safety << 1.0, 0.0, 0.0;
    batch.terminal << 1.0, 1.0, 0.0;
    std::mt19937_64 rng(0);
    const Vector y = reward_critic_targets(batch, b, {0.9, true}, rng);
    EXPECT_NEAR(y(0), -20.0, 1e-12);
    EXPECT_DOUBLE_EQ(y(1), 0.5);
    std::mt19937_64 rng2(0);
    const Vector v = b.next_soft_value(batch.next_states, rng2);
    EXPECT_NEAR(y(2), 0.5 + 0.9 * v(2), 1e-12);
    const Vector plain = reward_critic_targets(batch, b, {0.9, false}, rng);
    EXPECT_DOUBLE_EQ(plain(0), -2.0);
}

// Two-step chain s0 -> s1 -> unsafe under every action: the learned failure
// value must settle at gs at s1 and gs^2 at s0.
TEST(SafetyCritic, ConvergesToChainFixedPoint) {
    CriticConfig cfg = small_config();
    cfg.lr_safety = 1e-2;
    cfg.tau = 0.05;
    ApproximatorBundle b(1, ActionSpace{ActionSpace::Kind::Discrete, 2}, cfg, 3);
    const double gs = 0.8;
    std::vector<Transition> data;
    for (int a = 0; a < 2; ++a) {
        data.push_back({{0.0}, Action::discrete(a), 0, 0, 0, {1.0}, false, false});
        data.push_back({{1.0}, Action::discrete(a), 0, 0, 1, {2.0}, true, false});
    }
    std::vector<const Transition*> ptrs;
    for (const auto& t : data) ptrs.push_back(&t);
    const Batch batch = make_batch(ptrs, b.action_space());
    std::mt19937_64 r1(0), r2(1);
    for (int i = 0; i < 4000; ++i) update_critics(b, batch, &batch, {0.9, true}, gs, r1, r2);
    for (int a = 0; a < 2; ++a) {
        EXPECT_NEAR(b.safety_estimate({1.0}, Action::discrete(a)), gs, 0.02);
        EXPECT_NEAR(b.safety_estimate({0.0}, Action::discrete(a)), gs * gs, 0.02);
    }
}

TEST(SafetyCritic, OutputsStayInUnitInterval) {
    for (auto b : {discrete_bundle(), box_bundle()}) {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 100.0);
        for (int i = 0; i < 200; ++i) {
            State s{n(rng), n(rng), n(rng)};
            const Action a = b.random_action(rng);
            const double v = b.safety_estimate(s, a);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Bundle, SameSeedSameNetworksAndActions) {
    auto a = box_bundle(4), b = box_bundle(4);
    EXPECT_EQ(a.actor.params(), b.actor.params());
    EXPECT_EQ(a.qs2.params(), b.qs2.params());
    std::mt19937_64 r1(9), r2(9);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.sample_action({0.1, 0.2, 0.3}, r1), b.sample_action({0.1, 0.2, 0.3}, r2));
}

TEST(Bundle, BoxActionsInsideBounds) {
    auto b = box_bundle();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto a = b.sample_action({3.0, -2.0, 1.0}, rng);
        for (double v : a.values) EXPECT_LE(std::abs(v), 1.0);
    }
}

TEST(Bundle, SquashedLogProbMatchesChangeOfVariables) {
    // Density of a = tanh(u), u ~ N(m, s^2), in one dimension.
    auto b = ApproximatorBundle(1, ActionSpace{ActionSpace::Kind::Box, 1}, small_config(), 1);
    ApproximatorBundle::GaussianHead g;
    g.mean = Matrix::Constant(1, 1, 0.3);
    g.log_std = Matrix::Constant(1, 1, std::log(0.5));
    g.std = Matrix::Constant(1, 1, 0.5);
    for (double eps : {-3.0, -0.5, 0.0, 1.2, 25.0}) {
        Vector lp;
        b.squashed_sample(g, Matrix::Constant(1, 1, eps), lp);
        const double u = 0.3 + 0.5 * eps;
        const double normal = -0.5 * eps * eps - std::log(0.5) - 0.5 * std::log(2 * std::numbers::pi);
        // log(1 - tanh^2 u) = -2 log cosh u, with log cosh u = |u| + log1p(e^{-2|u|}) - log 2.
        const double log_cosh = std::abs(u) + std::log1p(std::exp(-2.0 * std::abs(u))) - std::log(2.0);
        EXPECT_NEAR(lp(0), normal + 2.0 * log_cosh, 1e-9 * std::max(1.0, std::abs(lp(0))));
    }
}

TEST(UpdateCritics, NonFiniteRewardRaisesTrainingFault) {
    auto b = discrete_bundle();
    Batch batch = random_batch(b, 4, 2);
    batch.rewards(1) = std::nan("");
    std::mt19937_64 r1(0), r2(1);
    try {
        update_critics(b, batch, nullptr, {}, 0.85, r1, r2);
        FAIL() << "expected TrainingFault";
    } catch (const TrainingFault& f) {
        EXPECT_FALSE(f.snapshot().empty());
    }
}

TEST(UpdateCritics, SafetyTargetsUntouchedWithoutSafetyBatch) {
    auto b = discrete_bundle();
    const Vector before = b.qs1_target.params();
    const Batch batch = random_batch(b, 4, 3);
    std::mt19937_64 r1(0), r2(1);
    const auto stats = update_critics(b, batch, nullptr, {}, 0.85, r1, r2);
    EXPECT_FALSE(stats.safety_updated);
    EXPECT_EQ(b.qs1_target.params(), before);
}

TEST(Checkpoint, RoundTripRestoresEveryNetwork) {
    const auto path = std::filesystem::temp_directory_path() / "sorl_test_ckpt.bin";
    auto a = box_bundle(1);
    save_checkpoint(a, path.string());
    auto b = box_bundle(2);
    ASSERT_NE(a.q1.params(), b.q1.params());
    load_checkpoint(b, path.string());
    EXPECT_EQ(a.actor.params(), b.actor.params());
    EXPECT_EQ(a.q1.params(), b.q1.params());
    EXPECT_EQ(a.q2_target.params(), b.q2_target.params());
    EXPECT_EQ(a.qs1.params(), b.qs1.params());
    EXPECT_EQ(a.qs2_target.params(), b.qs2_target.params());
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptFiles) {
    const auto path = std::filesystem::temp_directory_path() / "sorl_test_bad.bin";
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOTACKPT";
    }
    auto b = discrete_bundle();
    EXPECT_THROW(load_checkpoint(b, path.string()), InputError);
    auto a = discrete_bundle();
    save_checkpoint(a, path.string());
    std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
    EXPECT_THROW(load_checkpoint(b, path.string()), InputError);
    auto other = box_bundle();
    save_checkpoint(other, path.string());
    EXPECT_THROW(load_checkpoint(b, path.string()), InputError);
    std::filesystem::remove(path);
}
