#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sorl/envs.hpp"
#include "sorl/oracle.hpp"
#include "sorl/shaping.hpp"
#include "sorl/tuning.hpp"

using namespace sorl;

namespace {

ConditionInputs random_inputs(std::mt19937_64& rng, double lambda_hi = 10.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ConditionInputs in;
    in.gamma = 0.9 + 0.095 * u(rng);
    in.gamma_safe = 0.5 + 0.49 * u(rng);
    in.h_star = std::uniform_int_distribution<int>(1, 10)(rng);
    in.r_max = 0.1 + 9.9 * u(rng);
    in.r_min = -(0.01 + 4.99 * u(rng));
    in.penalty_c = admissible_penalty(in.r_min, in.r_max, in.gamma, in.h_star) * (1.0 + 2.0 * u(rng));
    in.lambda = lambda_hi * u(rng);
    return in;
}

}  // namespace

TEST(UnsafeReturnBound, MatchesExplicitSeries) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        const auto in = random_inputs(rng);
        for (int x = 1; x <= in.h_star; ++x)
            EXPECT_LE(oracle::relative_error(unsafe_return_bound(x, in), oracle::unsafe_return_series(x, in)), 1e-9)
                << "x=" << x << " gamma=" << in.gamma << " gs=" << in.gamma_safe;
    }
}

TEST(UnsafeReturnBound, EqualDiscountsUseTheLimit) {
    ConditionInputs in;
    in.gamma = in.gamma_safe = 0.9;
    in.h_star = 10;
    in.r_max = 1.0;
    in.r_min = -1.0;
    in.penalty_c = 5.0;
    in.lambda = 2.0;
    for (int x = 1; x <= 10; ++x)
        EXPECT_LE(oracle::relative_error(unsafe_return_bound(x, in), oracle::unsafe_return_series(x, in)), 1e-12);
    // Slightly perturbed discount approaches the same values.
    auto near = in;
    near.gamma_safe = 0.9 + 1e-9;
    for (int x = 1; x <= 10; ++x) EXPECT_NEAR(unsafe_return_bound(x, near), unsafe_return_bound(x, in), 1e-6);
}

TEST(UnsafeReturnBound, DomainErrors) {
    ConditionInputs in;
    EXPECT_THROW(unsafe_return_bound(0, in), DomainError);
    in.gamma = 1.0;
    EXPECT_THROW(unsafe_return_bound(1, in), InputError);
}

TEST(WorstLength, ExhaustiveEqualsBruteForce) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 500; ++i) {
        const auto in = random_inputs(rng);
        EXPECT_EQ(worst_trajectory_length(in), oracle::brute_force_worst_length(in));
    }
}

// R_uwc is concave in x with one stationary point x_c; the floor formula
// returns floor(x_c) and the integer maximizer is floor(x_c) or its successor.
TEST(WorstLength, ClosedFormWithinOneOfExhaustive) {
    std::mt19937_64 rng(13);
    int interior = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto in = random_inputs(rng);
        const auto cf = worst_trajectory_length_closed_form(in);
        const int ex = worst_trajectory_length(in);
        if (!cf.interior) continue;
        ++interior;
        EXPECT_TRUE(ex == cf.length || ex == cf.length + 1) << "closed " << cf.length << " exhaustive " << ex;
    }
    EXPECT_GT(interior, 50);
}

TEST(WorstLength, EndpointBranchIsExact) {
    std::mt19937_64 rng(14);
    for (int i = 0; i < 2000; ++i) {
        const auto in = random_inputs(rng);
        const auto cf = worst_trajectory_length_closed_form(in);
        if (cf.interior) continue;
        const int ex = worst_trajectory_length(in);
        if (ex == 1 || ex == in.h_star) {
            EXPECT_EQ(cf.length, ex);
        }
    }
}

TEST(SafeReturn, MatchesSeriesAndNeedsNegativeMinimum) {
    std::mt19937_64 rng(15);
    for (int i = 0; i < 100; ++i) {
        const auto in = random_inputs(rng);
        EXPECT_LE(oracle::relative_error(safe_return_lower_bound(in), oracle::safe_return_series(in)), 1e-9);
    }
    ConditionInputs in;
    in.r_min = 0.0;
    EXPECT_THROW(safe_return_lower_bound(in), InputError);
}

TEST(DeltaMargin, MatchesBruteForce) {
    std::mt19937_64 rng(16);
    for (int i = 0; i < 300; ++i) {
        const auto in = random_inputs(rng);
        const double a = delta_margin(in), b = oracle::brute_force_delta(in);
        EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(b)));
    }
}

TEST(DeltaMargin, ZeroLambdaWithoutPenaltyIsNegative) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 100; ++i) {
        auto in = random_inputs(rng);
        in.lambda = 0.0;
        in.penalty_c = 0.0;
        EXPECT_LT(delta_margin(in), 0.0);
    }
}

TEST(DeltaMargin, ZeroLambdaWithAdmissiblePenaltyIsPositive) {
    std::mt19937_64 rng(18);
    for (int i = 0; i < 100; ++i) {
        auto in = random_inputs(rng);
        in.lambda = 0.0;
        EXPECT_GT(delta_margin(in), 0.0);
    }
}

TEST(DeltaMargin, ConcaveInLambda) {
    std::mt19937_64 rng(19);
    for (int i = 0; i < 100; ++i) {
        auto in = random_inputs(rng);
        const double step = 0.05;
        for (int k = 1; k < 400; ++k) {
            const double l = k * step;
            const double mid = delta_margin(in.with_lambda(l));
            const double avg = 0.5 * (delta_margin(in.with_lambda(l - step)) + delta_margin(in.with_lambda(l + step)));
            EXPECT_GE(mid, avg - 1e-9 * std::max(1.0, std::abs(mid)));
        }
    }
}

TEST(DeltaPieces, MinimumOfPiecesIsDelta) {
    std::mt19937_64 rng(20);
    for (int i = 0; i < 100; ++i) {
        const auto in = random_inputs(rng);
        const auto pieces = delta_pieces(in);
        double m = INFINITY;
        for (const auto& p : pieces) m = std::min(m, p.at(in.lambda));
        EXPECT_NEAR(m, delta_margin(in), 1e-9 * std::max(1.0, std::abs(m)));
    }
}

TEST(SolveLambda, RoundTripOnAttainableTargets) {
    std::mt19937_64 rng(21);
    int solved = 0;
    for (int i = 0; i < 300; ++i) {
        auto in = random_inputs(rng);
        const double lambda_true = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
        const double target = delta_margin(in.with_lambda(lambda_true));
        const auto sol = solve_lambda(target, in, 1.0);
        ASSERT_TRUE(sol.attainable) << "lambda_true=" << lambda_true << " target=" << target << " achieved=" << sol.achieved_delta << " at " << sol.lambda << " d0=" << delta_margin(in.with_lambda(0)) << " d1=" << delta_margin(in.with_lambda(1));
        EXPECT_GE(sol.lambda, 0.0);
        EXPECT_LE(std::abs(delta_margin(in.with_lambda(sol.lambda)) - target), 1e-6 * std::max(1.0, std::abs(target)));
        ++solved;
    }
    EXPECT_EQ(solved, 300);
}

TEST(SolveLambda, UnattainableTargetIsFlaggedAtTheMaximizer) {
    std::mt19937_64 rng(22);
    for (int i = 0; i < 100; ++i) {
        auto in = random_inputs(rng);
        // Grid maximum of Delta; anything well above it cannot be reached.
        double best = -INFINITY, best_l = 0;
        for (int k = 0; k <= 20000; ++k) {
            const double l = k * 0.01;
            const double d = delta_margin(in.with_lambda(l));
            if (d > best) {
                best = d;
                best_l = l;
            }
        }
        const auto pieces = delta_pieces(in);
        const bool bounded = std::any_of(pieces.begin(), pieces.end(), [](const auto& p) { return p.slope < 0; });
        if (!bounded) continue;
        const auto sol = solve_lambda(best + 1.0 + std::abs(best), in, 1.0);
        EXPECT_FALSE(sol.attainable);
        EXPECT_GE(sol.achieved_delta, best - 1e-9 * std::max(1.0, std::abs(best))) << "grid argmax " << best_l;
    }
}

TEST(SolveLambda, BoundaryAtZeroTarget) {
    ConditionInputs in;
    in.gamma = 0.99;
    in.gamma_safe = 0.85;
    in.h_star = 10;
    in.r_min = -1.0;
    in.r_max = 1.0;
    in.penalty_c = 0.0;  // without penalty the safety term must do the work
    const auto sol = solve_lambda(0.0, in, 1.0);
    if (sol.attainable) {
        EXPECT_NEAR(delta_margin(in.with_lambda(sol.lambda)), 0.0, 1e-6);
        const auto pieces = delta_pieces(in);
        double slope = INFINITY, val = INFINITY;
        for (const auto& p : pieces)
            if (p.at(sol.lambda) < val) {
                val = p.at(sol.lambda);
                slope = p.slope;
            }
        if (slope > 0) {
            EXPECT_GT(delta_margin(in.with_lambda(sol.lambda * 1.001 + 1e-9)), 0.0);
        }
    } else {
        EXPECT_LT(sol.achieved_delta, 0.0);
    }
}

TEST(SolveLambda, InputErrors) {
    ConditionInputs in;
    EXPECT_THROW(solve_lambda(NAN, in, 1.0), InputError);
    EXPECT_THROW(solve_lambda(1.0, in, 0.0), InputError);
    in.r_min = 0.5;
    EXPECT_THROW(solve_lambda(1.0, in, 1.0), InputError);
}

// For every doomed trajectory of the desk environments, the exact shaped
// worst case (rewards replaced by r_max, exact Q_safe along the trajectory)
// stays below the closed-form bound for its length.
TEST(UnsafeReturnBound, SoundOnEnumeratedDoomedTrajectories) {
    std::vector<std::unique_ptr<Env>> envs;
    for (int l = 1; l <= 10; ++l) envs.push_back(make_env("doom_corridor", 0, Json{{"length", l}}));
    envs.push_back(make_env("hazard_grid", 0, Json{{"layout", "slippery"}}));
    for (auto& env : envs) {
        const TabularMDP mdp = enumerate_tabular(*env);
        const auto labels = require_horizon(mdp);
        const auto trajectories = enumerate_doomed_trajectories(mdp, labels);
        for (double gs : {0.7, 0.85, 0.99})
            for (double lambda : {0.0, 0.5, 2.0}) {
                ConditionInputs in{0.99, gs, mdp.h_star, -0.01, env->reward_upper(), 0.0, lambda};
                in.penalty_c = admissible_penalty(in.r_min, in.r_max, in.gamma, in.h_star);
                for (const auto& tau : trajectories) {
                    Policy pi(mdp.num_states, 0);
                    for (std::size_t t = 0; t < tau.length(); ++t) pi[tau.states[t]] = tau.actions[t];
                    const auto table = tabular_safety_critic(mdp, pi, gs);
                    double ret = 0.0, gt = 1.0;
                    for (std::size_t t = 0; t < tau.length(); ++t) {
                        ret += gt * (1.0 - lambda * table.q[mdp.row(tau.states[t], tau.actions[t])]) * in.r_max;
                        gt *= in.gamma;
                    }
                    ret -= in.penalty_c * gt / (1.0 - in.gamma);
                    const int x = static_cast<int>(tau.length());
                    EXPECT_LE(ret, unsafe_return_bound(x, in) + 1e-12) << env->name() << " |tau|=" << x;
                }
            }
    }
}
