#pragma once

// Closed forms behind the safety condition on lambda:
//
//   R_uwc(x)  upper bound on the return of a trajectory that violates after x
//             steps, using Q_safe >= gamma_safe^(H-t) along it;
//   x*        the length maximizing R_uwc over {1..H};
//   L_safe    lower bound on the shaped return of a trajectory that stays safe;
//   Delta     L_safe - R_uwc(x*), positive iff the condition holds.
//
// For fixed (gamma, gamma_safe, H, r_min, r_max, C), each Delta_x = L_safe -
// R_uwc(x) is affine in lambda, so Delta(lambda) = min_x Delta_x(lambda) is
// concave and piecewise affine. The lambda solver relies on that.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "sorl/errors.hpp"
#include "sorl/mdp.hpp"

namespace sorl {

struct ConditionInputs {
    double gamma = 0.99;
    double gamma_safe = 0.85;
    int h_star = 10;
    double r_min = -0.01;
    double r_max = 1.0;
    double penalty_c = 1.0;
    double lambda = 1.0;

    static ConditionInputs from(const SafetyParams& p) {
        return {p.gamma, p.gamma_safe, p.horizon_h_star, p.r_min_emp, p.r_max_emp, p.penalty_c, p.lambda};
    }

    ConditionInputs with_lambda(double l) const {
        ConditionInputs c = *this;
        c.lambda = l;
        return c;
    }

    void validate() const {
        const bool finite = std::isfinite(gamma) && std::isfinite(gamma_safe) && std::isfinite(r_min) &&
                            std::isfinite(r_max) && std::isfinite(penalty_c) && std::isfinite(lambda);
        if (!finite) throw InputError("condition inputs must be finite");
        if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0,1)");
        if (!(gamma_safe > 0.0 && gamma_safe < 1.0)) throw InputError("gamma_safe must lie in (0,1)");
        if (h_star < 1) throw InputError("h_star must be >= 1");
        if (!(r_max > 0.0)) throw InputError("r_max must be positive");
        if (!(r_min < r_max)) throw InputError("need r_min < r_max");
        if (!(lambda >= 0.0)) throw InputError("lambda must be >= 0");
        if (!(penalty_c >= 0.0)) throw InputError("penalty_c must be >= 0");
    }
};

namespace detail {

// (1 - rho^x) / (1 - rho), with the removable singularity at rho = 1 replaced
// by its limit x.
inline double geometric_ratio_sum(double rho, int x) {
    const double log_rho = std::log(rho);
    if (std::abs(log_rho) < 1e-12) return static_cast<double>(x);
    return std::expm1(x * log_rho) / std::expm1(log_rho);
}

// 1 - gamma^x computed without cancellation.
inline double one_minus_pow(double gamma, int x) { return -std::expm1(x * std::log(gamma)); }

}  // namespace detail

/// R_uwc(x) = [r_max/(1-g) - K/(1-rho)] - (r_max+C)/(1-g) g^x + K/(1-rho) rho^x
/// with K = lambda gs^H r_max and rho = g/gs; at g = gs the safety term is x K.
inline double unsafe_return_bound(int x, const ConditionInputs& in) {
    if (x < 1) throw DomainError("unsafe_return_bound: trajectory length must be >= 1");
    in.validate();
    const double g = in.gamma;
    const double k = in.lambda * std::pow(in.gamma_safe, in.h_star) * in.r_max;
    const double reward_part = in.r_max * detail::one_minus_pow(g, x) / (1.0 - g);
    const double penalty_part = in.penalty_c * std::pow(g, x) / (1.0 - g);
    const double safety_part = k * detail::geometric_ratio_sum(g / in.gamma_safe, x);
    return reward_part - penalty_part - safety_part;
}

/// argmax_{x in 1..H} R_uwc(x) by exhaustive evaluation (first maximizer on ties).
inline int worst_trajectory_length(const ConditionInputs& in) {
    in.validate();
    int best = 1;
    double best_value = unsafe_return_bound(1, in);
    for (int x = 2; x <= in.h_star; ++x) {
        const double v = unsafe_return_bound(x, in);
        if (v > best_value) {
            best_value = v;
            best = x;
        }
    }
    return best;
}

struct ClosedFormLength {
    int length = 1;
    /// True when the stationary-point branch landed inside [1, H].
    bool interior = false;
};

/// Stationary-point formula for the maximizing length:
///   floor( [ln(A ln rho) - ln(B ln g)] / ln gs ),
/// A = lambda gs^H r_max / (1 - rho), B = (r_max + C)/(1 - g), used when it
/// lands in [1, H]; otherwise the better endpoint of {1, H}.
inline ClosedFormLength worst_trajectory_length_closed_form(const ConditionInputs& in) {
    in.validate();
    const double g = in.gamma;
    const double gs = in.gamma_safe;
    const double rho = g / gs;
    const double log_rho = std::log(rho);
    // A ln(rho) = K ln(rho) / (1 - rho); the quotient tends to -1 at rho = 1.
    const double log_over_gap = std::abs(log_rho) < 1e-12 ? -1.0 : log_rho / (-std::expm1(log_rho));
    const double a_log = in.lambda * std::pow(gs, in.h_star) * in.r_max * log_over_gap;
    const double b_log = (in.r_max + in.penalty_c) / (1.0 - g) * std::log(g);
    const double ratio = a_log / b_log;
    if (ratio > 0.0 && std::isfinite(ratio)) {
        const double x = std::floor(std::log(ratio) / std::log(gs));
        if (x >= 1.0 && x <= in.h_star) return {static_cast<int>(x), true};
    }
    const int h = in.h_star;
    return {unsafe_return_bound(h, in) > unsafe_return_bound(1, in) ? h : 1, false};
}

/// lambda gs r_min / (1 - g), using Q_safe <= gs on a safe trajectory.
inline double safe_return_lower_bound(const ConditionInputs& in) {
    in.validate();
    if (!(in.r_min < 0.0)) throw InputError("safe_return_lower_bound: r_min must be negative");
    return in.lambda * in.gamma_safe * in.r_min / (1.0 - in.gamma);
}

/// Delta = L_safe - R_uwc(x*). Delta > 0 certifies the safety condition.
inline double delta_margin(const ConditionInputs& in) {
    return safe_return_lower_bound(in) - unsafe_return_bound(worst_trajectory_length(in), in);
}

/// Delta_x(lambda) = offset + slope * lambda for one trajectory length x.
struct DeltaPiece {
    int length = 1;
    double offset = 0.0;
    double slope = 0.0;
    double at(double lambda) const { return offset + slope * lambda; }
};

inline std::vector<DeltaPiece> delta_pieces(const ConditionInputs& in) {
    in.validate();
    std::vector<DeltaPiece> pieces;
    const ConditionInputs zero = in.with_lambda(0.0);
    const ConditionInputs one = in.with_lambda(1.0);
    const double safe_slope = safe_return_lower_bound(one);
    for (int x = 1; x <= in.h_star; ++x) {
        const double r0 = unsafe_return_bound(x, zero);
        const double r1 = unsafe_return_bound(x, one);
        pieces.push_back({x, -r0, safe_slope - (r1 - r0)});
    }
    return pieces;
}

struct LambdaSolution {
    double lambda = 0.0;
    double achieved_delta = 0.0;
    /// False when no lambda >= 0 reaches the target; lambda is then the
    /// closest achievable point (the maximizer of Delta when the target is too high).
    bool attainable = true;
};

/// Finds lambda >= 0 with Delta(lambda) = target. Delta is the minimum of
/// affine pieces, so every root is the root of one piece that is active there;
/// among all roots the one closest to lambda_init is returned.
inline LambdaSolution solve_lambda(double target_delta, const ConditionInputs& in, double lambda_init) {
    if (!std::isfinite(target_delta)) throw InputError("solve_lambda: target must be finite");
    if (!(lambda_init > 0.0) || !std::isfinite(lambda_init)) throw InputError("solve_lambda: lambda_init must be positive");
    in.validate();
    if (!(in.r_min < 0.0)) throw InputError("solve_lambda: r_min must be negative");

    const auto pieces = delta_pieces(in);
    auto delta = [&](double l) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : pieces) m = std::min(m, p.at(l));
        return m;
    };
    const double tol = 1e-6 * std::max(1.0, std::abs(target_delta));
    auto residual = [&](double l) { return delta(l) - target_delta; };

    std::vector<double> roots;
    if (std::abs(residual(lambda_init)) <= tol) roots.push_back(lambda_init);
    if (std::abs(residual(0.0)) <= tol) roots.push_back(0.0);
    for (const auto& p : pieces) {
        if (p.slope == 0.0) continue;
        const double l = (target_delta - p.offset) / p.slope;
        if (l >= 0.0 && std::isfinite(l) && std::abs(residual(l)) <= tol) roots.push_back(l);
    }
    if (!roots.empty()) {
        double best = roots.front();
        for (double r : roots)
            if (std::abs(r - lambda_init) < std::abs(best - lambda_init)) best = r;
        return {best, delta(best), true};
    }

    // Unattainable: return the closest point, found among 0 and the breakpoints.
    std::vector<double> candidates{0.0};
    for (std::size_t i = 0; i < pieces.size(); ++i)
        for (std::size_t j = i + 1; j < pieces.size(); ++j) {
            const double ds = pieces[i].slope - pieces[j].slope;
            if (ds == 0.0) continue;
            const double l = (pieces[j].offset - pieces[i].offset) / ds;
            if (l > 0.0 && std::isfinite(l)) candidates.push_back(l);
        }
    double best = 0.0;
    for (double c : candidates)
        if (std::abs(residual(c)) < std::abs(residual(best))) best = c;
    return {best, delta(best), false};
}

}  // namespace sorl
