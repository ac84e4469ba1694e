#pragma once

// Reward shaping with a safety critic, the penalty bound for C, and online
// tracking of the empirical reward range.

#include <algorithm>
#include <cmath>
#include <limits>

#include "sorl/errors.hpp"
#include "sorl/mdp.hpp"

namespace sorl {

/// Smallest admissible terminal cost: (r_max - r_min) / gamma^H - r_max.
/// Any C strictly above the returned value is admissible.
inline double penalty_lower_bound(double r_min, double r_max, double gamma, int h_star) {
    if (gamma == 0.0) throw DomainError("penalty_lower_bound: gamma = 0 divides by zero");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("penalty_lower_bound: gamma must lie in (0,1)");
    if (h_star < 1) throw DomainError("penalty_lower_bound: h_star must be >= 1");
    if (!(r_min < r_max)) throw DomainError("penalty_lower_bound: need r_min < r_max");
    return (r_max - r_min) / std::pow(gamma, h_star) - r_max;
}

/// Margin applied on top of the bound when C is (re)computed.
inline constexpr double kPenaltyMargin = 1.05;

inline double admissible_penalty(double r_min, double r_max, double gamma, int h_star) {
    return kPenaltyMargin * penalty_lower_bound(r_min, r_max, gamma, h_star);
}

/// Shaped reward. On a violation the reward is -C. Otherwise a nonnegative
/// reward is attenuated by (1 - lambda q) and a negative one scaled by lambda q.
inline double shape_reward(double r, double q_safe, const SafetyParams& params, bool violated) {
    if (!(q_safe >= 0.0 && q_safe <= 1.0)) throw ContractError("shape_reward: q_safe must lie in [0,1]");
    if (violated) return -params.penalty_c;
    const double weight = params.lambda * q_safe;
    if (r >= 0.0) {
        double factor = 1.0 - weight;
        if (params.clamp_shaping_factor) factor = std::max(factor, 0.0);
        return factor * r;
    }
    return weight * r;
}

/// C strictly above the bound for the params' own range, gamma and horizon.
inline bool penalty_admissible(const SafetyParams& p) {
    return p.penalty_c > penalty_lower_bound(p.r_min_emp, p.r_max_emp, p.gamma, p.horizon_h_star);
}

/// Running reward range with sign clamping: r_min <= -eps and r_max >= eps.
class RewardRangeTracker {
public:
    explicit RewardRangeTracker(double epsilon_clamp = 0.01) : eps_(epsilon_clamp) {
        if (!(eps_ > 0.0)) throw InputError("epsilon_clamp must be positive");
    }

    /// Starts from an explicit range (clamped).
    RewardRangeTracker(double r_min, double r_max, double epsilon_clamp)
        : eps_(epsilon_clamp), lo_(std::min(r_min, -epsilon_clamp)), hi_(std::max(r_max, epsilon_clamp)) {
        if (!(eps_ > 0.0)) throw InputError("epsilon_clamp must be positive");
    }

    /// Extends the range with r. Returns true when the range changed, i.e. C
    /// and lambda have to be recomputed.
    bool observe(double r) {
        if (!std::isfinite(r)) throw InputError("observe_reward: non-finite reward");
        bool changed = false;
        if (r < lo_) {
            lo_ = r;
            changed = true;
        }
        if (r > hi_) {
            hi_ = r;
            changed = true;
        }
        return changed;
    }

    double r_min() const noexcept { return lo_; }
    double r_max() const noexcept { return hi_; }
    double epsilon() const noexcept { return eps_; }

private:
    double eps_;
    double lo_ = -eps_;
    double hi_ = eps_;
};

}  // namespace sorl
