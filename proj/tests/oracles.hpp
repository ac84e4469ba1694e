#pragma once

// Reference computations used only by the tests. They evaluate the same
// quantities as the library by a different route (explicit sums, brute-force
// search, finite differences) so that agreement is evidence, not tautology.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sorl/tuning.hpp"

namespace oracle {

/// R_uwc(x) as the explicit series
///   sum_{t<x} g^t (1 - lambda gs^(H-t)) r_max  -  C sum_{t=x}^{x+terms} g^t
/// accumulated in long double.
inline double unsafe_return_series(int x, const sorl::ConditionInputs& in, int tail_terms = 10000) {
    long double total = 0.0L;
    long double gt = 1.0L;
    const long double g = in.gamma, gs = in.gamma_safe;
    for (int t = 0; t < x; ++t) {
        const long double q = std::pow(gs, static_cast<long double>(in.h_star - t));
        total += gt * (1.0L - static_cast<long double>(in.lambda) * q) * static_cast<long double>(in.r_max);
        gt *= g;
    }
    long double tail = 0.0L;
    for (int t = 0; t < tail_terms; ++t) {
        tail += gt;
        gt *= g;
    }
    return static_cast<double>(total - static_cast<long double>(in.penalty_c) * tail);
}

/// Lower bound on a safe trajectory's shaped return as the explicit series
/// lambda gs r_min sum_t g^t.
inline double safe_return_series(const sorl::ConditionInputs& in, int terms = 10000) {
    long double sum = 0.0L, gt = 1.0L;
    for (int t = 0; t < terms; ++t) {
        sum += gt;
        gt *= in.gamma;
    }
    return static_cast<double>(static_cast<long double>(in.lambda * in.gamma_safe * in.r_min) * sum);
}

inline int brute_force_worst_length(const sorl::ConditionInputs& in) {
    int best = 1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int x = 1; x <= in.h_star; ++x) {
        const double v = unsafe_return_series(x, in);
        if (v > best_v) {
            best_v = v;
            best = x;
        }
    }
    return best;
}

inline double brute_force_delta(const sorl::ConditionInputs& in) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int x = 1; x <= in.h_star; ++x) worst = std::max(worst, unsafe_return_series(x, in));
    return safe_return_series(in) - worst;
}

/// Central difference (f(p + h) - f(p - h)) / 2h on coordinate i.
inline double central_difference(const std::function<double()>& f, double& coordinate, double h) {
    const double saved = coordinate;
    coordinate = saved + h;
    const double up = f();
    coordinate = saved - h;
    const double down = f();
    coordinate = saved;
    return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
