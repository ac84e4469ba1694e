#pragma once

// Exact dynamic programming on finite MDPs: irrecoverable-state labels, the
// exact safety critic of a fixed policy, optimal action values under shaped
// rewards, and machine checks of the two safety guarantees:
//
//   * along every doomed trajectory, Q_safe(s_t, a_t) >= gamma_safe^(H - t);
//   * at every safe state offering both kinds of action, every action that
//     keeps the agent safe is valued strictly above every doomed action.
//
// Unsafe states are absorbing in the shaped MDP: entering one pays -C, and
// the state keeps paying -C forever, so V(unsafe) = -C / (1 - gamma).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sorl/errors.hpp"
#include "sorl/shaping.hpp"
#include "sorl/tabular.hpp"
#include "sorl/tuning.hpp"

namespace sorl {

/// Q tables are stored row-major: q[s * A + a].
using QTable = std::vector<double>;
/// Deterministic policy: one action per state.
using Policy = std::vector<std::size_t>;

enum class StateLabel { Safe, Irrecoverable, Unsafe };

inline const char* label_name(StateLabel l) {
    switch (l) {
        case StateLabel::Safe: return "safe";
        case StateLabel::Irrecoverable: return "irrecoverable";
        case StateLabel::Unsafe: return "unsafe";
    }
    return "?";
}

struct IrrecoverableLabels {
    std::vector<StateLabel> labels;
    /// Longest number of steps until violation (0 for unsafe states, -1 for
    /// safe states, INT_MAX when an irrecoverable state can delay violation
    /// without bound).
    std::vector<int> steps_to_violation;
    int max_steps_to_violation = 0;
    bool horizon_respected = true;
    std::optional<std::size_t> horizon_witness;  // state exceeding the declared horizon

    std::size_t count(StateLabel l) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l)); }
    bool is(std::size_t s, StateLabel l) const { return labels[s] == l; }
};

/// A state can avoid violation when some action keeps every successor in the
/// avoiding set; the avoiding set is the greatest such fixed point. Every other
/// non-unsafe state is irrecoverable. Goal terminals avoid trivially.
inline IrrecoverableLabels label_irrecoverable(const TabularMDP& mdp) {
    mdp.validate();
    const std::size_t n = mdp.num_states, na = mdp.num_actions;
    std::vector<char> avoid(n);
    for (std::size_t s = 0; s < n; ++s) avoid[s] = !mdp.is_unsafe(s);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t s = 0; s < n; ++s) {
            if (!avoid[s] || mdp.is_terminal(s)) continue;
            bool some = false;
            for (std::size_t a = 0; a < na && !some; ++a) {
                bool all = true;
                for (const auto& sc : mdp.next(s, a))
                    if (sc.prob > 0.0 && !avoid[sc.state]) all = false;
                some = all;
            }
            if (!some) {
                avoid[s] = 0;
                changed = true;
            }
        }
    }
    IrrecoverableLabels out;
    out.labels.resize(n);
    out.steps_to_violation.assign(n, -1);
    for (std::size_t s = 0; s < n; ++s) {
        out.labels[s] = mdp.is_unsafe(s) ? StateLabel::Unsafe : avoid[s] ? StateLabel::Safe : StateLabel::Irrecoverable;
        if (mdp.is_unsafe(s)) out.steps_to_violation[s] = 0;
    }
    // Longest path to violation by relaxation; more than n rounds of growth
    // means a cycle inside the irrecoverable region.
    constexpr int unbounded = std::numeric_limits<int>::max();
    std::vector<int> t(n, 0);
    for (std::size_t round = 0; round <= n + 1; ++round) {
        bool changed = false;
        for (std::size_t s = 0; s < n; ++s) {
            if (out.labels[s] != StateLabel::Irrecoverable) continue;
            int best = 0;
            for (std::size_t a = 0; a < na; ++a)
                for (const auto& sc : mdp.next(s, a))
                    if (sc.prob > 0.0) best = std::max(best, 1 + t[sc.state]);
            if (best != t[s]) {
                t[s] = best;
                changed = true;
            }
        }
        if (!changed) break;
        if (round == n + 1)
            for (std::size_t s = 0; s < n; ++s)
                if (out.labels[s] == StateLabel::Irrecoverable) t[s] = unbounded;
    }
    for (std::size_t s = 0; s < n; ++s) {
        if (out.labels[s] != StateLabel::Irrecoverable) continue;
        out.steps_to_violation[s] = t[s];
        out.max_steps_to_violation = std::max(out.max_steps_to_violation, t[s]);
        if (t[s] > mdp.h_star && out.horizon_respected) {
            out.horizon_respected = false;
            out.horizon_witness = s;
        }
    }
    return out;
}

/// Throws ContractError when the environment breaks the declared horizon.
inline IrrecoverableLabels require_horizon(const TabularMDP& mdp) {
    auto labels = label_irrecoverable(mdp);
    if (!labels.horizon_respected)
        throw ContractError("irrecoverable state " + std::to_string(*labels.horizon_witness) + " needs " +
                            std::to_string(labels.steps_to_violation[*labels.horizon_witness]) +
                            " steps to violate, above the declared horizon " + std::to_string(mdp.h_star));
    return labels;
}

// ---------------------------------------------------------------------------
// Exact safety critic

struct SafetyTable {
    QTable q;            // Q_safe(s,a)
    std::vector<double> v;  // V_safe(s) under the policy
    long sweeps = 0;
};

/// Fixed point of Q(s,a) = c(s) + (1 - c(s)) gamma_safe sum_s' P(s'|s,a) V(s'),
/// V(s) = sum_a pi(a|s) Q(s,a). Unsafe states have Q = 1, goal terminals 0.
/// `policy` holds pi(a|s) at [s * A + a].
inline SafetyTable tabular_safety_critic(const TabularMDP& mdp, const std::vector<double>& policy, double gamma_safe,
                                         double tolerance = 1e-12) {
    mdp.validate();
    if (!(gamma_safe >= 0.0 && gamma_safe < 1.0)) throw InputError("gamma_safe must lie in [0,1)");
    const std::size_t n = mdp.num_states, na = mdp.num_actions;
    if (policy.size() != n * na) throw InputError("policy table has wrong size");
    SafetyTable out;
    out.q.assign(n * na, 0.0);
    out.v.assign(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        if (mdp.is_unsafe(s)) {
            out.v[s] = 1.0;
            for (std::size_t a = 0; a < na; ++a) out.q[mdp.row(s, a)] = 1.0;
        }
    constexpr long max_sweeps = 1'000'000;
    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
        double residual = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            double v = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                double ev = 0.0;
                for (const auto& sc : mdp.next(s, a)) ev += sc.prob * out.v[sc.state];
                const double q = gamma_safe * ev;
                residual = std::max(residual, std::abs(q - out.q[mdp.row(s, a)]));
                out.q[mdp.row(s, a)] = q;
                v += policy[mdp.row(s, a)] * q;
            }
            residual = std::max(residual, std::abs(v - out.v[s]));
            out.v[s] = v;
        }
        if (residual <= tolerance) return out;
    }
    throw NumericalFault("tabular_safety_critic did not converge");
}

inline std::vector<double> deterministic_policy_table(const TabularMDP& mdp, const Policy& pi) {
    if (pi.size() != mdp.num_states) throw InputError("policy has wrong size");
    std::vector<double> table(mdp.num_states * mdp.num_actions, 0.0);
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
        if (pi[s] >= mdp.num_actions) throw InputError("policy action out of range");
        table[mdp.row(s, pi[s])] = 1.0;
    }
    return table;
}

inline SafetyTable tabular_safety_critic(const TabularMDP& mdp, const Policy& pi, double gamma_safe) {
    return tabular_safety_critic(mdp, deterministic_policy_table(mdp, pi), gamma_safe);
}

// ---------------------------------------------------------------------------
// Shaped optimal values

struct ShapedValues {
    QTable q;
    std::vector<double> v;
    std::vector<double> residuals;  // sup-norm change per sweep
};

/// Value iteration on r_hat(s,a,s') = shape_reward(r(s,a), q_safe(s,a), params,
/// s' unsafe). Unsafe states are absorbing at -C/(1-gamma); goals are worth 0.
inline ShapedValues exact_shaped_q(const TabularMDP& mdp, const SafetyParams& params, const QTable& q_safe,
                                   double tolerance = 1e-12) {
    mdp.validate();
    const std::size_t n = mdp.num_states, na = mdp.num_actions;
    if (q_safe.size() != n * na) throw InputError("q_safe table has wrong size");
    for (double q : q_safe)
        if (!(q >= 0.0 && q <= 1.0)) throw ContractError("q_safe values must lie in [0,1]");
    if (!(params.gamma >= 0.0 && params.gamma < 1.0)) throw InputError("gamma must lie in [0,1)");
    const double g = params.gamma;
    const double absorbed = -params.penalty_c / (1.0 - g);
    ShapedValues out;
    out.q.assign(n * na, 0.0);
    out.v.assign(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        if (mdp.is_unsafe(s)) {
            out.v[s] = absorbed;
            for (std::size_t a = 0; a < na; ++a) out.q[mdp.row(s, a)] = absorbed;
        }
    // Per-row expected shaped reward does not change across sweeps.
    std::vector<double> r_hat(n * na, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        if (mdp.is_terminal(s)) continue;
        for (std::size_t a = 0; a < na; ++a) {
            const std::size_t i = mdp.row(s, a);
            for (const auto& sc : mdp.next(s, a))
                r_hat[i] += sc.prob * shape_reward(mdp.reward[i], q_safe[i], params, mdp.is_unsafe(sc.state));
        }
    }
    const double bound = std::max(1.0, std::abs(absorbed));
    for (long sweep = 0; sweep < 10'000'000; ++sweep) {
        double residual = 0.0;
        std::vector<double> v_new = out.v;
        for (std::size_t s = 0; s < n; ++s) {
            if (mdp.is_terminal(s)) continue;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < na; ++a) {
                const std::size_t i = mdp.row(s, a);
                double ev = 0.0;
                for (const auto& sc : mdp.next(s, a)) ev += sc.prob * out.v[sc.state];
                const double q = r_hat[i] + g * ev;
                residual = std::max(residual, std::abs(q - out.q[i]));
                out.q[i] = q;
                best = std::max(best, q);
            }
            v_new[s] = best;
        }
        out.v = std::move(v_new);
        out.residuals.push_back(residual);
        if (residual <= tolerance * bound) return out;
    }
    throw NumericalFault("exact_shaped_q did not converge");
}

/// Lowest-index maximizer per state (terminal states get action 0).
inline Policy greedy_policy(const TabularMDP& mdp, const QTable& q) {
    Policy pi(mdp.num_states, 0);
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        double best = q[mdp.row(s, 0)];
        for (std::size_t a = 1; a < mdp.num_actions; ++a)
            if (q[mdp.row(s, a)] > best) {
                best = q[mdp.row(s, a)];
                pi[s] = a;
            }
    }
    return pi;
}

struct JointFixedPoint {
    SafetyTable safety;
    ShapedValues shaped;
    Policy policy;
    int cycles = 0;
    bool converged = false;
};

/// Alternates "exact Q_safe of the current greedy policy" and "optimal shaped
/// values for that Q_safe" until the greedy policy and Q_safe stop changing.
inline JointFixedPoint joint_fixed_point(const TabularMDP& mdp, const SafetyParams& params, int max_cycles = 1000,
                                         double tolerance = 1e-9) {
    JointFixedPoint out;
    out.policy.assign(mdp.num_states, 0);
    out.safety = tabular_safety_critic(mdp, out.policy, params.gamma_safe);
    for (out.cycles = 1; out.cycles <= max_cycles; ++out.cycles) {
        out.shaped = exact_shaped_q(mdp, params, out.safety.q);
        const Policy next = greedy_policy(mdp, out.shaped.q);
        SafetyTable next_safety = tabular_safety_critic(mdp, next, params.gamma_safe);
        double change = 0.0;
        for (std::size_t i = 0; i < next_safety.q.size(); ++i)
            change = std::max(change, std::abs(next_safety.q[i] - out.safety.q[i]));
        const bool same = next == out.policy;
        out.policy = next;
        out.safety = std::move(next_safety);
        if (same && change <= tolerance) {
            out.shaped = exact_shaped_q(mdp, params, out.safety.q);
            out.converged = true;
            return out;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Safety condition on exact tables

/// Condition inputs with the reward range read off the table and clamped
/// like the online tracker (r_min <= -eps, r_max >= eps).
inline ConditionInputs exact_condition_inputs(const TabularMDP& mdp, const SafetyParams& params,
                                              double epsilon_clamp = 0.01) {
    double lo = -epsilon_clamp, hi = epsilon_clamp;
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        for (std::size_t a = 0; a < mdp.num_actions; ++a) {
            lo = std::min(lo, mdp.r(s, a));
            hi = std::max(hi, mdp.r(s, a));
        }
    }
    return {params.gamma, params.gamma_safe, mdp.h_star, lo, hi, params.penalty_c, params.lambda};
}

/// Params with C at the admissible margin for the table's range and lambda
/// solved for `delta_target`. `attainable` reports the solver flag.
struct TunedParams {
    SafetyParams params;
    LambdaSolution solution;
};

inline TunedParams tune_for_table(const TabularMDP& mdp, SafetyParams base, double delta_target,
                                  double lambda_init = 1.0) {
    ConditionInputs in = exact_condition_inputs(mdp, base);
    base.r_min_emp = in.r_min;
    base.r_max_emp = in.r_max;
    base.horizon_h_star = mdp.h_star;
    base.penalty_c = admissible_penalty(in.r_min, in.r_max, in.gamma, in.h_star);
    in.penalty_c = base.penalty_c;
    const LambdaSolution sol = solve_lambda(delta_target, in, lambda_init);
    base.lambda = sol.lambda;
    base.delta_target = delta_target;
    return {base, sol};
}

// ---------------------------------------------------------------------------
// Safe-over-doomed ordering check

enum class ActionKind { Safe, Doomed, Mixed };

/// Safe: every successor is a safe state. Doomed: every successor is unsafe or
/// irrecoverable. Mixed otherwise (possible only with stochastic transitions).
inline ActionKind classify_action(const TabularMDP& mdp, const IrrecoverableLabels& labels, std::size_t s,
                                  std::size_t a) {
    bool any_safe = false, any_bad = false;
    for (const auto& sc : mdp.next(s, a)) {
        if (sc.prob <= 0.0) continue;
        (labels.is(sc.state, StateLabel::Safe) ? any_safe : any_bad) = true;
    }
    if (any_safe && any_bad) return ActionKind::Mixed;
    return any_bad ? ActionKind::Doomed : ActionKind::Safe;
}

struct OrderingReport {
    bool passed = true;
    std::size_t states_compared = 0;
    std::size_t comparisons = 0;   // (safe action, doomed action) pairs
    std::size_t skipped_states = 0;  // non-terminal states lacking one action kind
    double tightest_margin = std::numeric_limits<double>::infinity();
    /// Delta at the params with the table's own reward range; > 0 is the
    /// ordering's precondition.
    double delta = 0.0;
    bool converged = true;
    struct Witness {
        std::size_t state, safe_action, doomed_action;
        double safe_value, doomed_value;
    };
    std::optional<Witness> witness;  // first failing triple
    std::size_t failures = 0;
};

/// Compares Q_hat at every safe, non-terminal state with at least one safe and
/// one doomed action. Q_safe is the exact critic of the greedy policy at the
/// joint fixed point.
inline OrderingReport check_safe_ordering(const TabularMDP& mdp, const SafetyParams& params) {
    const auto labels = label_irrecoverable(mdp);
    const JointFixedPoint fp = joint_fixed_point(mdp, params);
    OrderingReport rep;
    rep.converged = fp.converged;
    {
        ConditionInputs in = exact_condition_inputs(mdp, params);
        rep.delta = in.r_min < 0.0 ? delta_margin(in) : std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
        if (mdp.is_terminal(s)) continue;
        if (!labels.is(s, StateLabel::Safe)) {
            ++rep.skipped_states;
            continue;
        }
        std::vector<std::size_t> safe, doomed;
        for (std::size_t a = 0; a < mdp.num_actions; ++a) {
            const ActionKind k = classify_action(mdp, labels, s, a);
            if (k == ActionKind::Safe) safe.push_back(a);
            else if (k == ActionKind::Doomed) doomed.push_back(a);
        }
        if (safe.empty() || doomed.empty()) {
            ++rep.skipped_states;
            continue;
        }
        ++rep.states_compared;
        for (std::size_t a : safe)
            for (std::size_t b : doomed) {
                ++rep.comparisons;
                const double qa = fp.shaped.q[mdp.row(s, a)], qb = fp.shaped.q[mdp.row(s, b)];
                rep.tightest_margin = std::min(rep.tightest_margin, qa - qb);
                if (!(qa > qb)) {
                    rep.passed = false;
                    ++rep.failures;
                    if (!rep.witness) rep.witness = OrderingReport::Witness{s, a, b, qa, qb};
                }
            }
    }
    if (!fp.converged) rep.passed = false;
    return rep;
}

// ---------------------------------------------------------------------------
// Doomed trajectories and the lower bound on Q_safe along them

struct DoomedTrajectory {
    std::vector<std::size_t> states;   // s_0 .. s_k, s_k unsafe
    std::vector<std::size_t> actions;  // a_0 .. a_{k-1}
    std::size_t length() const { return actions.size(); }
};

/// Every action/successor sequence that starts in an irrecoverable state and
/// ends at the first unsafe state. Throws NumericalFault above `cap` entries.
inline std::vector<DoomedTrajectory> enumerate_doomed_trajectories(const TabularMDP& mdp,
                                                                   const IrrecoverableLabels& labels,
                                                                   std::size_t cap = 1'000'000) {
    std::vector<DoomedTrajectory> out;
    DoomedTrajectory cur;
    auto dfs = [&](auto&& self, std::size_t s) -> void {
        if (mdp.is_unsafe(s)) {
            if (out.size() >= cap) throw NumericalFault("doomed-trajectory enumeration exceeded its cap");
            out.push_back(cur);
            return;
        }
        if (cur.actions.size() > static_cast<std::size_t>(mdp.h_star) + 1)
            throw ContractError("doomed trajectory longer than the declared horizon");
        for (std::size_t a = 0; a < mdp.num_actions; ++a)
            for (const auto& sc : mdp.next(s, a)) {
                if (sc.prob <= 0.0) continue;
                cur.actions.push_back(a);
                cur.states.push_back(sc.state);
                self(self, sc.state);
                cur.actions.pop_back();
                cur.states.pop_back();
            }
    };
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
        if (!labels.is(s, StateLabel::Irrecoverable)) continue;
        cur.states = {s};
        cur.actions.clear();
        dfs(dfs, s);
    }
    return out;
}

struct DoomedBoundReport {
    bool passed = true;
    std::size_t trajectories = 0;
    std::size_t checks = 0;
    double min_slack = std::numeric_limits<double>::infinity();  // min of Q_safe - bound
    /// Trajectories of length exactly H on which the bound holds with equality
    /// (to 1e-12) at every index.
    std::size_t tight_trajectories = 0;
    std::size_t horizon_length_trajectories = 0;
    struct Witness {
        DoomedTrajectory trajectory;
        std::size_t index;
        double q_safe, bound;
    };
    std::optional<Witness> witness;
};

/// For each doomed trajectory, the exact Q_safe of a policy following its
/// actions is compared with gamma_safe^(H - t) at t = 0..|tau| (the final,
/// unsafe state has Q_safe = 1 under any action).
inline DoomedBoundReport check_doomed_bound(const TabularMDP& mdp, double gamma_safe) {
    const auto labels = require_horizon(mdp);
    const auto trajectories = enumerate_doomed_trajectories(mdp, labels);
    DoomedBoundReport rep;
    rep.trajectories = trajectories.size();
    const int h = mdp.h_star;
    for (const auto& tau : trajectories) {
        Policy pi(mdp.num_states, 0);
        for (std::size_t t = 0; t < tau.length(); ++t) pi[tau.states[t]] = tau.actions[t];
        const SafetyTable table = tabular_safety_critic(mdp, pi, gamma_safe);
        bool tight = true;
        for (std::size_t t = 0; t <= tau.length(); ++t) {
            const std::size_t a = t < tau.length() ? tau.actions[t] : 0;
            const double q = table.q[mdp.row(tau.states[t], a)];
            const double bound = std::pow(gamma_safe, h - static_cast<int>(t));
            ++rep.checks;
            rep.min_slack = std::min(rep.min_slack, q - bound);
            if (std::abs(q - bound) > 1e-12) tight = false;
            if (q < bound - 1e-12) {
                rep.passed = false;
                if (!rep.witness) rep.witness = DoomedBoundReport::Witness{tau, t, q, bound};
            }
        }
        if (static_cast<int>(tau.length()) == h) {
            ++rep.horizon_length_trajectories;
            if (tight) ++rep.tight_trajectories;
        }
    }
    return rep;
}

}  // namespace sorl
