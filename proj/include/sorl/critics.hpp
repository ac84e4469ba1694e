#pragma once

// Actor, twin reward critics and twin safety critics with their target copies,
// and the three soft actor-critic losses with analytic gradients.
//
// Discrete action spaces use a categorical actor and one critic output per
// action; the state value of the next state is the exact expectation under
// the actor. Box action spaces use a tanh-squashed Gaussian actor and critics
// on (state, action); next-state values use one sampled action.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sorl/mdp.hpp"
#include "sorl/nn.hpp"

namespace sorl {

struct CriticConfig {
    std::vector<int> hidden{64, 64};
    std::string activation = "tanh";
    double init_scale = 1.0;
    double lr_actor = 3e-4;
    double lr_critic = 3e-4;
    double lr_safety = 3e-4;
    double alpha = 0.1;  // entropy temperature, fixed
    double tau = 0.005;  // soft-update coefficient
    double log_std_min = -5.0;
    double log_std_max = 2.0;
};

/// A minibatch in column layout. `rewards` is whatever reward the reward
/// critics regress on (shaped reward, or r - mu c for the Lagrangian learner).
struct Batch {
    Matrix states;        // state_dim x B
    Matrix next_states;   // state_dim x B
    std::vector<int> actions;  // discrete
    Matrix action_values;      // action_dim x B (box)
    Vector rewards;
    Vector safety;    // c
    Vector terminal;  // 1 when the episode ended for a reason other than the time limit

    Eigen::Index size() const { return states.cols(); }
};

template <typename RewardFn>
Batch make_batch(const std::vector<const Transition*>& items, const ActionSpace& space, RewardFn reward_of) {
    if (items.empty()) throw InputError("empty batch");
    const auto n = static_cast<Eigen::Index>(items.size());
    const auto dim = static_cast<Eigen::Index>(items.front()->state.size());
    Batch b;
    b.states.resize(dim, n);
    b.next_states.resize(dim, n);
    b.rewards.resize(n);
    b.safety.resize(n);
    b.terminal.resize(n);
    if (space.discrete()) b.actions.resize(items.size());
    else b.action_values.resize(space.size, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Transition& t = *items[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(t.state.size()) != dim || static_cast<Eigen::Index>(t.next_state.size()) != dim)
            throw InputError("batch states have inconsistent dimensions");
        b.states.col(i) = Eigen::Map<const Vector>(t.state.data(), dim);
        b.next_states.col(i) = Eigen::Map<const Vector>(t.next_state.data(), dim);
        if (space.discrete()) {
            if (!t.action.is_discrete() || t.action.index >= space.size) throw InputError("batch action out of range");
            b.actions[static_cast<std::size_t>(i)] = t.action.index;
        } else {
            if (static_cast<int>(t.action.values.size()) != space.size) throw InputError("batch action has wrong dimension");
            b.action_values.col(i) = Eigen::Map<const Vector>(t.action.values.data(), space.size);
        }
        b.rewards(i) = reward_of(t);
        b.safety(i) = t.safety_signal;
        b.terminal(i) = t.terminal() ? 1.0 : 0.0;
    }
    return b;
}

inline Batch make_batch(const std::vector<const Transition*>& items, const ActionSpace& space) {
    return make_batch(items, space, [](const Transition& t) { return t.reward_shaped; });
}

class ApproximatorBundle {
public:
    ApproximatorBundle() = default;

    ApproximatorBundle(std::size_t state_dim, ActionSpace space, CriticConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), space_(space), state_dim_(static_cast<int>(state_dim)) {
        if (state_dim == 0 || space.size < 1) throw InputError("bundle needs positive state and action dimensions");
        std::mt19937_64 rng(seed);
        const int sd = state_dim_;
        const int critic_in = space_.discrete() ? sd : sd + space_.size;
        const int critic_out = space_.discrete() ? space_.size : 1;
        const int actor_out = space_.discrete() ? space_.size : 2 * space_.size;
        auto spec = [&](int in, int out, OutputHead head, double lr) {
            MLPSpec s;
            s.widths.push_back(in);
            for (int h : cfg_.hidden) s.widths.push_back(h);
            s.widths.push_back(out);
            s.activation = cfg_.activation;
            s.head = head;
            s.init_scale = cfg_.init_scale;
            s.learning_rate = lr;
            return s;
        };
        actor = Mlp(spec(sd, actor_out, OutputHead::Linear, cfg_.lr_actor), rng);
        q1 = Mlp(spec(critic_in, critic_out, OutputHead::Linear, cfg_.lr_critic), rng);
        q2 = Mlp(spec(critic_in, critic_out, OutputHead::Linear, cfg_.lr_critic), rng);
        qs1 = Mlp(spec(critic_in, critic_out, OutputHead::Sigmoid, cfg_.lr_safety), rng);
        qs2 = Mlp(spec(critic_in, critic_out, OutputHead::Sigmoid, cfg_.lr_safety), rng);
        q1_target = q1;
        q2_target = q2;
        qs1_target = qs1;
        qs2_target = qs2;
        opt_actor = Adam(static_cast<std::size_t>(actor.params().size()), cfg_.lr_actor);
        opt_q1 = Adam(static_cast<std::size_t>(q1.params().size()), cfg_.lr_critic);
        opt_q2 = Adam(static_cast<std::size_t>(q2.params().size()), cfg_.lr_critic);
        opt_qs1 = Adam(static_cast<std::size_t>(qs1.params().size()), cfg_.lr_safety);
        opt_qs2 = Adam(static_cast<std::size_t>(qs2.params().size()), cfg_.lr_safety);
    }

    const CriticConfig& config() const noexcept { return cfg_; }
    const ActionSpace& action_space() const noexcept { return space_; }
    int state_dim() const noexcept { return state_dim_; }
    bool discrete() const noexcept { return space_.discrete(); }

    Mlp actor, q1, q2, q1_target, q2_target, qs1, qs2, qs1_target, qs2_target;
    Adam opt_actor, opt_q1, opt_q2, opt_qs1, opt_qs2;

    // ---- helpers on column batches -------------------------------------

    Matrix critic_input(const Matrix& states, const Matrix& actions) const {
        Matrix x(states.rows() + actions.rows(), states.cols());
        x << states, actions;
        return x;
    }

    /// Row-wise categorical probabilities and log-probabilities from logits.
    static void softmax(const Matrix& logits, Matrix& probs, Matrix& log_probs) {
        log_probs = logits;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const double m = logits.col(c).maxCoeff();
            const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
            log_probs.col(c).array() -= lse;
        }
        probs = log_probs.array().exp().matrix();
    }

    struct GaussianHead {
        Matrix mean, raw_log_std, log_std, std;
    };

    GaussianHead gaussian(const Matrix& out) const {
        const int d = space_.size;
        GaussianHead g;
        g.mean = out.topRows(d);
        g.raw_log_std = out.bottomRows(d);
        const double lo = cfg_.log_std_min, hi = cfg_.log_std_max;
        g.log_std = (lo + 0.5 * (hi - lo) * (g.raw_log_std.array().tanh() + 1.0)).matrix();
        g.std = g.log_std.array().exp().matrix();
        return g;
    }

    // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
    static double log_one_minus_tanh_sq(double u) {
        const double z = -2.0 * u;
        const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        return 2.0 * (std::numbers::ln2 - u - softplus);
    }

    /// Squashed Gaussian sample with given standard-normal noise; returns the
    /// actions and fills per-sample log-probabilities.
    Matrix squashed_sample(const GaussianHead& g, const Matrix& noise, Vector& log_prob, Matrix* pre_tanh = nullptr) const {
        const Matrix u = g.mean + g.std.cwiseProduct(noise);
        const Matrix a = u.array().tanh().matrix();
        log_prob.resize(u.cols());
        const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            double lp = 0.0;
            for (Eigen::Index r = 0; r < u.rows(); ++r)
                lp += -0.5 * noise(r, c) * noise(r, c) - g.log_std(r, c) - half_log_2pi - log_one_minus_tanh_sq(u(r, c));
            log_prob(c) = lp;
        }
        if (pre_tanh) *pre_tanh = u;
        return a;
    }

    Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) const {
        std::normal_distribution<double> n(0.0, 1.0);
        Matrix m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
        return m;
    }

    // ---- acting ----------------------------------------------------------

    Matrix column(const State& s) const {
        if (static_cast<int>(s.size()) != state_dim_) throw InputError("state has wrong dimension");
        return Eigen::Map<const Vector>(s.data(), state_dim_);
    }

    Action sample_action(const State& s, std::mt19937_64& rng) const {
        const Matrix out = actor.forward(column(s));
        if (discrete()) {
            Matrix p, lp;
            softmax(out, p, lp);
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double acc = 0.0;
            for (int a = 0; a < space_.size; ++a) {
                acc += p(a, 0);
                if (u < acc) return Action::discrete(a);
            }
            return Action::discrete(space_.size - 1);
        }
        const auto g = gaussian(out);
        Vector lp;
        const Matrix a = squashed_sample(g, standard_normal(space_.size, 1, rng), lp);
        return Action::box(std::vector<double>(a.data(), a.data() + a.size()));
    }

    /// Mode of the actor: argmax logit, or tanh of the Gaussian mean.
    Action greedy_action(const State& s) const {
        const Matrix out = actor.forward(column(s));
        if (discrete()) {
            Eigen::Index best = 0;
            out.col(0).maxCoeff(&best);
            return Action::discrete(static_cast<int>(best));
        }
        const Matrix a = gaussian(out).mean.array().tanh().matrix();
        return Action::box(std::vector<double>(a.data(), a.data() + a.size()));
    }

    Action random_action(std::mt19937_64& rng) const {
        if (discrete()) return Action::discrete(std::uniform_int_distribution<int>(0, space_.size - 1)(rng));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> v(static_cast<std::size_t>(space_.size));
        for (auto& x : v) x = u(rng);
        return Action::box(std::move(v));
    }

    /// Per-sample output of a (state, action)-indexed network.
    Vector evaluate(const Mlp& net, const Matrix& states, const std::vector<int>& actions, const Matrix& action_values) const {
        if (discrete()) {
            const Matrix out = net.forward(states);
            Vector v(states.cols());
            for (Eigen::Index i = 0; i < states.cols(); ++i) v(i) = out(actions[static_cast<std::size_t>(i)], i);
            return v;
        }
        return net.forward(critic_input(states, action_values)).row(0).transpose();
    }

    /// max of the two online safety critics at (s,a), clamped to [0,1].
    double safety_estimate(const State& s, const Action& a) const {
        const Matrix x = column(s);
        double q1v, q2v;
        if (discrete()) {
            if (!a.is_discrete() || a.index >= space_.size) throw InputError("safety_estimate: invalid action");
            q1v = qs1.forward(x)(a.index, 0);
            q2v = qs2.forward(x)(a.index, 0);
        } else {
            if (static_cast<int>(a.values.size()) != space_.size) throw InputError("safety_estimate: action has wrong dimension");
            const Matrix in = critic_input(x, Eigen::Map<const Vector>(a.values.data(), space_.size));
            q1v = qs1.forward(in)(0, 0);
            q2v = qs2.forward(in)(0, 0);
        }
        return std::clamp(std::max(q1v, q2v), 0.0, 1.0);
    }

    // ---- targets ---------------------------------------------------------

    /// Soft state value of the next states under the target reward critics.
    Vector next_soft_value(const Matrix& next_states, std::mt19937_64& rng) const {
        const Matrix out = actor.forward(next_states);
        if (discrete()) {
            Matrix p, lp;
            softmax(out, p, lp);
            const Matrix qmin = q1_target.forward(next_states).cwiseMin(q2_target.forward(next_states));
            return (p.cwiseProduct(qmin - cfg_.alpha * lp)).colwise().sum().transpose();
        }
        const auto g = gaussian(out);
        Vector lp;
        const Matrix a = squashed_sample(g, standard_normal(space_.size, next_states.cols(), rng), lp);
        const Matrix in = critic_input(next_states, a);
        const Vector qmin = q1_target.forward(in).row(0).cwiseMin(q2_target.forward(in).row(0)).transpose();
        return qmin - cfg_.alpha * lp;
    }

    /// E_{a'~pi} max(Qs1', Qs2')(s', a'); one sampled action for box spaces.
    Vector next_safety_value(const Matrix& next_states, std::mt19937_64& rng) const {
        const Matrix out = actor.forward(next_states);
        if (discrete()) {
            Matrix p, lp;
            softmax(out, p, lp);
            const Matrix qmax = qs1_target.forward(next_states).cwiseMax(qs2_target.forward(next_states));
            return p.cwiseProduct(qmax).colwise().sum().transpose();
        }
        const auto g = gaussian(out);
        Vector lp;
        const Matrix a = squashed_sample(g, standard_normal(space_.size, next_states.cols(), rng), lp);
        const Matrix in = critic_input(next_states, a);
        return qs1_target.forward(in).row(0).cwiseMax(qs2_target.forward(in).row(0)).transpose();
    }

private:
    CriticConfig cfg_;
    ActionSpace space_;
    int state_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Targets

struct RewardTargetOptions {
    double gamma = 0.99;
    /// Violations are absorbing: the stored reward repeats forever, so the
    /// target is r / (1 - gamma). Otherwise violations are plain terminals.
    bool absorbing_violation = true;
};

inline Vector reward_critic_targets(const Batch& b, const ApproximatorBundle& bundle, const RewardTargetOptions& opt,
                                    std::mt19937_64& rng) {
    const Vector v_next = bundle.next_soft_value(b.next_states, rng);
    Vector y(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        if (opt.absorbing_violation && b.safety(i) == 1.0) y(i) = b.rewards(i) / (1.0 - opt.gamma);
        else y(i) = b.rewards(i) + opt.gamma * (1.0 - b.terminal(i)) * v_next(i);
    }
    return y;
}

/// c + (1 - c) gamma_safe V_safe(s'), clamped to [0,1].
inline double safety_backup(double c, double gamma_safe, double next_value) {
    return std::clamp(c + (1.0 - c) * gamma_safe * next_value, 0.0, 1.0);
}

/// Backup for a stored transition. Stored transitions start in a safe state
/// (episodes end on a violation), and `next_unsafe` is the safety signal of
/// the successor: an unsafe successor has failure value 1, a goal terminal 0.
inline double safety_target_value(bool next_unsafe, bool terminal, double gamma_safe, double next_value) {
    if (next_unsafe) return safety_backup(0.0, gamma_safe, 1.0);
    if (terminal) return 0.0;
    return safety_backup(0.0, gamma_safe, next_value);
}

inline Vector safety_critic_targets(const Batch& b, const ApproximatorBundle& bundle, double gamma_safe,
                                    std::mt19937_64& rng) {
    const Vector v_next = bundle.next_safety_value(b.next_states, rng);
    Vector y(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i)
        y(i) = safety_target_value(b.safety(i) == 1.0, b.terminal(i) == 1.0, gamma_safe, v_next(i));
    return y;
}

/// Single-transition form of the safety target.
inline double safety_critic_target(const Transition& t, const ApproximatorBundle& bundle, const SafetyParams& params,
                                   std::mt19937_64& rng) {
    if (t.safety_signal == 1 || t.terminal())
        return safety_target_value(t.safety_signal == 1, t.terminal(), params.gamma_safe, 0.0);
    const Matrix next = bundle.column(t.next_state);
    return safety_target_value(false, false, params.gamma_safe, bundle.next_safety_value(next, rng)(0));
}

// ---------------------------------------------------------------------------
// Losses. Each returns the loss and adds its gradient into the grads() of the
// networks it trains (callers zero them first).

/// mean_i 0.5 [(Q1 - y)^2 + (Q2 - y)^2]
inline double twin_regression_loss(ApproximatorBundle& bundle, Mlp& n1, Mlp& n2, const Batch& b, const Vector& y) {
    const double inv = 1.0 / static_cast<double>(b.size());
    double loss = 0.0;
    for (Mlp* net : {&n1, &n2}) {
        Mlp::Tape tape;
        if (bundle.discrete()) {
            const Matrix out = net->forward(b.states, tape);
            Matrix d = Matrix::Zero(out.rows(), out.cols());
            for (Eigen::Index i = 0; i < b.size(); ++i) {
                const int a = b.actions[static_cast<std::size_t>(i)];
                const double err = out(a, i) - y(i);
                loss += 0.5 * err * err * inv;
                d(a, i) = err * inv;
            }
            net->backward(tape, d);
        } else {
            const Matrix out = net->forward(bundle.critic_input(b.states, b.action_values), tape);
            const Matrix err = out - y.transpose();
            loss += 0.5 * err.squaredNorm() * inv;
            net->backward(tape, err * inv);
        }
    }
    return loss;
}

inline double reward_critic_loss(ApproximatorBundle& bundle, const Batch& b, const Vector& y) {
    return twin_regression_loss(bundle, bundle.q1, bundle.q2, b, y);
}

inline double safety_critic_loss(ApproximatorBundle& bundle, const Batch& b, const Vector& y) {
    return twin_regression_loss(bundle, bundle.qs1, bundle.qs2, b, y);
}

/// Discrete: mean_s sum_a pi(a|s) (alpha log pi(a|s) - min Q(s,a)).
/// Box: mean_s alpha log pi(a|s) - min Q(s,a), a = tanh(mu + sigma noise).
/// Critics are held fixed. `noise` is ignored for discrete actors.
inline double actor_loss(ApproximatorBundle& bundle, const Matrix& states, const Matrix& noise) {
    const double alpha = bundle.config().alpha;
    const double inv = 1.0 / static_cast<double>(states.cols());
    Mlp::Tape tape;
    const Matrix out = bundle.actor.forward(states, tape);
    if (bundle.discrete()) {
        Matrix p, lp;
        ApproximatorBundle::softmax(out, p, lp);
        const Matrix qmin = bundle.q1.forward(states).cwiseMin(bundle.q2.forward(states));
        const Matrix f = alpha * lp - qmin;
        double loss = 0.0;
        Matrix d(out.rows(), out.cols());
        for (Eigen::Index i = 0; i < states.cols(); ++i) {
            const double mean_f = p.col(i).dot(f.col(i));
            loss += mean_f * inv;
            d.col(i) = inv * p.col(i).cwiseProduct(f.col(i).array().matrix() - Vector::Constant(f.rows(), mean_f));
        }
        bundle.actor.backward(tape, d);
        return loss;
    }
    const int dim = bundle.action_space().size;
    const auto g = bundle.gaussian(out);
    Vector lp;
    Matrix u;
    const Matrix a = bundle.squashed_sample(g, noise, lp, &u);
    const Matrix in = bundle.critic_input(states, a);
    Mlp::Tape t1, t2;
    const Matrix v1 = bundle.q1.forward(in, t1);
    const Matrix v2 = bundle.q2.forward(in, t2);
    const Eigen::Index n = states.cols();
    Matrix pick1 = Matrix::Zero(1, n), pick2 = Matrix::Zero(1, n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool first = v1(0, i) <= v2(0, i);
        loss += inv * (alpha * lp(i) - (first ? v1(0, i) : v2(0, i)));
        (first ? pick1 : pick2)(0, i) = -inv;
    }
    // dL/da through the smaller critic (critic parameters untouched).
    const Matrix dx = bundle.q1.backward(t1, pick1, false) + bundle.q2.backward(t2, pick2, false);
    const Matrix dl_da = dx.bottomRows(dim);
    const double lo = bundle.config().log_std_min, hi = bundle.config().log_std_max;
    Matrix d(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (int r = 0; r < dim; ++r) {
            const double th = std::tanh(u(r, i));
            const double g_u = inv * alpha * 2.0 * th + dl_da(r, i) * (1.0 - th * th);
            const double g_log_std = g_u * g.std(r, i) * noise(r, i) - inv * alpha;
            const double traw = std::tanh(g.raw_log_std(r, i));
            d(r, i) = g_u;
            d(dim + r, i) = g_log_std * 0.5 * (hi - lo) * (1.0 - traw * traw);
        }
    bundle.actor.backward(tape, d);
    return loss;
}

// ---------------------------------------------------------------------------

struct LossStats {
    double critic = 0.0;
    double actor = 0.0;
    double safety = 0.0;
    bool safety_updated = false;
};

inline std::string describe(const ApproximatorBundle& b, const LossStats& s) {
    std::ostringstream out;
    out << "critic_loss=" << s.critic << " actor_loss=" << s.actor << " safety_loss=" << s.safety
        << " actor_finite=" << b.actor.finite() << " q1_finite=" << b.q1.finite() << " q2_finite=" << b.q2.finite()
        << " qs1_finite=" << b.qs1.finite() << " qs2_finite=" << b.qs2.finite();
    return out.str();
}

/// One gradient step on the reward critics and the actor (reward batch), then
/// optionally on the safety critics (safety batch), then soft target updates.
/// Reward-side and safety-side randomness come from separate generators.
inline LossStats update_critics(ApproximatorBundle& bundle, const Batch& reward_batch, const Batch* safety_batch,
                                const RewardTargetOptions& reward_opt, double gamma_safe,
                                std::mt19937_64& reward_rng, std::mt19937_64& safety_rng) {
    if (reward_batch.size() == 0) throw InputError("update_critics: empty batch");
    LossStats stats;
    const Vector y = reward_critic_targets(reward_batch, bundle, reward_opt, reward_rng);
    bundle.q1.zero_grad();
    bundle.q2.zero_grad();
    stats.critic = reward_critic_loss(bundle, reward_batch, y);
    if (!std::isfinite(stats.critic)) throw TrainingFault("non-finite reward-critic loss", describe(bundle, stats));
    bundle.opt_q1.step(bundle.q1.params(), bundle.q1.grads());
    bundle.opt_q2.step(bundle.q2.params(), bundle.q2.grads());

    Matrix noise;
    if (!bundle.discrete())
        noise = bundle.standard_normal(bundle.action_space().size, reward_batch.size(), reward_rng);
    bundle.actor.zero_grad();
    stats.actor = actor_loss(bundle, reward_batch.states, noise);
    if (!std::isfinite(stats.actor)) throw TrainingFault("non-finite actor loss", describe(bundle, stats));
    bundle.opt_actor.step(bundle.actor.params(), bundle.actor.grads());

    if (safety_batch && safety_batch->size() > 0) {
        const Vector ys = safety_critic_targets(*safety_batch, bundle, gamma_safe, safety_rng);
        bundle.qs1.zero_grad();
        bundle.qs2.zero_grad();
        stats.safety = safety_critic_loss(bundle, *safety_batch, ys);
        if (!std::isfinite(stats.safety)) throw TrainingFault("non-finite safety-critic loss", describe(bundle, stats));
        bundle.opt_qs1.step(bundle.qs1.params(), bundle.qs1.grads());
        bundle.opt_qs2.step(bundle.qs2.params(), bundle.qs2.grads());
        stats.safety_updated = true;
    }

    const double tau = bundle.config().tau;
    bundle.q1_target.soft_update_from(bundle.q1, tau);
    bundle.q2_target.soft_update_from(bundle.q2, tau);
    if (stats.safety_updated) {
        bundle.qs1_target.soft_update_from(bundle.qs1, tau);
        bundle.qs2_target.soft_update_from(bundle.qs2, tau);
    }
    if (!bundle.actor.finite() || !bundle.q1.finite() || !bundle.q2.finite() || !bundle.qs1.finite() ||
        !bundle.qs2.finite())
        throw TrainingFault("non-finite parameters after update", describe(bundle, stats));
    return stats;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian layout:
//   magic "SORLCKPT" (8 bytes), u32 version (=1), u32 array count,
//   then per array: u32 name length, name bytes, u32 rows, u32 cols,
//   rows*cols f64 values in column-major order.
// Arrays are named "<net>.<layer>.W" (out x in) and "<net>.<layer>.b" (out x 1)
// for net in actor, q1, q2, q1_target, q2_target, qs1, qs2, qs1_target, qs2_target.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::vector<std::pair<std::string, Mlp*>> named_nets(ApproximatorBundle& b) {
    return {{"actor", &b.actor}, {"q1", &b.q1}, {"q2", &b.q2}, {"q1_target", &b.q1_target},
            {"q2_target", &b.q2_target}, {"qs1", &b.qs1}, {"qs2", &b.qs2}, {"qs1_target", &b.qs1_target},
            {"qs2_target", &b.qs2_target}};
}

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw InputError("checkpoint truncated");
    return v;
}

}  // namespace detail

inline void save_checkpoint(ApproximatorBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open checkpoint for writing: " + path);
    out.write("SORLCKPT", 8);
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    auto nets = detail::named_nets(bundle);
    std::uint32_t count = 0;
    for (auto& [name, net] : nets) count += static_cast<std::uint32_t>(2 * net->layers());
    detail::put<std::uint32_t>(out, count);
    auto write_array = [&](const std::string& name, const double* data, Eigen::Index rows, Eigen::Index cols) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cols));
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(double) * rows * cols));
    };
    for (auto& [name, net] : nets)
        for (std::size_t l = 0; l < net->layers(); ++l) {
            const auto w = std::as_const(*net).weight(l);
            const auto b = std::as_const(*net).bias(l);
            write_array(name + "." + std::to_string(l) + ".W", w.data(), w.rows(), w.cols());
            write_array(name + "." + std::to_string(l) + ".b", b.data(), b.rows(), 1);
        }
    if (!out) throw InputError("failed writing checkpoint: " + path);
}

/// Loads parameters into a bundle of identical architecture.
inline void load_checkpoint(ApproximatorBundle& bundle, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "SORLCKPT") throw InputError("not a checkpoint file: " + path);
    const auto version = detail::take<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
    const auto count = detail::take<std::uint32_t>(in);
    std::map<std::string, Matrix> arrays;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = detail::take<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rows = detail::take<std::uint32_t>(in);
        const auto cols = detail::take<std::uint32_t>(in);
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) throw InputError("checkpoint truncated");
        arrays[name] = std::move(m);
    }
    for (auto& [name, net] : detail::named_nets(bundle))
        for (std::size_t l = 0; l < net->layers(); ++l) {
            const std::string base = name + "." + std::to_string(l);
            auto w = arrays.find(base + ".W");
            auto b = arrays.find(base + ".b");
            if (w == arrays.end() || b == arrays.end()) throw InputError("checkpoint missing array " + base);
            if (w->second.rows() != net->out(l) || w->second.cols() != net->in(l) || b->second.rows() != net->out(l))
                throw InputError("checkpoint shape mismatch for " + base);
            net->weight(l) = w->second;
            net->bias(l) = b->second.col(0);
        }
}

}  // namespace sorl
