#pragma once

// Safety-aware MDP abstraction shared by every module: hyperparameter bundle,
// transition record, environment interface.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sorl/errors.hpp"

namespace sorl {

using State = std::vector<double>;

/// A discrete action is an index; a box action is a vector in [-1,1]^dim.
struct Action {
    int index = -1;
    std::vector<double> values;

    static Action discrete(int i) { return Action{i, {}}; }
    static Action box(std::vector<double> v) { return Action{-1, std::move(v)}; }

    bool is_discrete() const noexcept { return index >= 0; }
    bool operator==(const Action&) const = default;
};

struct ActionSpace {
    enum class Kind { Discrete, Box };
    Kind kind = Kind::Discrete;
    int size = 0;  // action count (Discrete) or dimension (Box)

    bool discrete() const noexcept { return kind == Kind::Discrete; }
};

/// Hyperparameters of the safety-aware reward-penalty MDP.
struct SafetyParams {
    double gamma = 0.99;
    double gamma_safe = 0.85;
    int horizon_h_star = 10;
    double lambda = 1.0;
    double delta_target = 50.0;
    double penalty_c = 1.0;
    double r_min_emp = -0.01;
    double r_max_emp = 0.01;
    /// Clamp the attenuation factor (1 - lambda*q) at zero. Off by default.
    bool clamp_shaping_factor = false;

    /// Range and sign checks that do not depend on the penalty bound.
    void validate_basic() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0,1)");
        if (!(gamma_safe >= 0.0 && gamma_safe < 1.0))
            throw InputError("gamma_safe must lie in [0,1)");
        if (horizon_h_star < 1) throw InputError("horizon_h_star must be >= 1");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
        if (!(r_min_emp < 0.0 && r_max_emp > 0.0))
            throw InputError("reward range must satisfy r_min < 0 < r_max");
    }
};

/// One environment step as stored in the replay buffers.
struct Transition {
    State state;
    Action action;
    double reward_raw = 0.0;
    double reward_shaped = 0.0;
    int safety_signal = 0;
    State next_state;
    bool done = false;
    /// Episode ended on the time limit only; the next state is still bootstrapped.
    bool truncated = false;

    bool terminal() const noexcept { return done && !truncated; }
};

struct StepResult {
    State next_state;
    double reward = 0.0;
    int safety_signal = 0;
    bool done = false;
    bool truncated = false;
};

/// Environment contract. Safety is a deterministic function of the state and
/// every emitted reward lies in [reward_lower(), reward_upper()].
class Env {
public:
    virtual ~Env() = default;

    virtual std::string name() const = 0;
    virtual State reset() = 0;
    virtual StepResult step(const Action& action) = 0;

    /// 1 iff the state is in the unsafe set. Throws InputError on a malformed vector.
    virtual int safety_signal(std::span<const double> state) const = 0;

    virtual std::size_t state_dim() const = 0;
    virtual ActionSpace action_space() const = 0;
    virtual int h_star() const = 0;
    virtual int episode_cap() const = 0;
    virtual double reward_lower() const = 0;
    virtual double reward_upper() const = 0;
    virtual std::unique_ptr<Env> clone() const = 0;

    // Finite environments expose their state set for exact enumeration.
    virtual bool enumerable() const { return false; }
    virtual std::size_t num_states() const { throw UnsupportedError(name() + " has no finite state set"); }
    virtual State encode(std::size_t) const { throw UnsupportedError(name() + " has no finite state set"); }
    virtual std::size_t index_of(std::span<const double>) const {
        throw UnsupportedError(name() + " has no finite state set");
    }
    /// Places the environment in state s with a fresh episode clock.
    virtual void restore(std::size_t) { throw UnsupportedError(name() + " has no finite state set"); }
    /// Non-violating terminal states (goals, safe exits).
    virtual bool is_goal(std::size_t) const { return false; }
    virtual std::size_t initial_index() const { throw UnsupportedError(name() + " has no finite state set"); }
};

/// Sum_t gamma^t r_t. An empty sequence returns 0.
inline double discounted_return(std::span<const double> rewards, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0,1)");
    double total = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        total += discount * r;
        discount *= gamma;
    }
    return total;
}

}  // namespace sorl
