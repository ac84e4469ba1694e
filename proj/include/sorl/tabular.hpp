#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sorl/errors.hpp"

namespace sorl {

struct Successor {
    std::size_t state = 0;
    double prob = 0.0;
};

/// Finite MDP with exact transition, reward and safety tables.
///
/// Rows are indexed by `s * num_actions + a`. Terminal rows are never expanded
/// by the solvers: goal states are worth zero, unsafe states carry the absorbing
/// penalty.
struct TabularMDP {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<std::vector<Successor>> transitions;
    std::vector<double> reward;       // r(s,a)
    std::vector<std::uint8_t> unsafe; // c(s)
    std::vector<std::uint8_t> terminal;
    std::size_t initial_state = 0;
    int h_star = 1;

    std::size_t row(std::size_t s, std::size_t a) const noexcept { return s * num_actions + a; }
    const std::vector<Successor>& next(std::size_t s, std::size_t a) const { return transitions[row(s, a)]; }
    double r(std::size_t s, std::size_t a) const { return reward[row(s, a)]; }
    bool is_unsafe(std::size_t s) const { return unsafe[s] != 0; }
    bool is_terminal(std::size_t s) const { return terminal[s] != 0; }

    /// Allocates tables with every row a self-loop of zero reward.
    static TabularMDP blank(std::size_t states, std::size_t actions, int h_star) {
        TabularMDP m;
        m.num_states = states;
        m.num_actions = actions;
        m.h_star = h_star;
        m.transitions.resize(states * actions);
        m.reward.assign(states * actions, 0.0);
        m.unsafe.assign(states, 0);
        m.terminal.assign(states, 0);
        for (std::size_t s = 0; s < states; ++s)
            for (std::size_t a = 0; a < actions; ++a) m.transitions[m.row(s, a)] = {{s, 1.0}};
        return m;
    }

    void set_deterministic(std::size_t s, std::size_t a, std::size_t next_state, double r) {
        transitions[row(s, a)] = {{next_state, 1.0}};
        reward[row(s, a)] = r;
    }

    /// Throws InputError when a table invariant is broken.
    void validate() const {
        if (num_states == 0 || num_actions == 0) throw InputError("empty tabular MDP");
        if (transitions.size() != num_states * num_actions || reward.size() != num_states * num_actions ||
            unsafe.size() != num_states || terminal.size() != num_states)
            throw InputError("tabular MDP tables have inconsistent sizes");
        if (initial_state >= num_states) throw InputError("initial state out of range");
        if (h_star < 1) throw InputError("h_star must be >= 1");
        for (std::size_t i = 0; i < transitions.size(); ++i) {
            double total = 0.0;
            for (const auto& succ : transitions[i]) {
                if (succ.state >= num_states) throw InputError("successor out of range in row " + std::to_string(i));
                if (!(succ.prob >= 0.0)) throw InputError("negative probability in row " + std::to_string(i));
                total += succ.prob;
            }
            if (std::abs(total - 1.0) > 1e-12) throw InputError("row " + std::to_string(i) + " does not sum to 1");
        }
        for (std::size_t s = 0; s < num_states; ++s) {
            if (unsafe[s] > 1) throw InputError("safety table must be binary");
            if (unsafe[s] && !terminal[s]) throw InputError("unsafe state " + std::to_string(s) + " is not terminal");
        }
    }
};

}  // namespace sorl
