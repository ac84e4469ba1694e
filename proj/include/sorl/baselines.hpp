#pragma once

// Comparison learners on the shared backbone.

#include "sorl/agent.hpp"

namespace sorl {

/// Penalty-only shaping: r, or -C on a violation. C follows the reward range
/// unless `fixed_penalty` is set.
inline TrainResult train_sac_c(Env& env, AgentConfig cfg, std::uint64_t seed) {
    cfg.algo = Algorithm::SacC;
    return train(env, cfg, seed);
}

/// Reward r - mu c, with mu <- max(0, mu + lr (J_c - threshold)) after every
/// episode, J_c being the discounted episode cost.
inline TrainResult train_lagrangian(Env& env, AgentConfig cfg, std::uint64_t seed) {
    cfg.algo = Algorithm::Lagrangian;
    return train(env, cfg, seed);
}

inline TrainResult train_sorl(Env& env, AgentConfig cfg, std::uint64_t seed) {
    cfg.algo = Algorithm::Sorl;
    return train(env, cfg, seed);
}

}  // namespace sorl
