#pragma once

// Deterministic desk-scale environments: a hazard grid with conveyor ("slip")
// cells, a doomed corridor with an exactly known violation horizon, and a
// point mass with a velocity limit and a wall.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sorl/config_reader.hpp"
#include "sorl/mdp.hpp"
#include "sorl/tabular.hpp"

namespace sorl {

namespace detail {

inline State one_hot(std::size_t n, std::size_t i) {
    State s(n, 0.0);
    s[i] = 1.0;
    return s;
}

inline std::size_t one_hot_index(std::span<const double> state, std::size_t n, const std::string& who) {
    if (state.size() != n) throw InputError(who + ": expected a state vector of size " + std::to_string(n));
    std::size_t hot = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (state[i] == 1.0) {
            if (hot != n) throw InputError(who + ": state is not one-hot");
            hot = i;
        } else if (state[i] != 0.0) {
            throw InputError(who + ": state is not one-hot");
        }
    }
    if (hot == n) throw InputError(who + ": state is not one-hot");
    return hot;
}

inline int discrete_action(const Action& a, int count, const std::string& who) {
    if (!a.is_discrete() || a.index >= count) throw InputError(who + ": invalid discrete action");
    return a.index;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// HazardGrid

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

enum class Direction : int { Up = 0, Right = 1, Down = 2, Left = 3 };

inline Direction parse_direction(const std::string& s) {
    if (s == "up") return Direction::Up;
    if (s == "right") return Direction::Right;
    if (s == "down") return Direction::Down;
    if (s == "left") return Direction::Left;
    throw ConfigError("unknown direction '" + s + "'");
}

struct HazardGridConfig {
    int width = 5;
    int height = 5;
    Cell start{0, 0};
    Cell goal{4, 4};
    std::set<Cell> hazards{{1, 1}, {3, 2}, {2, 3}};
    /// Conveyor cells: while standing on one, every action moves in its direction.
    std::vector<std::pair<Cell, Direction>> slips;
    double step_reward = -0.01;
    double goal_reward = 1.0;
    int max_steps = 200;
    int h_star = 10;

    /// 7x6 grid whose shortest route runs along a band of down-conveyors that
    /// feed a hazard row; a route one row further away costs two extra steps.
    static HazardGridConfig slippery() {
        HazardGridConfig c;
        c.width = 7;
        c.height = 6;
        c.start = {0, 2};
        c.goal = {6, 2};
        c.hazards.clear();
        c.slips.clear();
        for (int x = 1; x <= 5; ++x) {
            c.slips.push_back({{x, 3}, Direction::Down});
            c.slips.push_back({{x, 4}, Direction::Down});
            c.hazards.insert({x, 5});
        }
        return c;
    }
};

class HazardGrid final : public Env {
public:
    explicit HazardGrid(HazardGridConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.width < 1 || cfg_.height < 1) throw ConfigError("hazard_grid: width and height must be positive");
        auto inside = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < cfg_.width && c.y < cfg_.height; };
        if (!inside(cfg_.start) || !inside(cfg_.goal)) throw ConfigError("hazard_grid: start/goal outside grid");
        if (cfg_.start == cfg_.goal) throw ConfigError("hazard_grid: start equals goal");
        if (cfg_.max_steps < 1 || cfg_.h_star < 1) throw ConfigError("hazard_grid: max_steps and h_star must be >= 1");
        slip_.assign(num_states(), -1);
        hazard_.assign(num_states(), 0);
        for (const auto& h : cfg_.hazards) {
            if (!inside(h)) throw ConfigError("hazard_grid: hazard outside grid");
            if (h == cfg_.start || h == cfg_.goal) throw ConfigError("hazard_grid: hazard on start/goal");
            hazard_[index(h)] = 1;
        }
        for (const auto& [cell, dir] : cfg_.slips) {
            if (!inside(cell)) throw ConfigError("hazard_grid: slip cell outside grid");
            if (hazard_[index(cell)] || cell == cfg_.goal || cell == cfg_.start)
                throw ConfigError("hazard_grid: slip cell overlaps start/goal/hazard");
            slip_[index(cell)] = static_cast<int>(dir);
        }
        if (!(cfg_.step_reward < 0.0 || cfg_.goal_reward > 0.0))
            throw ConfigError("hazard_grid: rewards must not reward survival");
        check_slip_horizon();
        current_ = index(cfg_.start);
    }

    std::string name() const override { return "hazard_grid"; }
    const HazardGridConfig& config() const noexcept { return cfg_; }

    State reset() override {
        current_ = index(cfg_.start);
        steps_ = 0;
        return encode(current_);
    }

    StepResult step(const Action& action) override {
        const int a = detail::discrete_action(action, 4, "hazard_grid");
        if (terminal_index(current_)) throw InputError("hazard_grid: step after episode end");
        const Direction dir = slip_[current_] >= 0 ? static_cast<Direction>(slip_[current_]) : static_cast<Direction>(a);
        current_ = move(current_, dir);
        ++steps_;
        StepResult out;
        out.next_state = encode(current_);
        out.safety_signal = hazard_[current_];
        const bool at_goal = current_ == index(cfg_.goal);
        out.reward = at_goal ? cfg_.goal_reward : cfg_.step_reward;
        const bool terminal = out.safety_signal == 1 || at_goal;
        out.truncated = !terminal && steps_ >= cfg_.max_steps;
        out.done = terminal || out.truncated;
        return out;
    }

    int safety_signal(std::span<const double> state) const override {
        return hazard_[detail::one_hot_index(state, num_states(), "hazard_grid")];
    }

    std::size_t state_dim() const override { return num_states(); }
    ActionSpace action_space() const override { return {ActionSpace::Kind::Discrete, 4}; }
    int h_star() const override { return cfg_.h_star; }
    int episode_cap() const override { return cfg_.max_steps; }
    double reward_lower() const override { return std::min(cfg_.step_reward, cfg_.goal_reward); }
    double reward_upper() const override { return std::max(cfg_.step_reward, cfg_.goal_reward); }
    std::unique_ptr<Env> clone() const override { return std::make_unique<HazardGrid>(*this); }

    bool enumerable() const override { return true; }
    std::size_t num_states() const override { return static_cast<std::size_t>(cfg_.width * cfg_.height); }
    State encode(std::size_t s) const override { return detail::one_hot(num_states(), s); }
    std::size_t index_of(std::span<const double> state) const override {
        return detail::one_hot_index(state, num_states(), "hazard_grid");
    }
    void restore(std::size_t s) override {
        if (s >= num_states()) throw InputError("hazard_grid: state index out of range");
        current_ = s;
        steps_ = 0;
    }
    bool is_goal(std::size_t s) const override { return s == index(cfg_.goal); }
    std::size_t initial_index() const override { return index(cfg_.start); }

    std::size_t index(Cell c) const noexcept { return static_cast<std::size_t>(c.y * cfg_.width + c.x); }
    Cell cell(std::size_t s) const noexcept {
        return {static_cast<int>(s) % cfg_.width, static_cast<int>(s) / cfg_.width};
    }

private:
    bool terminal_index(std::size_t s) const { return hazard_[s] || is_goal(s); }

    std::size_t move(std::size_t s, Direction d) const {
        static constexpr std::array<int, 4> dx{0, 1, 0, -1};
        static constexpr std::array<int, 4> dy{-1, 0, 1, 0};
        Cell c = cell(s);
        const int nx = c.x + dx[static_cast<int>(d)];
        const int ny = c.y + dy[static_cast<int>(d)];
        if (nx < 0 || ny < 0 || nx >= cfg_.width || ny >= cfg_.height) return s;
        return index({nx, ny});
    }

    // A conveyor chain that ends in a hazard must do so within h_star steps.
    void check_slip_horizon() const {
        for (std::size_t s = 0; s < num_states(); ++s) {
            if (slip_[s] < 0) continue;
            std::size_t cur = s;
            int steps = 0;
            std::vector<std::uint8_t> visited(num_states(), 0);
            while (slip_[cur] >= 0 && !visited[cur]) {
                visited[cur] = 1;
                cur = move(cur, static_cast<Direction>(slip_[cur]));
                ++steps;
            }
            if (hazard_[cur] && steps > cfg_.h_star)
                throw ConfigError("hazard_grid: slip chain exceeds declared h_star");
        }
    }

    HazardGridConfig cfg_;
    std::vector<int> slip_;
    std::vector<std::uint8_t> hazard_;
    std::size_t current_ = 0;
    int steps_ = 0;
};

// ---------------------------------------------------------------------------
// DoomCorridor
//
// State 0 is the start. Action 0 takes the safe exit (state L+2, terminal).
// Action 1 enters a forced chain 1..L; chain state i violates after L+1-i
// steps whatever the agent does (state L+1 is the hazard).

struct DoomCorridorConfig {
    int length = 3;
    double doom_reward = 0.2;
    double safe_reward = 0.05;
    int max_steps = 200;
    int h_star = 10;
};

class DoomCorridor final : public Env {
public:
    explicit DoomCorridor(DoomCorridorConfig cfg) : cfg_(cfg) {
        if (cfg_.length < 1) throw ConfigError("doom_corridor: length must be >= 1");
        if (cfg_.h_star < 1 || cfg_.max_steps < 1) throw ConfigError("doom_corridor: max_steps and h_star must be >= 1");
        if (cfg_.length > cfg_.h_star) throw ConfigError("doom_corridor: length exceeds declared h_star");
    }

    std::string name() const override { return "doom_corridor"; }
    const DoomCorridorConfig& config() const noexcept { return cfg_; }

    std::size_t hazard_index() const noexcept { return static_cast<std::size_t>(cfg_.length + 1); }
    std::size_t exit_index() const noexcept { return static_cast<std::size_t>(cfg_.length + 2); }

    State reset() override {
        current_ = 0;
        steps_ = 0;
        return encode(current_);
    }

    StepResult step(const Action& action) override {
        const int a = detail::discrete_action(action, 2, "doom_corridor");
        if (current_ == hazard_index() || current_ == exit_index())
            throw InputError("doom_corridor: step after episode end");
        StepResult out;
        if (current_ == 0 && a == 0) {
            current_ = exit_index();
            out.reward = cfg_.safe_reward;
        } else {
            current_ += 1;
            out.reward = cfg_.doom_reward;
        }
        ++steps_;
        out.next_state = encode(current_);
        out.safety_signal = current_ == hazard_index() ? 1 : 0;
        const bool terminal = current_ == hazard_index() || current_ == exit_index();
        out.truncated = !terminal && steps_ >= cfg_.max_steps;
        out.done = terminal || out.truncated;
        return out;
    }

    int safety_signal(std::span<const double> state) const override {
        return detail::one_hot_index(state, num_states(), "doom_corridor") == hazard_index() ? 1 : 0;
    }

    std::size_t state_dim() const override { return num_states(); }
    ActionSpace action_space() const override { return {ActionSpace::Kind::Discrete, 2}; }
    int h_star() const override { return cfg_.h_star; }
    int episode_cap() const override { return cfg_.max_steps; }
    double reward_lower() const override { return std::min(cfg_.doom_reward, cfg_.safe_reward); }
    double reward_upper() const override { return std::max(cfg_.doom_reward, cfg_.safe_reward); }
    std::unique_ptr<Env> clone() const override { return std::make_unique<DoomCorridor>(*this); }

    bool enumerable() const override { return true; }
    std::size_t num_states() const override { return static_cast<std::size_t>(cfg_.length + 3); }
    State encode(std::size_t s) const override { return detail::one_hot(num_states(), s); }
    std::size_t index_of(std::span<const double> state) const override {
        return detail::one_hot_index(state, num_states(), "doom_corridor");
    }
    void restore(std::size_t s) override {
        if (s >= num_states()) throw InputError("doom_corridor: state index out of range");
        current_ = s;
        steps_ = 0;
    }
    bool is_goal(std::size_t s) const override { return s == exit_index(); }
    std::size_t initial_index() const override { return 0; }

private:
    DoomCorridorConfig cfg_;
    std::size_t current_ = 0;
    int steps_ = 0;
};

// ---------------------------------------------------------------------------
// PointVelocity
//
// Explicit Euler: x' = x + v dt, v' = v + a a_max dt, x clamped at 0 from the
// left. Violation iff |v'| > v_max or x' > wall. Reward v' dt (speed toward the
// wall), no survival bonus.
//
// With grid_size N > 0 the state lives on a lattice that is closed under the
// dynamics: dv = v_max / ((N-1)/2 - 1), a_max = dv/dt, dx = dv dt,
// wall = (N-2) dx, actions {-1, 0, +1}. Lattice points one step beyond the
// velocity limit and the wall are the unsafe states.

struct PointVelocityConfig {
    double v_max = 1.0;
    double a_max = 2.0;
    double wall = 2.0;
    double dt = 0.1;
    int max_steps = 400;
    int h_star = 0;  // 0: derive from braking analysis
    int grid_size = 0;
    bool random_start = false;

    /// Lattice parameters implied by grid_size (a_max and wall are overridden).
    PointVelocityConfig lattice() const {
        PointVelocityConfig c = *this;
        if (grid_size <= 0) return c;
        if (grid_size < 5 || grid_size % 2 == 0) throw ConfigError("point_velocity: grid_size must be odd and >= 5");
        const int half = (grid_size - 1) / 2;
        const double dv = v_max / (half - 1);
        c.a_max = dv / dt;
        c.wall = (grid_size - 2) * dv * dt;
        return c;
    }

    /// Full braking from v_max needs ceil(v_max / (a_max dt)) steps; the wall
    /// is crossed no later than that. One extra step covers the entry move.
    int braking_horizon() const {
        return static_cast<int>(std::ceil(v_max / (a_max * dt) - 1e-9)) + 1;
    }
};

class PointVelocity final : public Env {
public:
    PointVelocity(PointVelocityConfig cfg, std::uint64_t seed) : cfg_(cfg.lattice()), rng_(seed) {
        if (!(cfg_.v_max > 0 && cfg_.a_max > 0 && cfg_.wall > 0 && cfg_.dt > 0))
            throw ConfigError("point_velocity: v_max, a_max, wall, dt must be positive");
        if (cfg_.max_steps < 1) throw ConfigError("point_velocity: max_steps must be >= 1");
        const int braking = cfg_.braking_horizon();
        if (cfg_.h_star == 0) cfg_.h_star = braking;
        if (cfg_.h_star < braking) throw ConfigError("point_velocity: h_star below braking horizon");
        if (lattice_mode()) {
            half_ = (cfg_.grid_size - 1) / 2;
            dv_ = cfg_.v_max / (half_ - 1);
            dx_ = dv_ * cfg_.dt;
        }
        reset();
    }

    std::string name() const override { return "point_velocity"; }
    const PointVelocityConfig& config() const noexcept { return cfg_; }
    bool lattice_mode() const noexcept { return cfg_.grid_size > 0; }

    State reset() override {
        steps_ = 0;
        if (lattice_mode()) {
            j_ = 0;
            k_ = 0;
            if (cfg_.random_start) j_ = std::uniform_int_distribution<int>(0, (cfg_.grid_size - 2) / 4)(rng_);
            return lattice_state();
        }
        x_ = 0.0;
        v_ = 0.0;
        if (cfg_.random_start) x_ = std::uniform_real_distribution<double>(0.0, cfg_.wall / 4)(rng_);
        return {x_, v_};
    }

    StepResult step(const Action& action) override {
        StepResult out;
        if (lattice_mode()) {
            const int a = detail::discrete_action(action, 3, "point_velocity") - 1;
            if (unsafe_node(j_, k_)) throw InputError("point_velocity: step after episode end");
            int nj = j_ + k_;
            int nk = k_ + a;
            if (nj < 0) {
                nj = 0;
                nk = std::max(nk, 0);
            }
            j_ = std::min(nj, cfg_.grid_size - 1);
            k_ = std::clamp(nk, -half_, half_);
            out.next_state = lattice_state();
            out.reward = k_ * dv_ * cfg_.dt;
            out.safety_signal = unsafe_node(j_, k_) ? 1 : 0;
        } else {
            if (action.is_discrete() || action.values.size() != 1 || !std::isfinite(action.values[0]))
                throw InputError("point_velocity: expected a 1-d box action");
            if (violates(x_, v_)) throw InputError("point_velocity: step after episode end");
            const double a = std::clamp(action.values[0], -1.0, 1.0);
            double nx = x_ + v_ * cfg_.dt;
            double nv = v_ + a * cfg_.a_max * cfg_.dt;
            // Positions within roundoff of the left wall count as on it.
            if (nx < -1e-12 * std::max(1.0, cfg_.wall)) {
                nx = 0.0;
                nv = std::max(nv, 0.0);
            }
            nx = std::max(nx, 0.0);
            x_ = nx;
            v_ = nv;
            out.next_state = {x_, v_};
            out.reward = v_ * cfg_.dt;
            out.safety_signal = violates(x_, v_) ? 1 : 0;
        }
        ++steps_;
        out.truncated = out.safety_signal == 0 && steps_ >= cfg_.max_steps;
        out.done = out.safety_signal == 1 || out.truncated;
        return out;
    }

    int safety_signal(std::span<const double> state) const override {
        if (state.size() != 2 || !std::isfinite(state[0]) || !std::isfinite(state[1]))
            throw InputError("point_velocity: expected a finite (position, velocity) state");
        return violates(state[0], state[1]) ? 1 : 0;
    }

    std::size_t state_dim() const override { return 2; }
    ActionSpace action_space() const override {
        return lattice_mode() ? ActionSpace{ActionSpace::Kind::Discrete, 3} : ActionSpace{ActionSpace::Kind::Box, 1};
    }
    int h_star() const override { return cfg_.h_star; }
    int episode_cap() const override { return cfg_.max_steps; }
    double reward_lower() const override { return -reward_upper(); }
    double reward_upper() const override {
        return lattice_mode() ? half_ * dv_ * cfg_.dt : (cfg_.v_max + cfg_.a_max * cfg_.dt) * cfg_.dt;
    }
    std::unique_ptr<Env> clone() const override { return std::make_unique<PointVelocity>(*this); }

    bool enumerable() const override { return lattice_mode(); }
    std::size_t num_states() const override {
        require_lattice();
        return static_cast<std::size_t>(cfg_.grid_size) * cfg_.grid_size;
    }
    State encode(std::size_t s) const override {
        require_lattice();
        const auto [j, k] = node(s);
        return {j * dx_, k * dv_};
    }
    std::size_t index_of(std::span<const double> state) const override {
        require_lattice();
        if (state.size() != 2) throw InputError("point_velocity: expected a (position, velocity) state");
        const int j = static_cast<int>(std::lround(state[0] / dx_));
        const int k = static_cast<int>(std::lround(state[1] / dv_));
        if (j < 0 || j >= cfg_.grid_size || k < -half_ || k > half_) throw InputError("point_velocity: state off lattice");
        return static_cast<std::size_t>(j * cfg_.grid_size + (k + half_));
    }
    void restore(std::size_t s) override {
        require_lattice();
        if (s >= num_states()) throw InputError("point_velocity: state index out of range");
        std::tie(j_, k_) = node(s);
        steps_ = 0;
    }
    std::size_t initial_index() const override {
        require_lattice();
        return static_cast<std::size_t>(half_);
    }

    /// Sets the continuous state directly (used by rollout cross-checks).
    void set_continuous(double x, double v) {
        if (lattice_mode()) throw UnsupportedError("point_velocity: set_continuous on lattice env");
        x_ = x;
        v_ = v;
        steps_ = 0;
    }

private:
    bool violates(double x, double v) const {
        const double tol = 1e-9 * std::max(1.0, cfg_.v_max);
        return std::abs(v) > cfg_.v_max + tol || x > cfg_.wall + 1e-9 * std::max(1.0, cfg_.wall);
    }
    bool unsafe_node(int j, int k) const { return j >= cfg_.grid_size - 1 || std::abs(k) >= half_; }
    std::pair<int, int> node(std::size_t s) const {
        const int si = static_cast<int>(s);
        return {si / cfg_.grid_size, si % cfg_.grid_size - half_};
    }
    State lattice_state() const { return {j_ * dx_, k_ * dv_}; }
    void require_lattice() const {
        if (!lattice_mode()) throw UnsupportedError("point_velocity: continuous mode has no finite state set (set grid_size)");
    }

    PointVelocityConfig cfg_;
    std::mt19937_64 rng_;
    double x_ = 0.0, v_ = 0.0;
    int j_ = 0, k_ = 0;
    int half_ = 0;
    double dv_ = 0.0, dx_ = 0.0;
    int steps_ = 0;
};

// ---------------------------------------------------------------------------

namespace detail {

inline Cell parse_cell(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() < 2) throw ConfigError(where + ": expected [x, y]");
    return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace detail

/// Builds an environment by name. Unknown names or keys raise ConfigError.
///
/// hazard_grid keys: layout ("default" | "slippery"), width, height, start,
///   goal, hazards [[x,y],...], slips [[x,y,"down"],...], step_reward,
///   goal_reward, max_steps, h_star.
/// doom_corridor keys: length, doom_reward, safe_reward, max_steps, h_star.
/// point_velocity keys: v_max, a_max, wall, dt, max_steps, h_star, grid_size,
///   random_start.
inline std::unique_ptr<Env> make_env(const std::string& name, std::uint64_t seed, const Json& config = Json::object()) {
    try {
        ConfigReader in(config, name);
        if (name == "hazard_grid") {
            const std::string layout = in.get<std::string>("layout", "default");
            HazardGridConfig c;
            if (layout == "slippery") c = HazardGridConfig::slippery();
            else if (layout != "default") throw ConfigError("hazard_grid: unknown layout '" + layout + "'");
            c.width = in.get("width", c.width);
            c.height = in.get("height", c.height);
            if (in.has("start")) c.start = detail::parse_cell(in.raw("start"), "start");
            if (in.has("goal")) c.goal = detail::parse_cell(in.raw("goal"), "goal");
            if (in.has("hazards")) {
                c.hazards.clear();
                for (const auto& h : in.raw("hazards")) c.hazards.insert(detail::parse_cell(h, "hazards"));
            }
            if (in.has("slips")) {
                c.slips.clear();
                for (const auto& s : in.raw("slips")) {
                    if (!s.is_array() || s.size() != 3) throw ConfigError("slips: expected [x, y, direction]");
                    c.slips.push_back({detail::parse_cell(s, "slips"), parse_direction(s[2].get<std::string>())});
                }
            }
            c.step_reward = in.get("step_reward", c.step_reward);
            c.goal_reward = in.get("goal_reward", c.goal_reward);
            c.max_steps = in.get("max_steps", c.max_steps);
            c.h_star = in.get("h_star", c.h_star);
            in.finish();
            return std::make_unique<HazardGrid>(c);
        }
        if (name == "doom_corridor") {
            DoomCorridorConfig c;
            c.length = in.get("length", c.length);
            c.doom_reward = in.get("doom_reward", c.doom_reward);
            c.safe_reward = in.get("safe_reward", c.safe_reward);
            c.max_steps = in.get("max_steps", c.max_steps);
            c.h_star = in.get("h_star", c.h_star);
            in.finish();
            return std::make_unique<DoomCorridor>(c);
        }
        if (name == "point_velocity") {
            PointVelocityConfig c;
            c.v_max = in.get("v_max", c.v_max);
            c.a_max = in.get("a_max", c.a_max);
            c.wall = in.get("wall", c.wall);
            c.dt = in.get("dt", c.dt);
            c.max_steps = in.get("max_steps", c.max_steps);
            c.h_star = in.get("h_star", c.h_star);
            c.grid_size = in.get("grid_size", c.grid_size);
            c.random_start = in.get("random_start", c.random_start);
            in.finish();
            return std::make_unique<PointVelocity>(c, seed);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(name + ": " + e.what());
    }
    throw ConfigError("unknown environment '" + name + "'");
}

/// Exact tables of a finite environment, built by stepping it from every
/// (state, action). Terminal rows stay zero-reward self-loops.
inline TabularMDP enumerate_tabular(const Env& env) {
    if (!env.enumerable())
        throw UnsupportedError(env.name() + ": cannot enumerate (continuous env needs a discretization)");
    auto probe = env.clone();
    const std::size_t n = probe->num_states();
    const auto space = probe->action_space();
    if (!space.discrete()) throw UnsupportedError(env.name() + ": enumeration needs discrete actions");
    const std::size_t actions = static_cast<std::size_t>(space.size);
    TabularMDP mdp = TabularMDP::blank(n, actions, probe->h_star());
    mdp.initial_state = probe->initial_index();
    for (std::size_t s = 0; s < n; ++s) {
        mdp.unsafe[s] = static_cast<std::uint8_t>(probe->safety_signal(probe->encode(s)));
        mdp.terminal[s] = static_cast<std::uint8_t>(mdp.unsafe[s] || probe->is_goal(s));
    }
    for (std::size_t s = 0; s < n; ++s) {
        if (mdp.terminal[s]) continue;
        for (std::size_t a = 0; a < actions; ++a) {
            probe->restore(s);
            const StepResult r = probe->step(Action::discrete(static_cast<int>(a)));
            mdp.set_deterministic(s, a, probe->index_of(r.next_state), r.reward);
        }
    }
    mdp.validate();
    return mdp;
}

}  // namespace sorl
