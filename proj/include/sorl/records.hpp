#pragma once

// Per-episode run records and the lambda/C timeline, with their JSON line
// encodings. Field names are part of the log format (schema version 1).

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "sorl/errors.hpp"

namespace sorl {

inline constexpr int kLogSchemaVersion = 1;

using OrderedJson = nlohmann::ordered_json;

struct RunRecord {
    std::int64_t episode = 0;
    double episode_return = 0.0;     // undiscounted, raw environment reward
    double discounted_return = 0.0;  // discounted with gamma, raw reward
    std::int64_t violations_cumulative = 0;
    int episode_violation = 0;  // 1 when the episode ended in an unsafe state
    double failure_rate_cumulative = 0.0;
    std::int64_t length = 0;
    std::int64_t total_steps = 0;
    double lambda = 0.0;
    double penalty_c = 0.0;
    std::optional<double> delta_achieved;
    bool delta_attainable = true;
    double r_min_emp = 0.0;
    double r_max_emp = 0.0;
    double multiplier = 0.0;  // Lagrange multiplier (lagrangian only)
    double wall_clock = 0.0;
    std::uint64_t seed = 0;
    std::string algo;

    OrderedJson to_json() const {
        OrderedJson j;
        j["schema"] = kLogSchemaVersion;
        j["algo"] = algo;
        j["seed"] = seed;
        j["episode"] = episode;
        j["return"] = episode_return;
        j["discounted_return"] = discounted_return;
        j["violations_cumulative"] = violations_cumulative;
        j["episode_violation"] = episode_violation;
        j["failure_rate_cumulative"] = failure_rate_cumulative;
        j["length"] = length;
        j["total_steps"] = total_steps;
        j["lambda"] = lambda;
        j["penalty_c"] = penalty_c;
        j["delta_achieved"] = delta_achieved ? OrderedJson(*delta_achieved) : OrderedJson(nullptr);
        j["delta_attainable"] = delta_attainable;
        j["r_min_emp"] = r_min_emp;
        j["r_max_emp"] = r_max_emp;
        j["multiplier"] = multiplier;
        j["wall_clock"] = wall_clock;
        return j;
    }

    static RunRecord from_json(const nlohmann::json& j) {
        try {
            if (j.at("schema").get<int>() != kLogSchemaVersion) throw InputError("unsupported run record schema");
            RunRecord r;
            r.algo = j.at("algo").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.episode = j.at("episode").get<std::int64_t>();
            r.episode_return = j.at("return").get<double>();
            r.discounted_return = j.at("discounted_return").get<double>();
            r.violations_cumulative = j.at("violations_cumulative").get<std::int64_t>();
            r.episode_violation = j.at("episode_violation").get<int>();
            r.failure_rate_cumulative = j.at("failure_rate_cumulative").get<double>();
            r.length = j.at("length").get<std::int64_t>();
            r.total_steps = j.at("total_steps").get<std::int64_t>();
            r.lambda = j.at("lambda").get<double>();
            r.penalty_c = j.at("penalty_c").get<double>();
            if (!j.at("delta_achieved").is_null()) r.delta_achieved = j.at("delta_achieved").get<double>();
            r.delta_attainable = j.at("delta_attainable").get<bool>();
            r.r_min_emp = j.at("r_min_emp").get<double>();
            r.r_max_emp = j.at("r_max_emp").get<double>();
            r.multiplier = j.at("multiplier").get<double>();
            r.wall_clock = j.at("wall_clock").get<double>();
            return r;
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("malformed run record: ") + e.what());
        }
    }
};

/// A change of lambda, C or the reward range during training. The values hold
/// from `step` until the next entry.
struct TimelineEntry {
    std::int64_t step = 0;
    std::int64_t episode = 0;
    std::string reason;  // "init", "range", "periodic"
    double lambda = 0.0;
    double penalty_c = 0.0;
    double r_min_emp = 0.0;
    double r_max_emp = 0.0;
    double gamma = 0.0;
    int h_star = 0;
    std::optional<double> delta_achieved;
    bool delta_attainable = true;
    bool overridden = false;  // lambda or C fixed by configuration

    OrderedJson to_json() const {
        OrderedJson j;
        j["schema"] = kLogSchemaVersion;
        j["step"] = step;
        j["episode"] = episode;
        j["reason"] = reason;
        j["lambda"] = lambda;
        j["penalty_c"] = penalty_c;
        j["r_min_emp"] = r_min_emp;
        j["r_max_emp"] = r_max_emp;
        j["gamma"] = gamma;
        j["h_star"] = h_star;
        j["delta_achieved"] = delta_achieved ? OrderedJson(*delta_achieved) : OrderedJson(nullptr);
        j["delta_attainable"] = delta_attainable;
        j["overridden"] = overridden;
        return j;
    }

    static TimelineEntry from_json(const nlohmann::json& j) {
        try {
            TimelineEntry t;
            t.step = j.at("step").get<std::int64_t>();
            t.episode = j.at("episode").get<std::int64_t>();
            t.reason = j.at("reason").get<std::string>();
            t.lambda = j.at("lambda").get<double>();
            t.penalty_c = j.at("penalty_c").get<double>();
            t.r_min_emp = j.at("r_min_emp").get<double>();
            t.r_max_emp = j.at("r_max_emp").get<double>();
            t.gamma = j.at("gamma").get<double>();
            t.h_star = j.at("h_star").get<int>();
            if (!j.at("delta_achieved").is_null()) t.delta_achieved = j.at("delta_achieved").get<double>();
            t.delta_attainable = j.at("delta_attainable").get<bool>();
            t.overridden = j.at("overridden").get<bool>();
            return t;
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("malformed timeline entry: ") + e.what());
        }
    }
};

}  // namespace sorl
