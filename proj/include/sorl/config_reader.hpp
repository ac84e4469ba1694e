#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sorl/errors.hpp"

namespace sorl {

using Json = nlohmann::json;

/// Typed access to one JSON object section. Every key read is recorded so that
/// finish() can reject unknown keys.
class ConfigReader {
public:
    ConfigReader(const Json& section, std::string where) : section_(section), where_(std::move(where)) {
        if (!section_.is_null() && !section_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return section_.is_object() && section_.contains(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return section_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        static const Json null_json;
        if (!section_.is_object() || !section_.contains(key)) return null_json;
        return section_.at(key);
    }

    void finish() const {
        if (!section_.is_object()) return;
        for (const auto& item : section_.items())
            if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }

private:
    const Json& section_;
    std::string where_;
    std::set<std::string> seen_;
};

}  // namespace sorl
