#pragma once

#include <json.hpp>

#include <initializer_list>
#include <string>

#include "sfmap/common.hpp"

namespace sfmap::detail {

using nlohmann::json;

/// Rejects unknown keys, naming the offending key and its context.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("unknown config key: " +
                              (ctx.empty() ? it.key() : ctx + "." + it.key()));
    }
}

inline Vec3 vec3_from(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(ctx + ": expected an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec3_to(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<T>();
}

}  // namespace sfmap::detail
