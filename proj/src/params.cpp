#include "aefi/params.hpp"

#include <cmath>

#include "aefi/error.hpp"
#include "aefi/text.hpp"

namespace aefi {

double get_real(const Params& params, const std::string& name, double fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&it->second)) return *d;
    throw ValidationError("parameter '" + name + "' must be a number");
}

std::int64_t get_int(const Params& params, const std::string& name, std::int64_t fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    if (auto* d = std::get_if<double>(&it->second)) {
        if (std::floor(*d) == *d) return static_cast<std::int64_t>(*d);
    }
    throw ValidationError("parameter '" + name + "' must be an integer");
}

std::string get_string(const Params& params, const std::string& name, const std::string& fallback) {
    auto it = params.find(name);
    if (it == params.end()) return fallback;
    if (auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw ValidationError("parameter '" + name + "' must be a string");
}

nlohmann::json to_json(const ParamValue& value) {
    return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

ParamValue param_from_json(const nlohmann::json& value) {
    if (value.is_number_integer()) return value.get<std::int64_t>();
    if (value.is_number()) return value.get<double>();
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return static_cast<std::int64_t>(value.get<bool>());
    throw ValidationError("parameter values must be numbers or strings, got " + value.dump());
}

nlohmann::json to_json(const Params& params) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [k, v] : params) doc[k] = to_json(v);
    return doc;
}

Params params_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ValidationError("parameters must be a JSON object");
    Params params;
    for (const auto& [k, v] : doc.items()) params[k] = param_from_json(v);
    return params;
}

std::string to_string(const ParamValue& value) {
    if (auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
    if (auto* d = std::get_if<double>(&value)) return format_number(*d);
    return std::get<std::string>(value);
}

std::string to_string(const Params& params) {
    std::string out;
    for (const auto& [k, v] : params) {
        if (!out.empty()) out += ", ";
        out += k + "=" + to_string(v);
    }
    return out;
}

}  // namespace aefi
