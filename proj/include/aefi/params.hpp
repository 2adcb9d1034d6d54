#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

#include "json.hpp"

namespace aefi {

using ParamValue = std::variant<std::int64_t, double, std::string>;

/// One hyperparameter assignment, ordered by name.
using Params = std::map<std::string, ParamValue>;

double get_real(const Params& params, const std::string& name, double fallback);
std::int64_t get_int(const Params& params, const std::string& name, std::int64_t fallback);
std::string get_string(const Params& params, const std::string& name, const std::string& fallback);

nlohmann::json to_json(const ParamValue& value);
ParamValue param_from_json(const nlohmann::json& value);
nlohmann::json to_json(const Params& params);
Params params_from_json(const nlohmann::json& doc);

std::string to_string(const ParamValue& value);
std::string to_string(const Params& params);

}  // namespace aefi
