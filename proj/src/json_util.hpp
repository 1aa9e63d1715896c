#pragma once

// Shared JSON helpers for io.cpp and commands.cpp. Not installed.

#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"
#include "netreg/simulation.hpp"

namespace netreg::detail {

using json = nlohmann::ordered_json;

// Non-finite doubles are stored as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double get_num(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json sim_config_to_json(const SimConfig& cfg);
/// Missing keys keep their defaults. Unknown keys are rejected.
SimConfig sim_config_from_json(const json& j);

}  // namespace netreg::detail
