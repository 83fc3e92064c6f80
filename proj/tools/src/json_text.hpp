#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace torus::cli {

/// Deterministic JSON text: two-space indent, object keys in sorted order,
/// floats with 17 significant digits, non-finite numbers as null.
std::string json_text(const nlohmann::json& value);

/// "{:.17g}" with non-finite values spelled nan / inf / -inf.
std::string number_text(double v);

}  // namespace torus::cli
