#include "json_text.hpp"

#include <cmath>

#include <fmt/format.h>

namespace torus::cli {

namespace {

void emit(const nlohmann::json& v, int depth, std::string& out) {
  const std::string pad(std::size_t(2 * (depth + 1)), ' ');
  const std::string close(std::size_t(2 * depth), ' ');
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(it.key()).dump() + ": ";
        emit(it.value(), depth + 1, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // flat numeric arrays stay on one line
      const bool flat = std::all_of(v.begin(), v.end(), [](const nlohmann::json& e) { return e.is_primitive(); });
      out += flat ? "[" : "[\n";
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += flat ? ", " : ",\n";
        first = false;
        if (!flat) out += pad;
        emit(e, depth + 1, out);
      }
      out += flat ? "]" : "\n" + close + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? fmt::format("{:.17g}", d) : "null";
      return;
    }
    default: out += v.dump(); return;
  }
}

}  // namespace

std::string json_text(const nlohmann::json& value) {
  std::string out;
  emit(value, 0, out);
  out += "\n";
  return out;
}

std::string number_text(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

}  // namespace torus::cli
