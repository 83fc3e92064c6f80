#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "torus/asymptotics.hpp"
#include "torus/catalog.hpp"
#include "torus/center_chart.hpp"

namespace torus::cli {

/// One experiment. Precedence: built-in defaults, then the config file, then
/// command-line flags.
struct ExperimentConfig {
  std::string system;
  nlohmann::json params = nlohmann::json::object();
  std::optional<ode::State> initial;
  std::optional<double> t0;
  std::optional<double> t_end;
  double tol = 1e-10;
  int samples_per_decade = 40;
  /// Uniform sample count when the span is under a decade or starts at t <= 0.
  std::size_t samples = 401;
  bool attach_chart = false;
  ChartOptions chart;
  std::filesystem::path out = ".";
  std::string format = "csv";
};

/// Throws ConfigInvalid on unknown keys or bad types.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolved run: the catalog entry with overrides plus concrete t0, t_end and
/// initial state. Throws ConfigInvalid when t_end <= t0, t0 precedes the
/// entry's valid range, tol <= 0, or the initial state has the wrong size.
struct Resolved {
  catalog::CatalogEntry entry;
  double t0;
  double t_end;
  ode::State initial;
};
Resolved resolve(const ExperimentConfig& cfg);

std::vector<double> output_times(const ExperimentConfig& cfg, double t0, double t_end);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // NaN marks a missing value
};

std::string csv_text(const Table& table);
nlohmann::json table_json(const Table& table);
/// Writes CSV or JSON by cfg.format and returns the path.
std::filesystem::path write_table(const Table& table, const ExperimentConfig& cfg, const std::string& stem);

std::filesystem::path cmd_chart(const ExperimentConfig& cfg);
std::filesystem::path cmd_simulate(const ExperimentConfig& cfg);

struct AnalyzeOutput {
  AsymptoticsReport report;
  std::filesystem::path report_path;
  std::filesystem::path residual_path;
};
AnalyzeOutput cmd_analyze(const ExperimentConfig& cfg);

/// Plain-text table, or a JSON array when format is "json".
std::string cmd_list(const std::string& format);

}  // namespace torus::cli
