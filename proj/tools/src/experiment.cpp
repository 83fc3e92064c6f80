#include "experiment.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "json_text.hpp"
#include "torus/error.hpp"
#include "torus/pipeline.hpp"

namespace torus::cli {

using nlohmann::json;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

template <class T>
T field(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    bad(fmt::format("config key '{}' has the wrong type", key));
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) bad(fmt::format("cannot write {}", path.string()));
  f << text;
}

std::string stem_for(const ExperimentConfig& cfg, const std::string& what) { return cfg.system + "_" + what; }

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) bad("config must be a JSON object");
  static const std::set<std::string> known = {"system", "params", "initial", "t0", "t_end", "tol",
                                              "samples_per_decade", "samples", "attach_chart", "chart", "out",
                                              "format"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) bad(fmt::format("unknown config key '{}'", key));
  }
  ExperimentConfig cfg;
  if (doc.contains("system")) cfg.system = field<std::string>(doc, "system");
  if (doc.contains("params")) {
    cfg.params = doc["params"];
    if (!cfg.params.is_object()) bad("'params' must be an object");
  }
  if (doc.contains("initial")) {
    const auto v = field<std::vector<double>>(doc, "initial");
    cfg.initial = Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
  }
  if (doc.contains("t0")) cfg.t0 = field<double>(doc, "t0");
  if (doc.contains("t_end")) cfg.t_end = field<double>(doc, "t_end");
  if (doc.contains("tol")) cfg.tol = field<double>(doc, "tol");
  if (doc.contains("samples_per_decade")) cfg.samples_per_decade = field<int>(doc, "samples_per_decade");
  if (doc.contains("samples")) cfg.samples = field<std::size_t>(doc, "samples");
  if (doc.contains("attach_chart")) cfg.attach_chart = field<bool>(doc, "attach_chart");
  if (doc.contains("out")) cfg.out = field<std::string>(doc, "out");
  if (doc.contains("format")) cfg.format = field<std::string>(doc, "format");
  if (doc.contains("chart")) {
    const json& c = doc["chart"];
    if (!c.is_object()) bad("'chart' must be an object");
    for (const auto& [key, _] : c.items()) {
      static const std::set<std::string> chart_keys = {"tol", "grid_points", "first_period_cap", "period_cap_factor",
                                                       "transversal_max_time", "orbit_cache_capacity"};
      if (!chart_keys.count(key)) bad(fmt::format("unknown chart option '{}'", key));
    }
    if (c.contains("tol")) cfg.chart.tol = field<double>(c, "tol");
    if (c.contains("grid_points")) cfg.chart.grid_points = field<std::size_t>(c, "grid_points");
    if (c.contains("first_period_cap")) cfg.chart.first_period_cap = field<double>(c, "first_period_cap");
    if (c.contains("period_cap_factor")) cfg.chart.period_cap_factor = field<double>(c, "period_cap_factor");
    if (c.contains("transversal_max_time")) cfg.chart.transversal_max_time = field<double>(c, "transversal_max_time");
    if (c.contains("orbit_cache_capacity")) {
      cfg.chart.orbit_cache_capacity = field<std::size_t>(c, "orbit_cache_capacity");
    }
  }
  if (cfg.format != "csv" && cfg.format != "json") bad(fmt::format("format must be csv or json, got '{}'", cfg.format));
  if (cfg.samples_per_decade < 4) bad("samples_per_decade must be at least 4");
  if (cfg.samples < 2) bad("samples must be at least 2");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) bad(fmt::format("cannot read config {}", path.string()));
  try {
    return config_from_json(json::parse(f));
  } catch (const json::parse_error& e) {
    bad(fmt::format("config {} is not valid JSON: {}", path.string(), e.what()));
  }
}

Resolved resolve(const ExperimentConfig& cfg) {
  if (cfg.system.empty()) bad("no system given");
  Resolved r{catalog::make(cfg.system, cfg.params), 0.0, 0.0, {}};
  r.t0 = cfg.t0.value_or(r.entry.default_t0);
  r.t_end = cfg.t_end.value_or(r.entry.default_t_end);
  r.initial = cfg.initial.value_or(r.entry.default_initial);
  if (!(cfg.tol > 0.0)) bad(fmt::format("tol must be positive, got {}", cfg.tol));
  if (!(r.t_end > r.t0)) bad(fmt::format("t_end = {} must exceed t0 = {}", r.t_end, r.t0));
  if (r.t0 < r.entry.t_min) {
    bad(fmt::format("t0 = {} lies before the valid range of '{}', which starts at {}", r.t0, r.entry.id, r.entry.t_min));
  }
  if (r.t_end > r.entry.t_max) bad(fmt::format("t_end = {} lies beyond the valid range", r.t_end));
  if (std::size_t(r.initial.size()) != r.entry.dimension()) {
    bad(fmt::format("initial state has {} components, '{}' needs {}", r.initial.size(), r.entry.id,
                    r.entry.dimension()));
  }
  return r;
}

std::vector<double> output_times(const ExperimentConfig& cfg, double t0, double t_end) {
  if (t0 > 0.0 && t_end / t0 >= 10.0) return sample_times(t0, t_end, cfg.samples_per_decade);
  std::vector<double> ts;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    ts.push_back(i + 1 == cfg.samples ? t_end : t0 + (t_end - t0) * double(i) / double(cfg.samples - 1));
  }
  return ts;
}

std::string csv_text(const Table& table) {
  std::string out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) out += (j ? "," : "") + table.columns[j];
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ",";
      if (!std::isnan(row[j])) out += number_text(row[j]);
    }
    out += "\n";
  }
  return out;
}

json table_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::array();
    for (double v : row) r.push_back(std::isnan(v) ? json(nullptr) : json(v));
    rows.push_back(std::move(r));
  }
  return {{"columns", table.columns}, {"rows", rows}};
}

std::filesystem::path write_table(const Table& table, const ExperimentConfig& cfg, const std::string& stem) {
  const auto path = cfg.out / (stem + (cfg.format == "json" ? ".json" : ".csv"));
  write_file(path, cfg.format == "json" ? json_text(table_json(table)) : csv_text(table));
  return path;
}

std::filesystem::path cmd_chart(const ExperimentConfig& cfg) {
  const Resolved r = resolve(cfg);
  if (!r.entry.cartesian) bad(fmt::format("'{}' is already in action-angle form; charts need a planar centre", r.entry.id));
  const ProductChart pc = build_product_chart(*r.entry.cartesian, cfg.chart);
  json charts = json::array();
  for (const auto& c : pc.charts()) charts.push_back(chart_to_json(*c));
  const json doc = {{"format", "torus-asymptote-product-chart"}, {"system", r.entry.id}, {"charts", charts}};
  const auto path = cfg.out / (stem_for(cfg, "chart") + ".json");
  write_file(path, json_text(doc));
  return path;
}

std::filesystem::path cmd_simulate(const ExperimentConfig& cfg) {
  const Resolved r = resolve(cfg);
  const auto times = output_times(cfg, r.t0, r.t_end);
  ode::IntegratorOptions opts;
  opts.tol = cfg.tol;
  const auto states = ode::sample_solution(r.entry.field(), r.initial, r.t0, times, opts);

  Table table;
  table.columns.push_back("t");
  if (r.entry.form == catalog::Form::Cartesian) {
    for (std::size_t i = 0; i < r.entry.dimension(); ++i) table.columns.push_back(fmt::format("x{}", i + 1));
  } else {
    for (std::size_t i = 0; i < r.entry.action_angle->m; ++i) table.columns.push_back(fmt::format("r{}", i + 1));
    for (std::size_t i = 0; i < r.entry.action_angle->n; ++i) table.columns.push_back(fmt::format("theta{}", i + 1));
  }
  std::optional<PhaseTrajectory> mapped;
  if (cfg.attach_chart && r.entry.cartesian) {
    const ProductChart pc = build_product_chart(*r.entry.cartesian, cfg.chart);
    mapped = sample_cartesian(pc, nullptr, times, states);
    for (std::size_t k = 0; k < pc.size(); ++k) table.columns.push_back(fmt::format("r{}", k + 1));
    for (std::size_t k = 0; k < pc.size(); ++k) table.columns.push_back(fmt::format("theta{}", k + 1));
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::vector<double> row{times[i]};
    for (Eigen::Index j = 0; j < states[i].size(); ++j) row.push_back(states[i][j]);
    if (mapped) {
      for (Eigen::Index j = 0; j < mapped->r[i].size(); ++j) row.push_back(mapped->r[i][j]);
      for (Eigen::Index j = 0; j < mapped->theta[i].size(); ++j) row.push_back(mapped->theta[i][j]);
    }
    table.rows.push_back(std::move(row));
  }
  return write_table(table, cfg, stem_for(cfg, "trajectory"));
}

AnalyzeOutput cmd_analyze(const ExperimentConfig& cfg) {
  const Resolved r = resolve(cfg);
  if (!(r.t0 > 0.0) || r.t_end / r.t0 < 100.0) {
    bad(fmt::format("analysis needs t0 > 0 and at least two decades, got [{}, {}]", r.t0, r.t_end));
  }
  const auto times = sample_times(r.t0, r.t_end, cfg.samples_per_decade);
  AnalyzeOutput out;
  PhaseTrajectory traj;
  ActionAngleSystem sys;
  if (r.entry.form == catalog::Form::Cartesian) {
    const ChartedSystem cs = chart_system(*r.entry.cartesian, build_product_chart(*r.entry.cartesian, cfg.chart));
    traj = run_cartesian(*r.entry.cartesian, cs, r.initial, r.t0, times, cfg.tol);
    sys = cs.system;
  } else {
    sys = *r.entry.action_angle;
    traj = simulate(sys, r.initial.head(Eigen::Index(sys.m)), r.initial.tail(Eigen::Index(sys.n)), r.t0, r.t_end,
                    cfg.tol, times);
  }
  out.report = analyze(traj, sys);
  out.report_path = cfg.out / (stem_for(cfg, "report") + ".json");
  write_file(out.report_path, json_text(to_json(out.report)));

  Table res;
  res.columns = {"t", "action_distance"};
  for (std::size_t k = 0; k < sys.n; ++k) res.columns.push_back(fmt::format("phase_residual{}", k + 1));
  Eigen::VectorXd A_star;
  if (out.report.r_star) A_star = sys.A(*out.report.r_star);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::vector<double> row{traj.t[i], out.report.r_star ? (traj.r[i] - *out.report.r_star).norm() : kMissing};
    for (std::size_t k = 0; k < sys.n; ++k) {
      row.push_back(out.report.r_star ? traj.theta[i][Eigen::Index(k)] - A_star[Eigen::Index(k)] * traj.t[i]
                                      : kMissing);
    }
    res.rows.push_back(std::move(row));
  }
  out.residual_path = write_table(res, cfg, stem_for(cfg, "residuals"));
  return out;
}

std::string cmd_list(const std::string& format) {
  if (format == "json") {
    json all = json::array();
    for (const auto& id : catalog::list()) all.push_back(catalog::describe(catalog::get(id)));
    return json_text(all);
  }
  std::string out;
  for (const auto& id : catalog::list()) {
    const auto& e = catalog::get(id);
    out += fmt::format("{:<16} {:<13} {}\n", id, e.form == catalog::Form::Cartesian ? "cartesian" : "action_angle",
                       e.summary);
  }
  return out;
}

}  // namespace torus::cli
