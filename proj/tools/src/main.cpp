#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "experiment.hpp"
#include "json_text.hpp"
#include "torus/error.hpp"
#include "verify.hpp"

namespace {

using namespace torus;
using namespace torus::cli;

enum ExitCode { kOk = 0, kConfig = 1, kNumeric = 2, kVerifyFailed = 3 };

struct Flags {
  std::string config;
  std::string system;
  std::vector<std::string> params;
  std::vector<double> initial;
  std::optional<double> t0, t_end, tol;
  std::optional<int> samples_per_decade;
  std::optional<std::size_t> samples;
  bool attach_chart = false;
  std::string out;
  std::string format;
};

ExperimentConfig merge(const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.system.empty()) cfg.system = f.system;
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, fmt::format("--param needs key=value, got '{}'", kv));
    const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    cfg.params[key] = value.is_discarded() ? nlohmann::json(text) : value;
  }
  if (!f.initial.empty()) cfg.initial = Eigen::Map<const Eigen::VectorXd>(f.initial.data(), Eigen::Index(f.initial.size()));
  if (f.t0) cfg.t0 = f.t0;
  if (f.t_end) cfg.t_end = f.t_end;
  if (f.tol) cfg.tol = *f.tol;
  if (f.samples_per_decade) cfg.samples_per_decade = *f.samples_per_decade;
  if (f.samples) cfg.samples = *f.samples;
  if (f.attach_chart) cfg.attach_chart = true;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.format.empty()) cfg.format = f.format;
  return cfg;
}

int run_verify(const std::vector<std::string>& ids, const ExperimentConfig& cfg) {
  const auto results = verify_all(ids, cfg.tol);
  bool all = true;
  if (cfg.format == "json") {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : results) {
      nlohmann::json checks = nlohmann::json::array();
      for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
      doc.push_back({{"id", r.id}, {"passed", r.passed()}, {"checks", checks}, {"error", r.error}});
      all = all && r.passed();
    }
    std::cout << json_text(doc);
  } else {
    for (const auto& r : results) {
      all = all && r.passed();
      std::cout << fmt::format("{} {} ({:.2f} s)\n", r.passed() ? "PASS" : "FAIL", r.id, r.seconds);
      for (const auto& c : r.checks) std::cout << fmt::format("  {} {}: {}\n", c.passed ? "ok  " : "FAIL", c.name, c.detail);
      if (!r.error.empty()) std::cout << "  error: " << r.error << "\n";
    }
  }
  return all ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic analysis of perturbed planar centres and their products", "torus-asymptote"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON experiment file")->check(CLI::ExistingFile);
  app.add_option("--system", f.system, "catalog id");
  app.add_option("--param", f.params, "parameter override key=value (value read as JSON when possible)");
  app.add_option("--initial", f.initial, "initial state")->delimiter(',');
  app.add_option("--t0", f.t0);
  app.add_option("--t-end", f.t_end);
  app.add_option("--tol", f.tol, "integrator tolerance");
  app.add_option("--samples-per-decade", f.samples_per_decade);
  app.add_option("--samples", f.samples, "uniform sample count for spans under a decade");
  app.add_flag("--attach-chart", f.attach_chart, "add chart coordinates to simulate output");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* chart = app.add_subcommand("chart", "build and write the action-angle chart");
  auto* simulate = app.add_subcommand("simulate", "integrate and write the sampled trajectory");
  auto* analyze = app.add_subcommand("analyze", "integrate and write the asymptotics report");
  auto* verify = app.add_subcommand("verify", "check catalog entries against their closed forms");
  auto* list = app.add_subcommand("list", "list catalog entries");
  std::vector<std::string> verify_ids;
  verify->add_option("ids", verify_ids, "catalog ids (default: all)");
  for (auto* sub : {chart, simulate, analyze, verify, list}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const ExperimentConfig cfg = merge(f);
    if (*list) {
      std::cout << cmd_list(f.format.empty() ? "csv" : cfg.format);
      return kOk;
    }
    if (*verify) return run_verify(verify_ids, cfg);
    if (*chart) std::cout << cmd_chart(cfg).string() << "\n";
    if (*simulate) std::cout << cmd_simulate(cfg).string() << "\n";
    if (*analyze) {
      const AnalyzeOutput out = cmd_analyze(cfg);
      for (const auto& note : out.report.notes) std::cerr << "note: " << note << "\n";
      std::cout << out.report_path.string() << "\n" << out.residual_path.string() << "\n";
    }
    return kOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::UnknownSystem ? kConfig : kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
}
