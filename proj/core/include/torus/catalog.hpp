#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "torus/action_angle.hpp"
#include "torus/asymptotics.hpp"
#include "torus/center_chart.hpp"
#include "torus/ode.hpp"

namespace torus::catalog {

enum class Form { Cartesian, ActionAngle };

/// Product of planar centres plus an optional time-dependent perturbation.
struct CartesianSystem {
  std::vector<PlanarCentreField> blocks;
  CartesianPerturbation perturbation;  // empty means none

  std::size_t dimension() const { return 2 * blocks.size(); }
  ode::VectorField unperturbed_field() const;
  ode::VectorField field() const;
};

/// x(t) for the solution with x(t0) = x0, in the entry's primary state layout.
using AnalyticSolution = std::function<ode::State(double t, double t0, const ode::State& x0)>;

struct CatalogEntry {
  std::string id;
  std::string summary;
  Form form = Form::Cartesian;
  nlohmann::json params;

  std::optional<CartesianSystem> cartesian;
  /// Primary system for the action-angle form; for Cartesian entries an
  /// optional image in hand-picked coordinates.
  std::optional<ActionAngleSystem> action_angle;

  AnalyticSolution analytic_solution;
  /// Closed form for the action_angle image of a Cartesian entry.
  AnalyticSolution image_solution;
  std::function<double(const ode::State&)> conserved;
  std::string analytic_notes;

  double t_min = -std::numeric_limits<double>::infinity();
  double t_max = std::numeric_limits<double>::infinity();
  double default_t0 = 0.0;
  double default_t_end = 1.0;
  ode::State default_initial;

  std::size_t dimension() const;
  /// Field in the primary form; action-angle state is (r, theta).
  ode::VectorField field() const;
};

std::vector<std::string> list();

/// Entry with default parameters. Throws UnknownSystem.
const CatalogEntry& get(const std::string& id);

/// Entry with parameters overridden by `overrides` (an object). Unknown or
/// ill-typed keys throw ConfigInvalid.
CatalogEntry make(const std::string& id, const nlohmann::json& overrides = nlohmann::json::object());

/// Maps a chart field descriptor back to the planar field.
PlanarCentreField resolve_field(const nlohmann::json& descriptor);

nlohmann::json describe(const CatalogEntry& entry);

}  // namespace torus::catalog
