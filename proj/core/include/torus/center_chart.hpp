#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string_view>
#include <utility>
#include <vector>

#include "torus/ode.hpp"

namespace torus {

using Point = Eigen::Vector2d;

/// Autonomous planar field with a centre at the origin. The chart is only
/// built on the Euclidean annulus [inner_radius, outer_radius].
struct PlanarCentreField {
  std::function<Point(const Point&)> rhs;
  double inner_radius = 0.05;
  double outer_radius = 20.0;
  /// Opaque identification used when a chart is exported; an importer maps
  /// it back to a field.
  nlohmann::json descriptor;

  Point operator()(const Point& x) const { return rhs(x); }
  ode::VectorField as_vector_field() const;

  /// Throws InvalidField unless f(0) = 0 and f vanishes nowhere on a sample
  /// grid of the annulus.
  void validate() const;
};

/// Direction orthogonal to f: sign +1 gives (-h2, h1), sign -1 gives (h2, -h1).
inline Point orthogonal_direction(const Point& f, int sign) {
  return sign > 0 ? Point(-f.y(), f.x()) : Point(f.y(), -f.x());
}

struct OrthogonalField {
  ode::VectorField field;
  int sign = 1;
};

/// Picks the orthogonal field whose flow leaves the origin, judged by a short
/// trial integration from `probe`. Throws OrientationUndetermined.
OrthogonalField orthogonal_field(const PlanarCentreField& field, const Point& probe);

/// Orbit of the orthogonal flow through the seed, parametrized by its flow
/// time s (s = 0 at the seed), stretching across the whole annulus.
class TransversalCurve {
 public:
  TransversalCurve() = default;
  TransversalCurve(ode::Trajectory path, int sign);

  double s_min() const { return path_.t_min(); }
  double s_max() const { return path_.t_max(); }
  double norm_min() const { return norms_.front(); }
  double norm_max() const { return norms_.back(); }
  int orientation() const { return sign_; }
  const ode::Trajectory& path() const { return path_; }

  Point point(double s) const;
  /// Parameter of the unique curve point with the given Euclidean norm.
  /// Throws OutsideChart outside [norm_min, norm_max].
  double parameter_at_norm(double norm) const;
  /// Largest angle (rad) between the curve tangent and f over the samples.
  double orthogonality_residual(const PlanarCentreField& field) const;
  bool norm_strictly_increasing() const;

 private:
  ode::Trajectory path_;
  std::vector<double> norms_;
  int sign_ = 1;
};

struct TransversalOptions {
  double tol = 1e-11;
  /// Bound on the orthogonal-flow time spent reaching either cutoff.
  double max_time = 1e4;
};

TransversalCurve build_transversal(const PlanarCentreField& field, const Point& seed,
                                   const TransversalOptions& options = {});

struct ChartOptions {
  double tol = 1e-11;
  std::size_t grid_points = 33;
  /// Search bound for the first period; later ones use period_cap_factor
  /// times the period at the nearest grid point.
  double first_period_cap = 1e4;
  double period_cap_factor = 50.0;
  double transversal_max_time = 1e4;
  std::size_t orbit_cache_capacity = 512;
};

struct ChartDiagnostics {
  double orthogonality_residual = 0.0;
  bool gamma_monotone = true;
  double max_section_round_trip = 0.0;  // max |U(v(r)) - r| on the grid
  double max_return_error = 0.0;        // closure of the period orbits
  double min_period = 0.0;
  double max_period = 0.0;
  /// Largest ratio of a grid jump in T to the neighbouring jumps; a cheap
  /// continuity heuristic, not a certified modulus.
  double period_jump_ratio = 0.0;
  bool period_continuous = true;
};

/// Unperturbed periodic orbit through the section point v(r).
struct CycleOrbit {
  double r = 0.0;
  double period = 0.0;
  ode::Trajectory path;  // covers at least [-period/10, period]
};

/// Result of following the unperturbed flow from x to the transversal.
struct GammaCrossing {
  double r = 0.0;
  double s = 0.0;
  double time = 0.0;  // flow time from x to the crossing, in [0, T(r))
  Point point;
};

class ActionAngleChart {
 public:
  static constexpr std::string_view kUConvention = "exp_of_orthogonal_flow_time";

  const PlanarCentreField& field() const { return field_; }
  const TransversalCurve& gamma() const { return gamma_; }
  const std::vector<double>& r_grid() const { return r_grid_; }
  const std::vector<Point>& grid_points() const { return grid_points_; }
  const std::vector<double>& grid_periods() const { return grid_periods_; }
  std::pair<double, double> r_range() const { return {r_lo_, r_hi_}; }
  double tolerance() const { return options_.tol; }
  const ChartOptions& options() const { return options_; }
  const ChartDiagnostics& diagnostics() const { return diagnostics_; }
  int circulation() const { return circulation_; }
  const Point& seed() const { return seed_; }

  bool contains(double r) const;
  double action_of(const Point& x) const;
  GammaCrossing first_crossing(const Point& x) const;
  Point section_point(double r) const;
  double period(double r) const;
  double frequency(double r) const { return 1.0 / period(r); }
  /// Shared, cached orbit through v(r).
  std::shared_ptr<const CycleOrbit> orbit(double r) const;

 private:
  friend ActionAngleChart build_chart(PlanarCentreField, const Point&, const ChartOptions&);
  friend ActionAngleChart chart_from_json(const nlohmann::json&,
                                          const std::function<PlanarCentreField(const nlohmann::json&)>&);

  struct Cache;

  double period_bound(double r) const;
  CycleOrbit compute_orbit(double r, double t_cap) const;
  void init_cache();

  PlanarCentreField field_;
  TransversalCurve gamma_;
  Point seed_ = Point::Zero();
  ChartOptions options_;
  int circulation_ = 1;
  double r_lo_ = 0.0;
  double r_hi_ = 0.0;
  std::vector<double> r_grid_;
  std::vector<Point> grid_points_;
  std::vector<double> grid_periods_;
  ChartDiagnostics diagnostics_;
  std::shared_ptr<Cache> cache_;
};

ActionAngleChart build_chart(PlanarCentreField field, const Point& seed, const ChartOptions& options = {});

/// True iff max |T(r) - mean T| / mean T <= rel_tol over the given actions.
bool check_isochronous(const ActionAngleChart& chart, const std::vector<double>& r_grid, double rel_tol);

nlohmann::json chart_to_json(const ActionAngleChart& chart);
ActionAngleChart chart_from_json(const nlohmann::json& doc,
                                 const std::function<PlanarCentreField(const nlohmann::json&)>& resolve);

}  // namespace torus
