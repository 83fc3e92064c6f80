#include "torus/center_chart.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <unordered_map>

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

#include "torus/error.hpp"

namespace torus {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

Point as_point(const ode::State& x) { return Point(x[0], x[1]); }
ode::State as_state(const Point& p) { return ode::State{{p.x(), p.y()}}; }

ode::VectorField make_orthogonal(const PlanarCentreField& field, int sign) {
  auto rhs = field.rhs;
  return {2,
          [rhs, sign](double, const ode::State& x) {
            return as_state(orthogonal_direction(rhs(as_point(x)), sign));
          },
          true};
}

// Prepends a tenth of a period so that phase stencils around 0 need no wrap.
ode::Trajectory with_lead_in(const ode::VectorField& f, const Point& v, double period, ode::Trajectory path,
                             double tol) {
  ode::Trajectory lead = ode::integrate(f, as_state(v), 0.0, -0.1 * period, tol);
  return ode::Trajectory::join(std::move(lead), std::move(path));
}

bool norms_increase(const ode::Trajectory& traj) {
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (!(traj.states()[i].norm() > traj.states()[i - 1].norm())) return false;
  }
  return true;
}

}  // namespace

ode::VectorField PlanarCentreField::as_vector_field() const {
  auto f = rhs;
  return {2, [f](double, const ode::State& x) { return as_state(f(as_point(x))); }, true};
}

void PlanarCentreField::validate() const {
  if (!rhs) throw Error(ErrorCode::InvalidField, "field has no right-hand side");
  if (!(inner_radius > 0.0) || !(outer_radius > inner_radius)) {
    throw Error(ErrorCode::InvalidField,
                fmt::format("annulus [{}, {}] is not a proper annulus", inner_radius, outer_radius));
  }
  const Point f0 = rhs(Point::Zero());
  if (!f0.allFinite() || f0.norm() > 1e-12) {
    throw Error(ErrorCode::InvalidField, fmt::format("f(0) = ({}, {}) is not zero", f0.x(), f0.y()));
  }
  constexpr int kRadii = 6, kAngles = 16;
  for (int i = 0; i < kRadii; ++i) {
    const double rho = inner_radius * std::pow(outer_radius / inner_radius, double(i) / (kRadii - 1));
    for (int j = 0; j < kAngles; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / kAngles;
      const Point f = rhs(Point(rho * std::cos(phi), rho * std::sin(phi)));
      if (!f.allFinite() || f.norm() == 0.0) {
        throw Error(ErrorCode::InvalidField,
                    fmt::format("f vanishes or is not finite at norm {}, angle {}", rho, phi));
      }
    }
  }
}

OrthogonalField orthogonal_field(const PlanarCentreField& field, const Point& probe) {
  const Point f0 = field(probe);
  if (probe.norm() == 0.0 || f0.norm() == 0.0) {
    throw Error(ErrorCode::OrientationUndetermined, "probe point is an equilibrium");
  }
  // long enough to move the probe by a few percent of its norm
  const double trial_time = 0.05 * probe.norm() / f0.norm();
  for (int sign : {1, -1}) {
    ode::VectorField orth = make_orthogonal(field, sign);
    ode::Trajectory trial = ode::integrate(orth, as_state(probe), 0.0, trial_time, 1e-10);
    if (trial.size() >= 2 && norms_increase(trial)) return {std::move(orth), sign};
  }
  throw Error(ErrorCode::OrientationUndetermined,
              fmt::format("norm is not monotone along either orthogonal flow from ({}, {})", probe.x(),
                          probe.y()));
}

// ---------------------------------------------------------------------------

TransversalCurve::TransversalCurve(ode::Trajectory path, int sign) : path_(std::move(path)), sign_(sign) {
  norms_.reserve(path_.size());
  for (const auto& x : path_.states()) norms_.push_back(x.norm());
}

Point TransversalCurve::point(double s) const { return as_point(path_.dense_eval(s)); }

double TransversalCurve::parameter_at_norm(double norm) const {
  if (!(norm >= norms_.front() && norm <= norms_.back())) {
    throw Error(ErrorCode::OutsideChart, fmt::format("norm {} outside transversal span [{}, {}]", norm,
                                                     norms_.front(), norms_.back()));
  }
  auto it = std::upper_bound(norms_.begin(), norms_.end(), norm);
  if (it == norms_.end()) return path_.t_max();
  const std::size_t i = static_cast<std::size_t>(it - norms_.begin()) - 1;
  if (norms_[i] == norm) return path_.times()[i];
  const ode::Segment& seg = path_.segments()[i];
  auto g = [&](double s) { return seg.eval(s).norm() - norm; };
  double lo = path_.times()[i], hi = path_.times()[i + 1];
  std::uintmax_t iters = 100;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4.0 * kEps * std::max({1.0, std::abs(a), std::abs(b)}); };
  auto bracket = boost::math::tools::toms748_solve(g, lo, hi, norms_[i] - norm, norms_[i + 1] - norm, tol, iters);
  return 0.5 * (bracket.first + bracket.second);
}

double TransversalCurve::orthogonality_residual(const PlanarCentreField& field) const {
  double worst = 0.0;
  const auto& ts = path_.times();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double d = 1e-6 * std::max(1.0, std::abs(ts[i]));
    const double a = std::max(ts.front(), ts[i] - d);
    const double b = std::min(ts.back(), ts[i] + d);
    const Point tangent = (point(b) - point(a)) / (b - a);
    const Point f = field(point(ts[i]));
    const double c = std::abs(tangent.dot(f)) / (tangent.norm() * f.norm());
    worst = std::max(worst, std::asin(std::min(1.0, c)));
  }
  return worst;
}

bool TransversalCurve::norm_strictly_increasing() const {
  return std::adjacent_find(norms_.begin(), norms_.end(), std::greater_equal<>()) == norms_.end();
}

TransversalCurve build_transversal(const PlanarCentreField& field, const Point& seed,
                                   const TransversalOptions& options) {
  field.validate();
  const double n0 = seed.norm();
  if (!(n0 > field.inner_radius && n0 < field.outer_radius)) {
    throw Error(ErrorCode::OutOfRange, fmt::format("seed norm {} outside annulus ({}, {})", n0,
                                                   field.inner_radius, field.outer_radius));
  }
  OrthogonalField orth = orthogonal_field(field, seed);
  const ode::State x0 = as_state(seed);

  auto reach = [&](double target, double t_limit, ode::Direction dir, ErrorCode failure) {
    ode::EventSpec ev{[target](double, const ode::State& x) { return x.norm() - target; }, dir};
    double t_hit = 0.0;
    try {
      t_hit = ode::integrate_to_event(orth.field, x0, 0.0, t_limit, ev, options.tol).t_event;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EventNotFound) {
        throw Error(failure, fmt::format("norm {} not reached within orthogonal-flow time {}", target,
                                         std::abs(t_limit)));
      }
      throw;
    }
    // Re-run to end exactly at the cutoff.
    return ode::integrate(orth.field, x0, 0.0, t_hit, options.tol);
  };

  ode::Trajectory outward = reach(field.outer_radius, options.max_time, ode::Direction::Rising,
                                  ErrorCode::EscapeFailure);
  ode::Trajectory inward = reach(field.inner_radius, -options.max_time, ode::Direction::Falling,
                                 ErrorCode::OriginApproachFailure);
  return TransversalCurve(ode::Trajectory::join(std::move(inward), std::move(outward)), orth.sign);
}

// ---------------------------------------------------------------------------

struct ActionAngleChart::Cache {
  std::shared_mutex mutex;
  std::unordered_map<double, std::shared_ptr<const CycleOrbit>> orbits;
};

void ActionAngleChart::init_cache() { cache_ = std::make_shared<Cache>(); }

bool ActionAngleChart::contains(double r) const {
  return r >= r_lo_ * (1.0 - 1e-12) && r <= r_hi_ * (1.0 + 1e-12);
}

Point ActionAngleChart::section_point(double r) const {
  if (!contains(r)) {
    throw Error(ErrorCode::OutOfRange, fmt::format("action {} outside [{}, {}]", r, r_lo_, r_hi_));
  }
  const double s = std::clamp(std::log(r), gamma_.s_min(), gamma_.s_max());
  return gamma_.point(s);
}

double ActionAngleChart::period_bound(double r) const {
  if (grid_periods_.empty()) return options_.first_period_cap;
  const double lr = std::log(r);
  std::size_t best = 0;
  for (std::size_t i = 1; i < r_grid_.size(); ++i) {
    if (std::abs(std::log(r_grid_[i]) - lr) < std::abs(std::log(r_grid_[best]) - lr)) best = i;
  }
  return options_.period_cap_factor * grid_periods_[best];
}

CycleOrbit ActionAngleChart::compute_orbit(double r, double t_cap) const {
  const Point v = section_point(r);
  const Point fv = field_(v);
  const Point normal = fv / fv.norm();
  const ode::VectorField f = field_.as_vector_field();
  ode::EventSpec ev{[v, normal](double, const ode::State& x) { return (as_point(x) - v).dot(normal); },
                    ode::Direction::Rising};
  const double accept = 1e-4 * (1.0 + v.norm());

  CycleOrbit out;
  out.r = r;
  ode::State x = as_state(v);
  double t = 0.0;
  bool first = true;
  while (true) {
    ode::EventResult hit;
    try {
      hit = ode::integrate_to_event(f, x, t, t_cap, ev, ode::IntegratorOptions{options_.tol}, first);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EventNotFound) {
        throw Error(ErrorCode::NoReturn, fmt::format("orbit through v({}) does not return before t = {}", r, t_cap));
      }
      throw;
    }
    if ((as_point(hit.x_event) - v).norm() <= accept) {
      out.period = hit.t_event;
      out.path = with_lead_in(f, v, out.period,
                              first ? std::move(hit.trajectory) : ode::integrate(f, as_state(v), 0.0, out.period, options_.tol),
                              options_.tol);
      return out;
    }
    // section line met away from v on a non-convex cycle; keep going
    first = false;
    t = hit.t_event;
    x = hit.x_event;
  }
}

std::shared_ptr<const CycleOrbit> ActionAngleChart::orbit(double r) const {
  {
    std::shared_lock lock(cache_->mutex);
    auto it = cache_->orbits.find(r);
    if (it != cache_->orbits.end()) return it->second;
  }
  std::shared_ptr<const CycleOrbit> made;
  auto grid_it = std::lower_bound(r_grid_.begin(), r_grid_.end(), r);
  if (grid_it != r_grid_.end() && *grid_it == r) {
    const std::size_t i = static_cast<std::size_t>(grid_it - r_grid_.begin());
    auto orb = std::make_shared<CycleOrbit>();
    orb->r = r;
    orb->period = grid_periods_[i];
    const ode::VectorField f = field_.as_vector_field();
    orb->path = with_lead_in(f, grid_points_[i], orb->period,
                             ode::integrate(f, as_state(grid_points_[i]), 0.0, orb->period, options_.tol), options_.tol);
    made = std::move(orb);
  } else {
    made = std::make_shared<const CycleOrbit>(compute_orbit(r, period_bound(r)));
  }
  std::unique_lock lock(cache_->mutex);
  if (cache_->orbits.size() >= options_.orbit_cache_capacity) cache_->orbits.clear();
  return cache_->orbits.try_emplace(r, std::move(made)).first->second;
}

double ActionAngleChart::period(double r) const {
  auto it = std::lower_bound(r_grid_.begin(), r_grid_.end(), r);
  if (it != r_grid_.end() && *it == r) return grid_periods_[static_cast<std::size_t>(it - r_grid_.begin())];
  return orbit(r)->period;
}

GammaCrossing ActionAngleChart::first_crossing(const Point& x) const {
  const double rho = x.norm();
  if (!(rho > 0.0) || !x.allFinite()) throw Error(ErrorCode::OutsideChart, "point is the origin or not finite");
  const double lo = gamma_.norm_min(), hi = gamma_.norm_max();
  auto on_gamma = [this, lo, hi](double norm) { return gamma_.point(gamma_.parameter_at_norm(std::clamp(norm, lo, hi))); };
  const int sigma = circulation_;
  // sine of the signed angle from the transversal point of equal norm to x
  auto angle_gap = [&](const Point& p) {
    const Point q = on_gamma(p.norm());
    return sigma * cross(q, p) / (q.norm() * p.norm());
  };

  GammaCrossing out;
  if (rho >= lo && rho <= hi) {
    const Point q = on_gamma(rho);
    if (std::abs(angle_gap(x)) < 1e-14 && q.dot(x) > 0.0) {
      out.s = gamma_.parameter_at_norm(rho);
      out.r = std::exp(out.s);
      out.time = 0.0;
      out.point = x;
      return out;
    }
  }
  const double t_cap = grid_periods_.empty()
                           ? options_.first_period_cap
                           : options_.period_cap_factor * *std::max_element(grid_periods_.begin(), grid_periods_.end());
  ode::EventSpec ev{[&](double, const ode::State& y) { return angle_gap(as_point(y)); }, ode::Direction::Rising};
  ode::EventResult hit;
  try {
    hit = ode::integrate_to_event(field_.as_vector_field(), as_state(x), 0.0, t_cap, ev,
                                  ode::IntegratorOptions{options_.tol}, false);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EventNotFound) {
      throw Error(ErrorCode::NoCrossing,
                  fmt::format("orbit through ({}, {}) does not reach the transversal before t = {}", x.x(), x.y(), t_cap));
    }
    throw;
  }
  const Point xc = as_point(hit.x_event);
  const double nc = xc.norm();
  const double slack = 1e-9;
  if (nc < lo * (1.0 - slack) || nc > hi * (1.0 + slack)) {
    throw Error(ErrorCode::OutsideChart,
                fmt::format("orbit through ({}, {}) meets the transversal line at norm {} outside [{}, {}]", x.x(),
                            x.y(), nc, lo, hi));
  }
  const double s = gamma_.parameter_at_norm(std::clamp(nc, lo, hi));
  if ((gamma_.point(s) - xc).norm() > 1e-6 * (1.0 + nc)) {
    throw Error(ErrorCode::OutsideChart, fmt::format("crossing at norm {} is off the transversal", nc));
  }
  out.s = s;
  out.r = std::exp(s);
  out.time = hit.t_event;
  out.point = xc;
  return out;
}

double ActionAngleChart::action_of(const Point& x) const { return first_crossing(x).r; }

// ---------------------------------------------------------------------------

namespace {

void fill_diagnostics(ActionAngleChart& chart, ChartDiagnostics& d, bool with_round_trip) {
  d.orthogonality_residual = chart.gamma().orthogonality_residual(chart.field());
  d.gamma_monotone = chart.gamma().norm_strictly_increasing();
  const auto& T = chart.grid_periods();
  if (!T.empty()) {
    d.min_period = *std::min_element(T.begin(), T.end());
    d.max_period = *std::max_element(T.begin(), T.end());
  }
  d.period_jump_ratio = 0.0;
  for (std::size_t i = 1; i + 2 < T.size(); ++i) {
    const double jump = std::abs(T[i + 1] - T[i]);
    const double neighbours = std::max(std::abs(T[i] - T[i - 1]), std::abs(T[i + 2] - T[i + 1]));
    const double floor = 1e-9 * std::abs(T[i]);
    d.period_jump_ratio = std::max(d.period_jump_ratio, jump / std::max(neighbours, floor));
  }
  d.period_continuous = d.period_jump_ratio <= 4.0;
  if (with_round_trip) {
    d.max_section_round_trip = 0.0;
    for (std::size_t i = 0; i < chart.r_grid().size(); ++i) {
      const double r = chart.r_grid()[i];
      d.max_section_round_trip = std::max(d.max_section_round_trip, std::abs(chart.action_of(chart.grid_points()[i]) - r));
    }
  }
}

}  // namespace

ActionAngleChart build_chart(PlanarCentreField field, const Point& seed, const ChartOptions& options) {
  ActionAngleChart chart;
  chart.options_ = options;
  chart.seed_ = seed;
  chart.gamma_ = build_transversal(field, seed, {options.tol, options.transversal_max_time});
  const double turn = cross(seed, field(seed));
  if (turn == 0.0) throw Error(ErrorCode::InvalidField, "field is radial at the seed");
  chart.circulation_ = turn > 0.0 ? 1 : -1;
  chart.field_ = std::move(field);
  chart.r_lo_ = std::exp(chart.gamma_.s_min());
  chart.r_hi_ = std::exp(chart.gamma_.s_max());
  chart.init_cache();

  const std::size_t n = std::max<std::size_t>(options.grid_points, 1);
  double cap = options.first_period_cap;
  std::vector<CycleOrbit> orbits;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.5 * (chart.gamma_.s_min() + chart.gamma_.s_max())
                            : chart.gamma_.s_min() + (chart.gamma_.s_max() - chart.gamma_.s_min()) * double(i) / double(n - 1);
    const double r = i + 1 == n ? chart.r_hi_ : (i == 0 ? chart.r_lo_ : std::exp(s));
    CycleOrbit orb = chart.compute_orbit(r, cap);
    cap = options.period_cap_factor * orb.period;
    const Point v = chart.section_point(r);
    chart.diagnostics_.max_return_error =
        std::max(chart.diagnostics_.max_return_error, (as_point(orb.path.dense_eval(orb.period)) - v).norm());
    chart.r_grid_.push_back(r);
    chart.grid_points_.push_back(v);
    chart.grid_periods_.push_back(orb.period);
    orbits.push_back(std::move(orb));
  }
  for (auto& orb : orbits) {
    if (chart.cache_->orbits.size() >= options.orbit_cache_capacity) break;
    const double r = orb.r;
    chart.cache_->orbits.emplace(r, std::make_shared<const CycleOrbit>(std::move(orb)));
  }
  fill_diagnostics(chart, chart.diagnostics_, true);
  return chart;
}

bool check_isochronous(const ActionAngleChart& chart, const std::vector<double>& r_grid, double rel_tol) {
  if (r_grid.size() <= 1) return true;
  std::vector<double> periods;
  periods.reserve(r_grid.size());
  for (double r : r_grid) periods.push_back(chart.period(r));
  double mean = 0.0;
  for (double T : periods) mean += T;
  mean /= double(periods.size());
  double worst = 0.0;
  for (double T : periods) worst = std::max(worst, std::abs(T - mean) / mean);
  return worst <= rel_tol;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json point_json(const Point& p) { return nlohmann::json::array({p.x(), p.y()}); }

Point json_point(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::ConfigInvalid, "expected a 2-element point");
  return Point(j[0].get<double>(), j[1].get<double>());
}

}  // namespace

nlohmann::json chart_to_json(const ActionAngleChart& chart) {
  nlohmann::json doc;
  doc["format"] = "torus-asymptote-chart";
  doc["version"] = 1;
  doc["field"] = chart.field().descriptor;
  doc["annulus"] = {chart.field().inner_radius, chart.field().outer_radius};
  doc["seed"] = point_json(chart.seed());
  doc["tol"] = chart.tolerance();
  doc["orientation"] = chart.gamma().orientation();
  doc["circulation"] = chart.circulation();
  doc["u_convention"] = std::string(ActionAngleChart::kUConvention);
  const auto& o = chart.options();
  doc["options"] = {{"grid_points", o.grid_points},
                    {"first_period_cap", o.first_period_cap},
                    {"period_cap_factor", o.period_cap_factor},
                    {"transversal_max_time", o.transversal_max_time},
                    {"orbit_cache_capacity", o.orbit_cache_capacity}};
  nlohmann::json s = nlohmann::json::array(), pts = nlohmann::json::array();
  const auto& path = chart.gamma().path();
  for (std::size_t i = 0; i < path.size(); ++i) {
    s.push_back(path.times()[i]);
    pts.push_back(point_json(as_point(path.states()[i])));
  }
  doc["gamma"] = {{"s", s}, {"points", pts}};
  nlohmann::json v = nlohmann::json::array();
  for (const Point& p : chart.grid_points()) v.push_back(point_json(p));
  doc["grid"] = {{"r", chart.r_grid()}, {"v", v}, {"period", chart.grid_periods()}};
  return doc;
}

ActionAngleChart chart_from_json(const nlohmann::json& doc,
                                 const std::function<PlanarCentreField(const nlohmann::json&)>& resolve) {
  try {
    if (doc.at("format") != "torus-asymptote-chart") throw Error(ErrorCode::ConfigInvalid, "not a chart document");
    if (doc.at("u_convention") != ActionAngleChart::kUConvention) {
      throw Error(ErrorCode::ConfigInvalid, "unsupported action normalization");
    }
    ActionAngleChart chart;
    chart.field_ = resolve(doc.at("field"));
    chart.field_.descriptor = doc.at("field");
    chart.field_.inner_radius = doc.at("annulus").at(0).get<double>();
    chart.field_.outer_radius = doc.at("annulus").at(1).get<double>();
    chart.seed_ = json_point(doc.at("seed"));
    chart.options_.tol = doc.at("tol").get<double>();
    const auto& o = doc.at("options");
    chart.options_.grid_points = o.at("grid_points").get<std::size_t>();
    chart.options_.first_period_cap = o.at("first_period_cap").get<double>();
    chart.options_.period_cap_factor = o.at("period_cap_factor").get<double>();
    chart.options_.transversal_max_time = o.at("transversal_max_time").get<double>();
    chart.options_.orbit_cache_capacity = o.at("orbit_cache_capacity").get<std::size_t>();
    chart.circulation_ = doc.at("circulation").get<int>();
    const int sign = doc.at("orientation").get<int>();

    std::vector<double> s = doc.at("gamma").at("s").get<std::vector<double>>();
    std::vector<ode::State> pts;
    for (const auto& p : doc.at("gamma").at("points")) pts.push_back(as_state(json_point(p)));
    chart.gamma_ = TransversalCurve(
        ode::Trajectory::from_knots(make_orthogonal(chart.field_, sign), std::move(s), std::move(pts), chart.options_.tol),
        sign);
    chart.r_lo_ = std::exp(chart.gamma_.s_min());
    chart.r_hi_ = std::exp(chart.gamma_.s_max());
    chart.r_grid_ = doc.at("grid").at("r").get<std::vector<double>>();
    for (const auto& p : doc.at("grid").at("v")) chart.grid_points_.push_back(json_point(p));
    chart.grid_periods_ = doc.at("grid").at("period").get<std::vector<double>>();
    if (chart.grid_points_.size() != chart.r_grid_.size() || chart.grid_periods_.size() != chart.r_grid_.size()) {
      throw Error(ErrorCode::ConfigInvalid, "grid arrays differ in length");
    }
    chart.init_cache();
    fill_diagnostics(chart, chart.diagnostics_, false);
    return chart;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("malformed chart document: {}", e.what()));
  }
}

}  // namespace torus
