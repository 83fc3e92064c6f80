#include "torus/catalog.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "torus/error.hpp"

namespace torus::catalog {

using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Point rotate(const Point& x, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Point(c * x.x() - s * x.y(), s * x.x() + c * x.y());
}

PlanarCentreField planar(std::function<Point(const Point&)> rhs, double inner, double outer, const std::string& id,
                         const json& params, std::size_t block) {
  PlanarCentreField f;
  f.rhs = std::move(rhs);
  f.inner_radius = inner;
  f.outer_radius = outer;
  f.descriptor = {{"system", id}, {"params", params}, {"block", block}};
  return f;
}

Point rotation_rhs(const Point& x) { return Point(-x.y(), x.x()); }

VectorXd vec(const json& a) {
  VectorXd v(Eigen::Index(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[Eigen::Index(i)] = a[i].get<double>();
  return v;
}

ode::State join(const VectorXd& r, const VectorXd& theta) {
  ode::State x(r.size() + theta.size());
  x << r, theta;
  return x;
}

double loglog(double t) { return std::log(std::log(t)); }

// int_a^b (exp(-2 / (s ln s)) - 1) ds
double quartic_phase_defect(double a, double b) {
  if (a == b) return 0.0;
  auto f = [](double s) { return std::expm1(-2.0 / (s * std::log(s))); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 30, 1e-14);
}

// --- entries ---------------------------------------------------------------

CatalogEntry linear_centre(const json& p) {
  CatalogEntry e;
  e.id = "linear_centre";
  e.summary = "x1' = -x2, x2' = x1";
  e.params = p;
  CartesianSystem sys;
  sys.blocks.push_back(planar(rotation_rhs, p["inner_radius"], p["outer_radius"], e.id, p, 0));
  e.cartesian = std::move(sys);
  e.analytic_solution = [](double t, double t0, const ode::State& x0) {
    const Point x = rotate(Point(x0[0], x0[1]), t - t0);
    return ode::State{{x.x(), x.y()}};
  };
  e.conserved = [](const ode::State& x) { return x.squaredNorm(); };
  e.analytic_notes = "rotation by t - t0";
  e.default_t0 = 0.0;
  e.default_t_end = 2 * std::numbers::pi;
  e.default_initial = ode::State{{1.0, 0.0}};
  return e;
}

CatalogEntry duffing_centre(const json& p) {
  CatalogEntry e;
  e.id = "duffing_centre";
  e.summary = "independent oscillators y'' + a y + b y^3 = 0";
  e.params = p;
  const double a = p["a"], b = p["b"];
  const int copies = p["copies"];
  if (!(a > 0.0) || b < 0.0 || copies < 1) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("duffing_centre needs a > 0, b >= 0, copies >= 1"));
  }
  CartesianSystem sys;
  for (int k = 0; k < copies; ++k) {
    sys.blocks.push_back(planar([a, b](const Point& x) { return Point(x.y(), -a * x.x() - b * std::pow(x.x(), 3)); },
                                p["inner_radius"], p["outer_radius"], e.id, p, std::size_t(k)));
  }
  e.cartesian = std::move(sys);
  e.conserved = [a, b](const ode::State& x) {
    double energy = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); i += 2) {
      energy += 0.5 * x[i + 1] * x[i + 1] + 0.5 * a * x[i] * x[i] + 0.25 * b * std::pow(x[i], 4);
    }
    return energy;
  };
  e.analytic_notes = "no closed form; energy is conserved";
  e.default_t0 = 0.0;
  e.default_t_end = 50.0;
  e.default_initial = ode::State::Zero(2 * copies);
  for (int k = 0; k < copies; ++k) e.default_initial[2 * k] = 0.5 + 0.25 * k;
  return e;
}

CatalogEntry ex4_1(const json& p) {
  CatalogEntry e;
  e.id = "ex4_1";
  e.summary = "r' = r^2 / t^2, theta' = 1";
  e.form = Form::ActionAngle;
  e.params = p;
  ActionAngleSystem s;
  s.A = [](const VectorXd&) { return VectorXd::Ones(1); };
  s.P = [](double t, const VectorXd& r, const VectorXd&) { return VectorXd(r.array().square() / (t * t)); };
  s.isochronous = true;
  e.action_angle = std::move(s);
  e.analytic_solution = [](double t, double t0, const ode::State& x0) {
    return ode::State{{1.0 / (1.0 / x0[0] - 1.0 / t0 + 1.0 / t), x0[1] + (t - t0)}};
  };
  e.analytic_notes = "1/r = 1/r0 - 1/t0 + 1/t; r = t is the separatrix between bounded and blow-up solutions";
  e.t_min = 0.0;
  e.default_t0 = p["t0"];
  e.default_t_end = 1e3;
  e.default_initial = ode::State{{p["rho0"].get<double>(), 0.0}};
  return e;
}

CatalogEntry ex4_2(const json& p) {
  CatalogEntry e;
  e.id = "ex4_2";
  e.summary = "linear centre forced by (cos t, sin t) / (t ln t)";
  e.params = p;
  CartesianSystem sys;
  sys.blocks.push_back(planar(rotation_rhs, p["inner_radius"], p["outer_radius"], e.id, p, 0));
  sys.perturbation = [](double t, const ode::State&) {
    return ode::State(ode::State{{std::cos(t), std::sin(t)}} / (t * std::log(t)));
  };
  e.cartesian = std::move(sys);
  e.analytic_solution = [](double t, double t0, const ode::State& x0) {
    // constants of x1 = (C1 + ln ln t) cos t - C2 sin t, x2 = (C1 + ln ln t) sin t + C2 cos t
    const double c1 = x0[0] * std::cos(t0) + x0[1] * std::sin(t0) - loglog(t0);
    const double c2 = -x0[0] * std::sin(t0) + x0[1] * std::cos(t0);
    const double amp = c1 + loglog(t);
    return ode::State{{amp * std::cos(t) - c2 * std::sin(t), amp * std::sin(t) + c2 * std::cos(t)}};
  };
  e.analytic_notes =
      "x1 = (C1 + ln ln t) cos t - C2 sin t, x2 = (C1 + ln ln t) sin t + C2 cos t";
  e.t_min = 2.0;
  e.default_t0 = 10.0;
  e.default_t_end = 1e5;
  const double c1 = p["C1"], c2 = p["C2"], t0 = e.default_t0;
  const double amp = c1 + loglog(t0);
  e.default_initial = ode::State{{amp * std::cos(t0) - c2 * std::sin(t0), amp * std::sin(t0) + c2 * std::cos(t0)}};
  return e;
}

CatalogEntry ex4_3(const json& p) {
  CatalogEntry e;
  e.id = "ex4_3";
  e.summary = "r1' = 1/t^2, r2' = 2/t^2, theta_k' = r_k";
  e.form = Form::ActionAngle;
  e.params = p;
  const VectorXd rates{{1.0, 2.0}};
  ActionAngleSystem s;
  s.m = s.n = 2;
  s.A = [](const VectorXd& r) { return r; };
  s.P = [rates](double t, const VectorXd&, const VectorXd&) { return VectorXd(rates / (t * t)); };
  e.action_angle = std::move(s);
  e.analytic_solution = [rates](double t, double t0, const ode::State& x0) {
    const VectorXd limit = x0.head(2) + rates / t0;
    const VectorXd r = limit - rates / t;
    const VectorXd th = x0.tail(2) + limit * (t - t0) - rates * std::log(t / t0);
    return join(r, th);
  };
  e.analytic_notes = "r_k = R_k - c_k / t, theta_k = R_k t - c_k ln t + Theta_k with c = (1, 2)";
  e.t_min = 0.0;
  e.default_t0 = 10.0;
  e.default_t_end = 1e5;
  const VectorXd limit = vec(p["r_limit"]), phase = vec(p["theta_constant"]);
  if (limit.size() != 2 || phase.size() != 2) throw Error(ErrorCode::ConfigInvalid, "ex4_3 constants need two entries");
  const double t0 = e.default_t0;
  e.default_initial = join(limit - rates / t0, limit * t0 - rates * std::log(t0) + phase);
  return e;
}

CatalogEntry ex4_5(const json& p) {
  CatalogEntry e;
  e.id = "ex4_5";
  e.summary = "linear centre with radial factor cos(ln ln t) / (t ln t)";
  e.params = p;
  CartesianSystem sys;
  sys.blocks.push_back(planar(rotation_rhs, p["inner_radius"], p["outer_radius"], e.id, p, 0));
  sys.perturbation = [](double t, const ode::State& x) {
    return ode::State(std::cos(loglog(t)) / (t * std::log(t)) * x);
  };
  e.cartesian = std::move(sys);
  e.analytic_solution = [](double t, double t0, const ode::State& x0) {
    const double scale = std::exp(std::sin(loglog(t)) - std::sin(loglog(t0)));
    const Point x = scale * rotate(Point(x0[0], x0[1]), t - t0);
    return ode::State{{x.x(), x.y()}};
  };
  e.analytic_notes =
      "x = r0 (cos t, sin t) exp(sin(ln ln t)); the perturbation scales both components by "
      "cos(ln ln t) / (t ln t)";
  e.t_min = 2.0;
  e.default_t0 = 10.0;
  e.default_t_end = 1e5;
  const double r0 = p["r0"], t0 = e.default_t0;
  e.default_initial = ode::State{{r0 * std::cos(t0), r0 * std::sin(t0)}} * std::exp(std::sin(loglog(t0)));
  return e;
}

CatalogEntry quartic_centre(const json& p) {
  CatalogEntry e;
  e.id = "quartic_centre";
  e.summary = "x1' = -x2^3, x2' = x1^3, optionally scaled by (1 + ln t) / (t ln t)^2";
  e.params = p;
  const bool perturbed = p["perturbed"];
  auto rate = [](double t) { return (1.0 + std::log(t)) / std::pow(t * std::log(t), 2); };
  CartesianSystem sys;
  sys.blocks.push_back(planar([](const Point& x) { return Point(-std::pow(x.y(), 3), std::pow(x.x(), 3)); },
                              p["inner_radius"], p["outer_radius"], e.id, p, 0));
  if (perturbed) sys.perturbation = [rate](double t, const ode::State& x) { return ode::State(rate(t) * x); };
  e.cartesian = std::move(sys);
  if (!perturbed) e.conserved = [](const ode::State& x) { return std::pow(x[0], 4) + std::pow(x[1], 4); };

  // image with x = r (Cn theta, Sn theta), where (Cn, Sn) starts at (1, 0)
  ActionAngleSystem s;
  s.A = [](const VectorXd& r) { return VectorXd(r.array().square()); };
  if (perturbed) s.P = [rate](double t, const VectorXd& r, const VectorXd&) { return VectorXd(rate(t) * r); };
  e.action_angle = std::move(s);
  if (perturbed) {
    e.image_solution = [](double t, double t0, const ode::State& x0) {
      const double limit = x0[0] * std::exp(1.0 / (t0 * std::log(t0)));
      const double r = limit * std::exp(-1.0 / (t * std::log(t)));
      const double lo = std::min(t0, t), hi = std::max(t0, t);
      const double defect = quartic_phase_defect(lo, hi) * (t >= t0 ? 1.0 : -1.0);
      return ode::State{{r, x0[1] + limit * limit * ((t - t0) + defect)}};
    };
  } else {
    e.image_solution = [](double t, double t0, const ode::State& x0) {
      return ode::State{{x0[0], x0[1] + x0[0] * x0[0] * (t - t0)}};
    };
  }
  e.analytic_notes =
      "x1^4 + x2^4 is conserved without perturbation; in the image coordinates r = R exp(-1/(t ln t)) and "
      "theta = theta0 + R^2 int exp(-2/(s ln s)) ds, whose phase residual drifts like -2 R^2 ln ln t";
  if (perturbed) e.t_min = 2.0;
  e.default_t0 = perturbed ? 2.0 : 0.0;
  e.default_t_end = perturbed ? 1e6 : 100.0;
  e.default_initial = ode::State{{1.0, 0.0}};
  return e;
}

CatalogEntry iso_note52(const json& p) {
  CatalogEntry e;
  e.id = "iso_note52";
  e.summary = "r' = t^-p, theta' = A0";
  e.form = Form::ActionAngle;
  e.params = p;
  const double pw = p["p"], a0 = p["A0"];
  if (!(pw > 0.0) || pw == 1.0) throw Error(ErrorCode::ConfigInvalid, fmt::format("iso_note52 needs p > 0, p != 1"));
  ActionAngleSystem s;
  s.A = [a0](const VectorXd&) { return VectorXd::Constant(1, a0); };
  s.P = [pw](double t, const VectorXd&, const VectorXd&) { return VectorXd::Constant(1, std::pow(t, -pw)); };
  s.isochronous = true;
  e.action_angle = std::move(s);
  e.analytic_solution = [pw, a0](double t, double t0, const ode::State& x0) {
    return ode::State{{x0[0] + (std::pow(t0, 1 - pw) - std::pow(t, 1 - pw)) / (pw - 1), x0[1] + a0 * (t - t0)}};
  };
  e.analytic_notes = "r = r0 + (t0^(1-p) - t^(1-p)) / (p - 1), theta = theta0 + A0 (t - t0); limit phase theta0 - A0 t0";
  e.t_min = 0.0;
  e.default_t0 = p["t0"];
  e.default_t_end = 1e4;
  e.default_initial = ode::State{{p["r0"].get<double>(), p["theta0"].get<double>()}};
  return e;
}

CatalogEntry thm51_smoke(const json& p) {
  CatalogEntry e;
  e.id = "thm51_smoke";
  e.summary = "r' = t^-3, theta' = r";
  e.form = Form::ActionAngle;
  e.params = p;
  ActionAngleSystem s;
  s.A = [](const VectorXd& r) { return r; };
  s.P = [](double t, const VectorXd&, const VectorXd&) { return VectorXd::Constant(1, std::pow(t, -3.0)); };
  e.action_angle = std::move(s);
  e.analytic_solution = [](double t, double t0, const ode::State& x0) {
    const double limit = x0[0] + 0.5 / (t0 * t0);
    return ode::State{{limit - 0.5 / (t * t), x0[1] + limit * (t - t0) + 0.5 * (1.0 / t - 1.0 / t0)}};
  };
  e.analytic_notes = "r = R - 1/(2 t^2), theta = R t + 1/(2 t) + const";
  e.t_min = 0.0;
  e.default_t0 = p["t0"];
  e.default_t_end = 1e3;
  e.default_initial = ode::State{{p["r0"].get<double>(), p["theta0"].get<double>()}};
  return e;
}

struct Recipe {
  json defaults;
  std::function<CatalogEntry(const json&)> build;
};

const std::map<std::string, Recipe>& recipes() {
  static const std::map<std::string, Recipe> table = {
      {"linear_centre", {{{"inner_radius", 0.05}, {"outer_radius", 20.0}}, linear_centre}},
      {"duffing_centre",
       {{{"a", 1.0}, {"b", 1.0}, {"copies", 1}, {"inner_radius", 0.05}, {"outer_radius", 2.0}}, duffing_centre}},
      {"ex4_1", {{{"rho0", 0.5}, {"t0", 1.0}}, ex4_1}},
      {"ex4_2", {{{"C1", 1.0}, {"C2", 0.0}, {"inner_radius", 0.05}, {"outer_radius", 40.0}}, ex4_2}},
      {"ex4_3", {{{"r_limit", {1.0, 2.0}}, {"theta_constant", {0.0, 0.0}}}, ex4_3}},
      {"ex4_5", {{{"r0", 1.0}, {"inner_radius", 0.05}, {"outer_radius", 20.0}}, ex4_5}},
      {"quartic_centre", {{{"perturbed", false}, {"inner_radius", 0.25}, {"outer_radius", 2.5}}, quartic_centre}},
      {"iso_note52", {{{"p", 1.5}, {"A0", 1.0}, {"r0", 1.0}, {"theta0", 0.3}, {"t0", 4.0}}, iso_note52}},
      {"thm51_smoke", {{{"r0", 1.0}, {"theta0", 0.0}, {"t0", 1.0}}, thm51_smoke}},
  };
  return table;
}

const Recipe& recipe(const std::string& id) {
  auto it = recipes().find(id);
  if (it == recipes().end()) throw Error(ErrorCode::UnknownSystem, fmt::format("no system named '{}'", id));
  return it->second;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return a.is_number_float() || b.is_number_integer();
  if (a.is_array() && b.is_array()) {
    return std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); });
  }
  return a.type() == b.type();
}

}  // namespace

ode::VectorField CartesianSystem::unperturbed_field() const {
  auto bl = blocks;
  return {dimension(),
          [bl](double, const ode::State& x) {
            ode::State dx(x.size());
            for (std::size_t k = 0; k < bl.size(); ++k) {
              const auto i = Eigen::Index(2 * k);
              dx.segment<2>(i) = bl[k](Point(x[i], x[i + 1]));
            }
            return dx;
          },
          true};
}

ode::VectorField CartesianSystem::field() const {
  if (!perturbation) return unperturbed_field();
  auto base = unperturbed_field();
  auto g = perturbation;
  return {dimension(), [base, g](double t, const ode::State& x) { return ode::State(base(t, x) + g(t, x)); }, false};
}

std::size_t CatalogEntry::dimension() const {
  if (form == Form::Cartesian) return cartesian->dimension();
  return action_angle->m + action_angle->n;
}

ode::VectorField CatalogEntry::field() const {
  if (form == Form::Cartesian) return cartesian->field();
  return action_angle->as_vector_field();
}

std::vector<std::string> list() {
  std::vector<std::string> ids;
  for (const auto& [id, _] : recipes()) ids.push_back(id);
  return ids;
}

const CatalogEntry& get(const std::string& id) {
  static const std::map<std::string, CatalogEntry> entries = [] {
    std::map<std::string, CatalogEntry> m;
    for (const auto& [key, r] : recipes()) m.emplace(key, r.build(r.defaults));
    return m;
  }();
  recipe(id);
  return entries.at(id);
}

CatalogEntry make(const std::string& id, const json& overrides) {
  const Recipe& r = recipe(id);
  if (overrides.is_null()) return r.build(r.defaults);
  if (!overrides.is_object()) throw Error(ErrorCode::ConfigInvalid, "system parameters must be a JSON object");
  json params = r.defaults;
  for (const auto& [key, value] : overrides.items()) {
    if (!params.contains(key)) {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("system '{}' has no parameter '{}'", id, key));
    }
    if (!same_kind(params[key], value)) {
      throw Error(ErrorCode::ConfigInvalid,
                  fmt::format("parameter '{}' of '{}' expects {}, got {}", key, id, params[key].type_name(),
                              value.type_name()));
    }
    params[key] = value;
  }
  try {
    return r.build(params);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("parameters of '{}': {}", id, e.what()));
  }
}

PlanarCentreField resolve_field(const json& descriptor) {
  try {
    const CatalogEntry e = make(descriptor.at("system").get<std::string>(), descriptor.value("params", json::object()));
    if (!e.cartesian) throw Error(ErrorCode::ConfigInvalid, fmt::format("system '{}' has no planar field", e.id));
    const auto block = descriptor.value("block", std::size_t(0));
    if (block >= e.cartesian->blocks.size()) {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("system '{}' has no block {}", e.id, block));
    }
    return e.cartesian->blocks[block];
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("field descriptor: {}", e.what()));
  }
}

json describe(const CatalogEntry& e) {
  auto bound = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json initial = json::array();
  for (Eigen::Index i = 0; i < e.default_initial.size(); ++i) initial.push_back(e.default_initial[i]);
  return {{"id", e.id},
          {"summary", e.summary},
          {"form", e.form == Form::Cartesian ? "cartesian" : "action_angle"},
          {"dimension", e.dimension()},
          {"params", e.params},
          {"analytic_solution", bool(e.analytic_solution)},
          {"analytic_notes", e.analytic_notes},
          {"valid_t_range", {bound(e.t_min), bound(e.t_max)}},
          {"default_t0", e.default_t0},
          {"default_t_end", e.default_t_end},
          {"default_initial", initial}};
}

}  // namespace torus::catalog
