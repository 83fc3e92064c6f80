#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "torus/catalog.hpp"
#include "torus/error.hpp"

using namespace torus;
using catalog::CatalogEntry;

namespace {

// Random initial state near the entry's default and a time inside its range.
struct Sampler {
  std::mt19937_64 rng{2024};
  std::uniform_real_distribution<double> u{0.0, 1.0};

  ode::State initial(const CatalogEntry& e) {
    ode::State x = e.default_initial;
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.5 * (u(rng) - 0.5) * (1.0 + std::abs(x[i]));
    return x;
  }
  double span(const CatalogEntry& e) { return std::min(e.default_t_end - e.default_t0, 200.0) * u(rng); }
};

void check_residuals(const std::string& id, const ode::VectorField& f, const catalog::AnalyticSolution& sol,
                     const std::function<ode::State(Sampler&)>& init) {
  const CatalogEntry& e = catalog::get(id);
  Sampler s;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const ode::State x0 = init(s);
    const double t0 = e.default_t0;
    const double t = t0 + 0.01 + s.span(e);
    const double h = 1e-5;
    const ode::State dx = (sol(t + h, t0, x0) - sol(t - h, t0, x0)) / (2 * h);
    const ode::State fx = f(t, sol(t, t0, x0));
    worst = std::max(worst, (dx - fx).norm() / (1.0 + fx.norm()));
  }
  INFO(id);
  CHECK(worst < 1e-5);
}

}  // namespace

TEST_CASE("catalog lists every entry and rejects unknown ids") {
  const auto ids = catalog::list();
  for (const char* id : {"linear_centre", "duffing_centre", "ex4_1", "ex4_2", "ex4_3", "ex4_5", "quartic_centre",
                         "iso_note52", "thm51_smoke"}) {
    CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
  }
  CHECK(ids.size() == 9);
  try {
    catalog::get("ex9_9");
    FAIL("expected UnknownSystem");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::UnknownSystem);
  }
}

TEST_CASE("analytic solutions satisfy their equations") {
  for (const auto& id : catalog::list()) {
    const CatalogEntry& e = catalog::get(id);
    if (e.analytic_solution) {
      check_residuals(id, e.field(), e.analytic_solution, [&](Sampler& s) { return s.initial(e); });
    }
    if (e.image_solution) {
      check_residuals(id, e.action_angle->as_vector_field(), e.image_solution, [](Sampler& s) {
        return ode::State{{0.5 + s.u(s.rng), s.u(s.rng)}};
      });
    }
  }
  const CatalogEntry q = catalog::make("quartic_centre", {{"perturbed", true}});
  Sampler s;
  for (int i = 0; i < 100; ++i) {
    const ode::State x0{{0.5 + s.u(s.rng), s.u(s.rng)}};
    const double t = 2.5 + 1e3 * s.u(s.rng), h = 1e-5;
    const ode::State dx = (q.image_solution(t + h, 2.0, x0) - q.image_solution(t - h, 2.0, x0)) / (2 * h);
    const ode::State fx = q.action_angle->as_vector_field()(t, q.image_solution(t, 2.0, x0));
    CHECK((dx - fx).norm() < 1e-5 * (1 + fx.norm()));
  }
}

TEST_CASE("numeric integration follows the closed forms") {
  const double tol = 1e-10;
  for (const auto& id : catalog::list()) {
    const CatalogEntry& e = catalog::get(id);
    if (!e.analytic_solution) continue;
    const double t0 = e.default_t0;
    const double t1 = t0 + std::min(e.default_t_end - t0, 100.0);
    ode::Trajectory traj = ode::integrate(e.field(), e.default_initial, t0, t1, tol);
    for (int k = 1; k <= 10; ++k) {
      const double t = t0 + (t1 - t0) * k / 10.0;
      const ode::State exact = e.analytic_solution(t, t0, e.default_initial);
      INFO(id << " at t = " << t);
      CHECK((traj.dense_eval(t) - exact).norm() <= 10 * tol * (1 + exact.norm()));
    }
  }
}

TEST_CASE("closed-form examples") {
  const CatalogEntry& ex = catalog::get("ex4_3");
  // constants R = (1, 1), Theta = (0, 0) fix the state at t = 1 as r = (0, -1), theta = (1, 1)
  const ode::State at1{{0.0, -1.0, 1.0, 1.0}};
  const ode::State x = ex.analytic_solution(10.0, 1.0, at1);
  CHECK(x[0] == doctest::Approx(0.9));
  CHECK(x[1] == doctest::Approx(0.8));
  CHECK(x[2] == doctest::Approx(10.0 - std::log(10.0)));

  const ode::State y = catalog::get("linear_centre").analytic_solution(std::numbers::pi, 0.0, ode::State{{1.0, 0.0}});
  CHECK(std::abs(y[0] + 1.0) < 1e-15);
  CHECK(std::abs(y[1]) < 1e-15);

  const CatalogEntry& q = catalog::get("quartic_centre");
  ode::Trajectory traj = ode::integrate(q.field(), ode::State{{1.0, 0.0}}, 0.0, 100.0, 1e-12);
  double drift = 0.0;
  for (double t = 0.0; t <= 100.0; t += 0.5) drift = std::max(drift, std::abs(q.conserved(traj.dense_eval(t)) - 1.0));
  CHECK(drift < 1e-6);
}

TEST_CASE("parameter overrides") {
  CatalogEntry iso = catalog::make("iso_note52", {{"p", 1.8}});
  CHECK(iso.params["p"] == 1.8);
  CHECK(iso.action_angle->P(2.0, ode::State::Zero(1), ode::State::Zero(1))[0] == doctest::Approx(std::pow(2.0, -1.8)));
  CatalogEntry duff = catalog::make("duffing_centre", {{"copies", 2}});
  CHECK(duff.dimension() == 4);
  auto code = [](const nlohmann::json& o) {
    try {
      catalog::make("iso_note52", o);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::NoReturn;
  };
  CHECK(code({{"q", 2.0}}) == ErrorCode::ConfigInvalid);
  CHECK(code({{"p", "fast"}}) == ErrorCode::ConfigInvalid);
  CHECK(code({{"p", 1.0}}) == ErrorCode::ConfigInvalid);
  CHECK(code(nlohmann::json::array()) == ErrorCode::ConfigInvalid);
}

TEST_CASE("descriptors resolve back to the planar field") {
  const CatalogEntry duff = catalog::make("duffing_centre", {{"b", 0.5}, {"copies", 2}});
  const PlanarCentreField& f = duff.cartesian->blocks[1];
  const PlanarCentreField g = catalog::resolve_field(f.descriptor);
  const Point x(0.3, -0.7);
  CHECK((f(x) - g(x)).norm() == 0.0);
  CHECK(g.outer_radius == f.outer_radius);
  nlohmann::json bad = f.descriptor;
  bad["block"] = 5;
  CHECK_THROWS_AS(catalog::resolve_field(bad), Error);
  CHECK(catalog::describe(catalog::get("ex4_2"))["valid_t_range"][0] == 2.0);
}
