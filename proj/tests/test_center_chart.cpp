#include "doctest.h"

#include <cmath>
#include <numbers>

#include "torus/center_chart.hpp"
#include "torus/error.hpp"

using namespace torus;

namespace {

PlanarCentreField linear_field() {
  PlanarCentreField f;
  f.rhs = [](const Point& x) { return Point(-x.y(), x.x()); };
  f.inner_radius = 0.05;
  f.outer_radius = 20.0;
  f.descriptor = {{"name", "linear"}};
  return f;
}

PlanarCentreField quartic_field() {
  PlanarCentreField f;
  f.rhs = [](const Point& x) { return Point(-std::pow(x.y(), 3), std::pow(x.x(), 3)); };
  f.inner_radius = 0.25;
  f.outer_radius = 2.5;
  f.descriptor = {{"name", "quartic"}};
  return f;
}

const ActionAngleChart& linear_chart() {
  static const ActionAngleChart chart = build_chart(linear_field(), Point(1, 0));
  return chart;
}

const ActionAngleChart& quartic_chart() {
  static const ActionAngleChart chart = build_chart(quartic_field(), Point(1, 0));
  return chart;
}

// On the axis the orthogonal flow of the quartic field is x' = x^3 from x = 1,
// so s = (1 - 1/x^2)/2 and the section point at action r has
// x = 1/sqrt(1 - 2 ln r).
double quartic_amplitude(double r) { return 1.0 / std::sqrt(1.0 - 2.0 * std::log(r)); }

double quartic_energy(const Point& x) { return std::pow(x.x(), 4) + std::pow(x.y(), 4); }

}  // namespace

TEST_CASE("orthogonal field of the linear centre is the outward radial field") {
  OrthogonalField orth = orthogonal_field(linear_field(), Point(1, 0));
  for (Point q : {Point(1, 0), Point(0.3, -2), Point(-4, 1)}) {
    ode::State d = orth.field(0.0, ode::State{{q.x(), q.y()}});
    CHECK(d[0] == doctest::Approx(q.x()));
    CHECK(d[1] == doctest::Approx(q.y()));
  }
}

TEST_CASE("orthogonal field of the quartic centre") {
  OrthogonalField orth = orthogonal_field(quartic_field(), Point(1, 0));
  const Point q(0.7, -1.3);
  ode::State d = orth.field(0.0, ode::State{{q.x(), q.y()}});
  CHECK(d[0] == doctest::Approx(std::pow(q.x(), 3)));
  CHECK(d[1] == doctest::Approx(std::pow(q.y(), 3)));
  const Point f = quartic_field()(q);
  CHECK(f.dot(Point(d[0], d[1])) == 0.0);
}

TEST_CASE("orientation fails for a radial source") {
  PlanarCentreField node;
  node.rhs = [](const Point& x) { return Point(x.x(), x.y()); };
  // The orthogonal flows are rotations, so the norm never increases.
  CHECK_THROWS_AS(orthogonal_field(node, Point(1, 0)), Error);
}

TEST_CASE("invalid fields are rejected") {
  PlanarCentreField shifted = linear_field();
  shifted.rhs = [](const Point& x) { return Point(-x.y() + 1.0, x.x()); };
  CHECK_THROWS_AS(shifted.validate(), Error);
}

TEST_CASE("linear centre transversal is the positive axis with exponential parameter") {
  const TransversalCurve& g = linear_chart().gamma();
  CHECK(g.norm_strictly_increasing());
  CHECK(g.orthogonality_residual(linear_field()) < 1e-6);
  for (double s : {-2.9, -1.0, 0.0, 0.5, 2.9}) {
    Point p = g.point(s);
    CHECK(p.x() == doctest::Approx(std::exp(s)).epsilon(1e-9));
    CHECK(std::abs(p.y()) < 1e-12);
  }
  CHECK(g.norm_min() == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(g.norm_max() == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("quartic transversal stays on the axis") {
  const TransversalCurve& g = quartic_chart().gamma();
  CHECK(g.orthogonality_residual(quartic_field()) < 1e-6);
  for (double s : {-7.0, -2.0, 0.0, 0.4}) {
    Point p = g.point(s);
    CHECK(std::abs(p.y()) < 1e-12);
    CHECK(p.x() == doctest::Approx(1.0 / std::sqrt(1.0 - 2.0 * s)).epsilon(1e-8));
  }
}

TEST_CASE("linear chart: action is the Euclidean norm and the period is 2 pi") {
  const ActionAngleChart& chart = linear_chart();
  for (double r : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    CHECK(std::abs(chart.period(r) - 2 * std::numbers::pi) < 1e-6);
    CHECK(std::abs(chart.frequency(r) - 1 / (2 * std::numbers::pi)) < 1e-7);
    Point v = chart.section_point(r);
    CHECK(v.x() == doctest::Approx(r).epsilon(1e-9));
    CHECK(std::abs(v.y()) < 1e-12);
    CHECK(std::abs(chart.action_of(v) - r) < 1e-8);
    for (double phi : {0.3, 1.9, 3.14, 5.0}) {
      const Point x(r * std::cos(phi), r * std::sin(phi));
      CHECK(std::abs(chart.action_of(x) - r) < 1e-6 * r);
    }
  }
  CHECK(check_isochronous(chart, chart.r_grid(), 1e-6));
  CHECK(chart.diagnostics().max_section_round_trip < 1e-8);
  CHECK(chart.diagnostics().period_continuous);
}

TEST_CASE("section points move outward with r") {
  const ActionAngleChart& chart = quartic_chart();
  double last = 0.0;
  for (double r : chart.r_grid()) {
    const double n = chart.section_point(r).norm();
    CHECK(n > last);
    last = n;
  }
}

TEST_CASE("quartic chart: period scaling and non-isochrony") {
  const ActionAngleChart& chart = quartic_chart();
  // section point amplitude a is 1/sqrt(1 - 2 ln r); T a^2 must be constant.
  std::vector<double> products;
  for (double a : {0.5, 0.75, 1.0, 1.5, 2.0}) {
    const double r = std::exp((1.0 - 1.0 / (a * a)) / 2.0);
    CHECK(quartic_amplitude(r) == doctest::Approx(a));
    CHECK(chart.section_point(r).x() == doctest::Approx(a).epsilon(1e-9));
    products.push_back(chart.period(r) * a * a);
    CHECK(chart.frequency(r) / (a * a) == doctest::Approx(1.0 / products.back()).epsilon(1e-12));
  }
  for (double p : products) CHECK(std::abs(p / products.front() - 1.0) < 1e-4);
  CHECK_FALSE(check_isochronous(chart, chart.r_grid(), 1e-3));
  CHECK(check_isochronous(chart, {chart.r_grid()[3]}, 0.0));
  CHECK(chart.diagnostics().min_period > 0.0);
}

TEST_CASE("flowing for two periods also returns") {
  const ActionAngleChart& chart = quartic_chart();
  const double r = 0.8;
  const Point v = chart.section_point(r);
  const double T = chart.period(r);
  ode::Trajectory traj = ode::integrate(chart.field().as_vector_field(), ode::State{{v.x(), v.y()}}, 0.0, 2 * T, 1e-11);
  CHECK((Point(traj.back()[0], traj.back()[1]) - v).norm() < 1e-6 * (1 + v.norm()));
}

TEST_CASE("quartic action is constant along a cycle and over 100 periods") {
  const ActionAngleChart& chart = quartic_chart();
  const Point x0(0.9, 0.4);
  const double r0 = chart.action_of(x0);
  // oracle: the section point carries the same x1^4 + x2^4
  CHECK(quartic_energy(chart.section_point(r0)) == doctest::Approx(quartic_energy(x0)).epsilon(1e-8));
  const double T = chart.period(r0);
  ode::Trajectory traj = ode::integrate(chart.field().as_vector_field(), ode::State{{x0.x(), x0.y()}}, 0.0, 100 * T, 1e-12);
  for (double t : {0.17 * T, 0.5 * T, 0.93 * T}) {
    ode::State x = traj.dense_eval(t);
    CHECK(std::abs(chart.action_of(Point(x[0], x[1])) - r0) < 1e-6 * r0);
  }
  const Point xe(traj.back()[0], traj.back()[1]);
  CHECK(std::abs(chart.action_of(xe) - r0) < 1e-5 * r0);
}

TEST_CASE("distinct grid cycles are disjoint") {
  const ActionAngleChart& chart = quartic_chart();
  // Cycles are level sets of x1^4 + x2^4; sample two neighbouring ones.
  auto cycle_points = [&](double r) {
    auto orb = chart.orbit(r);
    std::vector<Point> pts;
    for (int k = 0; k < 64; ++k) {
      ode::State x = orb->path.dense_eval(orb->period * k / 64.0);
      pts.emplace_back(x[0], x[1]);
    }
    return pts;
  };
  auto a = cycle_points(chart.r_grid()[10]);
  auto b = cycle_points(chart.r_grid()[11]);
  double dmin = 1e300;
  for (const auto& p : a)
    for (const auto& q : b) dmin = std::min(dmin, (p - q).norm());
  CHECK(dmin > 0.0);
}

TEST_CASE("out of range requests") {
  const ActionAngleChart& chart = linear_chart();
  CHECK_THROWS_AS(chart.section_point(100.0), Error);
  try {
    chart.action_of(Point(100.0, 3.0));
    FAIL("expected OutsideChart");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutsideChart);
  }
}

TEST_CASE("chart json round trip keeps stored samples exactly") {
  const ActionAngleChart& chart = quartic_chart();
  nlohmann::json doc = chart_to_json(chart);
  nlohmann::json reparsed = nlohmann::json::parse(doc.dump());
  ActionAngleChart back = chart_from_json(reparsed, [](const nlohmann::json&) { return quartic_field(); });
  CHECK(back.r_grid() == chart.r_grid());
  CHECK(back.grid_periods() == chart.grid_periods());
  CHECK(back.gamma().path().times() == chart.gamma().path().times());
  CHECK(back.gamma().path().states() == chart.gamma().path().states());
  CHECK(chart_to_json(back).dump() == doc.dump());
  const double r = 0.37;
  CHECK(back.period(r) == doctest::Approx(chart.period(r)).epsilon(1e-9));
  CHECK(back.action_of(Point(0.6, -0.5)) == doctest::Approx(chart.action_of(Point(0.6, -0.5))).epsilon(1e-9));
}
