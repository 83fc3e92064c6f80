#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "torus/error.hpp"
#include "torus/ode.hpp"

using torus::Error;
using torus::ErrorCode;
using namespace torus::ode;

namespace {

VectorField rotation() {
  return {2, [](double, const State& x) { return State{{-x[1], x[0]}}; }, true};
}

VectorField growth() {
  return {1, [](double, const State& x) { return State{{x[0]}}; }, true};
}

State vec(std::initializer_list<double> v) {
  State s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) s[i++] = d;
  return s;
}

// e from its Taylor series in long double.
double e_series() {
  long double sum = 0.0L, term = 1.0L;
  for (int k = 1; k < 30; ++k) {
    sum += term;
    term /= k;
  }
  return static_cast<double>(sum);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigInvalid;
}

}  // namespace

TEST_CASE("zero field keeps the state constant") {
  VectorField zero{2, [](double, const State&) { return State::Zero(2); }, true};
  Trajectory traj = integrate(zero, vec({1, 2}), 0.0, 5.0, 1e-10);
  CHECK(traj.t_min() == 0.0);
  CHECK(traj.t_max() == 5.0);
  for (double t : {0.0, 1.3, 2.5, 5.0}) {
    State x = traj.dense_eval(t);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 2.0);
  }
}

TEST_CASE("linear centre quarter turn") {
  const double tol = 1e-10;
  Trajectory traj = integrate(rotation(), vec({1, 0}), 0.0, std::numbers::pi / 2, tol);
  CHECK(std::abs(traj.back()[0]) < 10 * tol);
  CHECK(std::abs(traj.back()[1] - 1.0) < 10 * tol);
}

TEST_CASE("exponential growth reaches e") {
  const double tol = 1e-12;
  Trajectory traj = integrate(growth(), vec({1}), 0.0, 1.0, tol);
  CHECK(std::abs(traj.back()[0] - e_series()) < 10 * tol * e_series());
}

TEST_CASE("backward integration spans the interval in increasing order") {
  Trajectory traj = integrate(rotation(), vec({1, 0}), 0.0, -std::numbers::pi, 1e-11);
  CHECK(traj.t_min() == doctest::Approx(-std::numbers::pi));
  CHECK(traj.t_max() == 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj.times()[i] > traj.times()[i - 1]);
  State x = traj.dense_eval(-std::numbers::pi / 2);
  CHECK(std::abs(x[0]) < 1e-9);
  CHECK(std::abs(x[1] + 1.0) < 1e-9);
}

TEST_CASE("dense output is exact at knots and accurate between them") {
  const double tol = 1e-9;
  Trajectory traj = integrate(rotation(), vec({1, 0}), 0.0, 20.0, tol);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    State x = traj.dense_eval(traj.times()[i]);
    CHECK(x == traj.states()[i]);
  }
  // Check mid-step interpolants against a tight re-integration from the knot.
  for (std::size_t i = 0; i + 1 < traj.size(); i += 3) {
    const double tm = 0.5 * (traj.times()[i] + traj.times()[i + 1]);
    Trajectory fine = integrate(rotation(), traj.states()[i], traj.times()[i], tm, tol * 1e-3);
    CHECK((traj.dense_eval(tm) - fine.back()).norm() < 10 * tol);
  }
}

TEST_CASE("time reversal returns to the initial state") {
  const double tol = 1e-10;
  const State x0 = vec({0.3, -1.2});
  Trajectory fwd = integrate(rotation(), x0, 0.0, 7.5, tol);
  Trajectory back = integrate(rotation(), fwd.back(), 7.5, 0.0, tol);
  CHECK((back.front() - x0).norm() < 10 * tol * (1 + x0.norm()));
}

TEST_CASE("halving the tolerance scales the endpoint error with the method order") {
  // Global error of the tolerance-proportional DOP853 controller scales like
  // tol, so halving tol should roughly halve the error.
  auto endpoint_error = [](double tol) {
    Trajectory traj = integrate(rotation(), vec({1, 0}), 0.0, 20.0, tol);
    return std::hypot(traj.back()[0] - std::cos(20.0), traj.back()[1] - std::sin(20.0));
  };
  const double coarse = endpoint_error(1e-7);
  const double fine = endpoint_error(1e-7 / 64.0);
  const double per_halving = std::pow(coarse / fine, 1.0 / 6.0);
  CHECK(per_halving > 1.0);
  CHECK(per_halving < 4.0);
}

TEST_CASE("integrate_to_event examples") {
  const double tol = 1e-12;
  SUBCASE("full revolution of the linear centre") {
    EventSpec ev{[](double, const State& x) { return x[1]; }, Direction::Rising};
    EventResult res = integrate_to_event(rotation(), vec({1, 0}), 0.0, 10.0, ev, tol);
    CHECK(std::abs(res.t_event - 2 * std::numbers::pi) < 1e-9);
  }
  SUBCASE("unit drift hits x = 1") {
    VectorField drift{1, [](double, const State&) { return State::Ones(1); }, true};
    EventSpec ev{[](double, const State& x) { return x[0] - 1.0; }, Direction::Any};
    EventResult res = integrate_to_event(drift, vec({0}), 0.0, 5.0, ev, tol);
    CHECK(res.t_event == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("quarter turn via falling x1") {
    EventSpec ev{[](double, const State& x) { return x[0]; }, Direction::Falling};
    EventResult res = integrate_to_event(rotation(), vec({1, 0}), 0.0, 10.0, ev, tol);
    CHECK(std::abs(res.t_event - std::numbers::pi / 2) < 1e-10);
    CHECK(std::abs(res.x_event[0]) < 1e-10);
  }
  SUBCASE("missing event is reported") {
    EventSpec ev{[](double, const State& x) { return x[0] - 5.0; }, Direction::Any};
    CHECK(code_of([&] { integrate_to_event(rotation(), vec({1, 0}), 0.0, 20.0, ev, tol); }) ==
          ErrorCode::EventNotFound);
  }
}

TEST_CASE("successive crossings are spaced by one period over 100 revolutions") {
  const double tol = 1e-12;
  EventSpec ev{[](double, const State& x) { return x[1]; }, Direction::Rising, false};
  EventRun run = integrate_with_events(rotation(), vec({1, 0}), 0.0, 101 * 2 * std::numbers::pi + 1.0,
                                       {ev}, IntegratorOptions{tol}, false);
  REQUIRE(run.hits.size() >= 100);
  for (std::size_t i = 1; i < run.hits.size(); ++i) {
    CHECK(std::abs(run.hits[i].t - run.hits[i - 1].t - 2 * std::numbers::pi) < 1e-9);
  }
}

TEST_CASE("failure modes") {
  SUBCASE("non-finite field value") {
    VectorField bad{1, [](double, const State& x) { return State{{x[0] > 0.5 ? NAN : 1.0}}; }, true};
    CHECK(code_of([&] { integrate(bad, vec({0}), 0.0, 1.0, 1e-8); }) == ErrorCode::NonFiniteState);
  }
  SUBCASE("finite-time blow-up") {
    VectorField blowup{1, [](double, const State& x) { return State{{x[0] * x[0]}}; }, true};
    ErrorCode code = code_of([&] { integrate(blowup, vec({1}), 0.0, 2.0, 1e-8); });
    CHECK((code == ErrorCode::StepSizeUnderflow || code == ErrorCode::NonFiniteState));
  }
  SUBCASE("dense evaluation outside the span") {
    Trajectory traj = integrate(rotation(), vec({1, 0}), 0.0, 1.0, 1e-8);
    CHECK(code_of([&] { traj.dense_eval(2.0); }) == ErrorCode::OutOfRange);
  }
}

TEST_CASE("trajectory rebuilt from knots reproduces the interpolant") {
  const double tol = 1e-11;
  Trajectory traj = integrate(rotation(), vec({1, 0}), 0.0, 6.0, tol);
  Trajectory rebuilt = Trajectory::from_knots(rotation(), traj.times(), traj.states(), tol);
  for (double t = 0.05; t < 6.0; t += 0.37) {
    CHECK((rebuilt.dense_eval(t) - traj.dense_eval(t)).norm() < 1e-10);
  }
}
