#include "doctest.h"

#include <cmath>

#include "torus/asymptotics.hpp"
#include "torus/error.hpp"

using namespace torus;
using Eigen::VectorXd;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }
VectorXd v2(double a, double b) { return VectorXd{{a, b}}; }

std::vector<DecaySample> magnitudes(double t0, double t1, const std::function<double(double)>& m) {
  std::vector<DecaySample> out;
  for (double t : sample_times(t0, t1)) out.push_back({t, m(t), 0.0});
  return out;
}

// r' = t^-3, theta' = r
ActionAngleSystem cubic_drift() {
  ActionAngleSystem s;
  s.A = [](const VectorXd& r) { return r; };
  s.P = [](double t, const VectorXd&, const VectorXd&) { return v1(std::pow(t, -3.0)); };
  return s;
}

// r' = (1, 2) / t^2, theta' = r
ActionAngleSystem two_rates() {
  ActionAngleSystem s;
  s.m = s.n = 2;
  s.A = [](const VectorXd& r) { return r; };
  s.P = [](double t, const VectorXd&, const VectorXd&) { return VectorXd(v2(1.0, 2.0) / (t * t)); };
  return s;
}

int code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return int(e.code());
  }
  return -1;
}

}  // namespace

TEST_CASE("sample times include the dyadic checkpoints") {
  auto ts = sample_times(1.0, 1000.0);
  CHECK(ts.front() == 1.0);
  CHECK(ts.back() == 1000.0);
  for (double c = 1000.0; c >= 1.0; c *= 0.5) CHECK(std::find(ts.begin(), ts.end(), c) != ts.end());
  CHECK(std::is_sorted(ts.begin(), ts.end()));
  CHECK(ts.size() >= 120);
}

TEST_CASE("decay exponent") {
  SUBCASE("pure power") {
    DecayFit f = estimate_decay_exponent(magnitudes(1.0, 1e4, [](double t) { return 7.0 * std::pow(t, -3.0); }));
    CHECK(std::abs(f.p_hat - 3.0) <= 0.01);
    CHECK(f.above_two);
  }
  SUBCASE("logarithmic correction") {
    DecayFit f = estimate_decay_exponent(magnitudes(2.0, 1e6, [](double t) { return 1.0 / (t * std::log(t)); }));
    CHECK(f.power_law_slope > 1.0);
    CHECK(std::abs(f.p_hat - 1.0) < 0.01);
    CHECK(std::abs(f.log_exponent - 1.0) < 0.05);
    CHECK_FALSE(f.above_one);
  }
  SUBCASE("scale invariance") {
    auto m = [](double t) { return std::pow(t, -2.5) * (2 + std::sin(t)); };
    DecayFit a = estimate_decay_exponent(magnitudes(1.0, 1e5, m));
    DecayFit b = estimate_decay_exponent(magnitudes(1.0, 1e5, [&](double t) { return 1e3 * m(t); }));
    CHECK(std::abs(a.p_hat - b.p_hat) < 1e-9);
    CHECK(std::abs(a.p_hat - 2.5) < a.confidence + 0.02);
  }
  SUBCASE("refusals") {
    CHECK(code_of([] { estimate_decay_exponent(magnitudes(1.0, 1e4, [](double) { return 0.3; })); }) ==
          int(ErrorCode::NonDecaying));
    CHECK(code_of([] { estimate_decay_exponent(magnitudes(1.0, 30.0, [](double t) { return 1 / t; })); }) ==
          int(ErrorCode::InsufficientSpan));
    std::vector<DecaySample> few;
    for (int i = 0; i < 10; ++i) few.push_back({std::pow(10.0, i), 1.0 / (i + 1), 0.0});
    CHECK(code_of([&] { estimate_decay_exponent(few); }) == int(ErrorCode::InsufficientSpan));
  }
}

TEST_CASE("boundedness classification for a quadratic majorant") {
  ComparisonModel cm(AlphaFamily::Quadratic, 1.0, 2.0);
  REQUIRE(cm.G_star());
  CHECK(*cm.G_star() == 1.0);
  BoundedClass below = classify_boundedness(cm, 0.5, 1.0);
  CHECK(below.kind == BoundedKind::ConditionallyBounded);
  CHECK(*below.t0_min == doctest::Approx(0.5));
  BoundedClass above = classify_boundedness(cm, 2.0, 1.0);
  CHECK(above.kind == BoundedKind::UnboundedEvidence);
  CHECK(*above.t0_min == doctest::Approx(2.0));
  // the separatrix itself is not bounded
  CHECK(classify_boundedness(cm, 5.0, 5.0).kind == BoundedKind::UnboundedEvidence);
  CHECK(classify_boundedness(cm, 5.0, 5.0001).kind == BoundedKind::ConditionallyBounded);

  CHECK(classify_boundedness(ComparisonModel(AlphaFamily::Constant, 3.0, 1.5), 100.0, 1.0).kind ==
        BoundedKind::AllBounded);
  CHECK(classify_boundedness(ComparisonModel(AlphaFamily::Linear, 3.0, 1.5), 100.0, 1.0).kind ==
        BoundedKind::AllBounded);
  CHECK(code_of([] { classify_boundedness(ComparisonModel(AlphaFamily::Quadratic, 1.0, 1.0), 1.0, 1.0); }) ==
        int(ErrorCode::ExponentTooSmall));
}

TEST_CASE("comparison solutions") {
  ComparisonModel quad(AlphaFamily::Quadratic, 1.0, 2.0);
  SUBCASE("closed form of rho' = rho^2 / t^2") {
    for (double rho0 : {0.3, 0.9}) {
      for (double t : {1.5, 10.0, 1e4}) {
        const double exact = 1.0 / (1.0 / rho0 - 1.0 + 1.0 / t);
        CHECK(std::abs(comparison_solution(quad, rho0, 1.0, t) - exact) <= 1e-12 * exact);
      }
    }
  }
  SUBCASE("separatrix rho = t") {
    for (double t : {2.0, 100.0, 1e6}) {
      CHECK(std::abs(comparison_solution(quad, 1.0, 1.0, t) - t) <= 1e-6 * t);
    }
  }
  SUBCASE("blow-up time") {
    try {
      comparison_solution(quad, 2.0, 1.0, 5.0);
      FAIL("expected blow-up");
    } catch (const BlowUpError& e) {
      CHECK(e.t_blow() == doctest::Approx(2.0));
    }
  }
  SUBCASE("custom majorant agrees with direct integration") {
    auto alpha = [](double s) { return 0.5 * s * std::sqrt(1.0 + s); };
    ComparisonModel cm(alpha, 2.5);
    CHECK(cm.g_star_heuristic());
    REQUIRE(cm.G_star());
    ode::VectorField f{1, [&](double t, const ode::State& x) { return ode::State(v1(alpha(x[0]) / std::pow(t, 2.5))); },
                       false};
    ode::Trajectory traj = ode::integrate(f, v1(0.7), 1.0, 50.0, 1e-12);
    for (double t : {2.0, 10.0, 50.0}) {
      CHECK(std::abs(comparison_solution(cm, 0.7, 1.0, t) - traj.dense_eval(t)[0]) < 1e-6);
    }
  }
  SUBCASE("custom majorant with infinite G") {
    ComparisonModel cm([](double s) { return 1.0 + s; }, 2.0);
    CHECK_FALSE(cm.G_star());
    CHECK(classify_boundedness(cm, 4.0, 1.0).kind == BoundedKind::AllBounded);
  }
}

TEST_CASE("dominating bound") {
  SUBCASE("two rates") {
    const auto sys = two_rates();
    PhaseTrajectory tr = simulate(sys, v2(0.1, 0.2), v2(0, 0), 1.0, 1e3, 1e-12, sample_times(1.0, 1e3));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    CHECK(env.alpha_family == AlphaFamily::Constant);
    CHECK(env.beta_family == BetaFamily::One);
    CHECK(env.c == doctest::Approx(1.05 * std::sqrt(5.0)).epsilon(1e-6));
    DominatingBound b = dominating_trajectory_bound(tr, env, 1.0);
    CHECK(b.worst_ratio <= 1.0);
    // one component with the majorant alpha = 2 is reproduced exactly
    ComparisonModel per(AlphaFamily::Constant, 2.0, 2.0);
    for (double t : {1e3 / 256, 1e3 / 8, 1e3}) {
      CHECK(std::abs(comparison_solution(per, 0.2, 1.0, t) - tr.r_at(t)[1]) < 1e-9);
    }
  }
  SUBCASE("violation is reported") {
    const auto sys = cubic_drift();
    PhaseTrajectory tr = simulate(sys, v1(1.0), v1(0.0), 1.0, 1e3, 1e-12, sample_times(1.0, 1e3));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    env.c *= 1e-3;
    CHECK(code_of([&] { dominating_trajectory_bound(tr, env, 1.0); }) == int(ErrorCode::EnvelopeViolated));
  }
  SUBCASE("vanishing perturbation keeps the norm") {
    ActionAngleSystem sys;
    sys.A = [](const VectorXd&) { return v1(1.0); };
    PhaseTrajectory tr = simulate(sys, v1(0.4), v1(0.0), 1.0, 100.0, 1e-10, sample_times(1.0, 100.0));
    DominatingBound b = dominating_trajectory_bound(tr, DecayEnvelope{}, 1.0);
    CHECK(b(50.0) == doctest::Approx(0.4));
  }
}

TEST_CASE("limit action") {
  SUBCASE("cubic drift") {
    const auto sys = cubic_drift();
    PhaseTrajectory tr = simulate(sys, v1(1.0), v1(0.0), 1.0, 1e3, 1e-12, sample_times(1.0, 1e3));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    LimitAction la = limit_action(tr, env);
    CHECK(std::abs(la.r_star[0] - 1.5) <= la.err);
    CHECK(std::abs(la.r_star[0] - 1.5) < 1e-8);
    CHECK(la.err == doctest::Approx(1.05 * 0.5e-6).epsilon(1e-3));
  }
  SUBCASE("two rates, exact limit") {
    const auto sys = two_rates();
    PhaseTrajectory tr = simulate(sys, v2(0.1, 0.2), v2(0, 0), 10.0, 1e4, 1e-12, sample_times(10.0, 1e4));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    LimitAction la = limit_action(tr, env);
    CHECK((la.r_star - v2(0.2, 0.4)).norm() < 1e-8);
    CHECK((la.r_star - v2(0.2, 0.4)).norm() <= la.err);
  }
  SUBCASE("doubling the horizon shrinks the bound") {
    const auto sys = cubic_drift();
    PhaseTrajectory a = simulate(sys, v1(1.0), v1(0.0), 1.0, 500.0, 1e-12, sample_times(1.0, 500.0));
    PhaseTrajectory b = simulate(sys, v1(1.0), v1(0.0), 1.0, 1000.0, 1e-12, sample_times(1.0, 1000.0));
    LimitAction la = limit_action(a, fit_envelope(a, estimate_decay_exponent(decay_samples(a))));
    LimitAction lb = limit_action(b, fit_envelope(b, estimate_decay_exponent(decay_samples(b))));
    CHECK(lb.err < la.err);
    CHECK(std::abs(la.r_star[0] - lb.r_star[0]) <= la.err + lb.err);
  }
  SUBCASE("too slow a decay is refused") {
    ActionAngleSystem sys;
    sys.A = [](const VectorXd& r) { return r; };
    sys.P = [](double t, const VectorXd&, const VectorXd&) { return v1(1.0 / (t * std::log(t))); };
    PhaseTrajectory tr = simulate(sys, v1(1.0), v1(0.0), 3.0, 1e5, 1e-10, sample_times(3.0, 1e5));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    CHECK(env.beta_family == BetaFamily::InverseLog);
    CHECK(code_of([&] { limit_action(tr, env); }) == int(ErrorCode::ExponentTooSmall));
  }
}

TEST_CASE("dyadic Cauchy test") {
  CHECK(dyadic_cauchy_test([](double t) { return v1(3.0 + 1.0 / t); }, 1.0, 1e4).verdict == CauchyVerdict::Converges);
  CHECK(dyadic_cauchy_test([](double) { return v1(2.0); }, 1.0, 1e4).verdict == CauchyVerdict::Converges);
  CHECK(dyadic_cauchy_test([](double t) { return v1(std::log(t)); }, 1.0, 1e4).verdict == CauchyVerdict::Divergent);
  CHECK(dyadic_cauchy_test([](double t) { return v1(std::log(std::log(t))); }, 2.0, 1e6).verdict ==
        CauchyVerdict::Divergent);
  CHECK(dyadic_cauchy_test([](double t) { return v1(std::sqrt(t)); }, 1.0, 1e4).verdict == CauchyVerdict::Divergent);
  CHECK(dyadic_cauchy_test([](double t) { return v1(1.0 / t); }, 1.0, 4.0).verdict == CauchyVerdict::Inconclusive);
}

TEST_CASE("limit phase") {
  SUBCASE("cubic drift") {
    const auto sys = cubic_drift();
    PhaseTrajectory tr = simulate(sys, v1(1.0), v1(0.25), 1.0, 1e3, 1e-12, sample_times(1.0, 1e3));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    LimitAction la = limit_action(tr, env);
    LimitPhase lp = limit_phase(tr, sys, la, env);
    REQUIRE_FALSE(lp.divergent);
    // theta = 0.25 + 1.5 (t - 1) + (1/t - 1) / 2
    const double exact = 0.25 - 2.0;
    CHECK(std::abs(lp.theta0[0] - exact) <= lp.err);
    CHECK(lp.err < 1e-3);
    CHECK(lp.lipschitz == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("isochronous with p = 3/2") {
    ActionAngleSystem sys;
    sys.A = [](const VectorXd&) { return v1(1.0); };
    sys.P = [](double t, const VectorXd&, const VectorXd&) { return v1(std::pow(t, -1.5)); };
    const double t0 = 4.0, th0 = 0.3;
    PhaseTrajectory tr = simulate(sys, v1(1.0), v1(th0), t0, 1e4, 1e-12, sample_times(t0, 1e4));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    LimitPhase lp = limit_phase(tr, sys, limit_action(tr, env), env);
    REQUIRE_FALSE(lp.divergent);
    CHECK(std::abs(lp.theta0[0] - (th0 - t0)) < 1e-8);
    CHECK(std::abs(lp.theta0[0] - (th0 - t0)) <= lp.err);
  }
  SUBCASE("non-isochronous with p = 3/2 is refused") {
    ActionAngleSystem sys;
    sys.A = [](const VectorXd& r) { return r; };
    sys.P = [](double t, const VectorXd&, const VectorXd&) { return v1(std::pow(t, -1.5)); };
    PhaseTrajectory tr = simulate(sys, v1(1.0), v1(0.0), 1.0, 1e4, 1e-12, sample_times(1.0, 1e4));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    LimitAction la = limit_action(tr, env);
    bool refused = false;
    try {
      refused = limit_phase(tr, sys, la, env).divergent;
    } catch (const Error& e) {
      refused = e.code() == ErrorCode::ExponentTooSmall;
    }
    CHECK(refused);
  }
  SUBCASE("logarithmic phase drift diverges") {
    ActionAngleSystem sys;
    sys.A = [](const VectorXd& r) { return VectorXd(r.array().square()); };
    sys.P = [](double t, const VectorXd& r, const VectorXd&) {
      return VectorXd(r * (1 + std::log(t)) / std::pow(t * std::log(t), 2));
    };
    const double r0 = 0.5;
    PhaseTrajectory tr = simulate(sys, v1(r0), v1(0.0), 2.0, 1e6, 1e-12, sample_times(2.0, 1e6));
    DecayEnvelope env = fit_envelope(tr, estimate_decay_exponent(decay_samples(tr)));
    LimitAction la = limit_action(tr, env);
    // r = r_lim exp(-1/(t ln t))
    const double r_lim = r0 * std::exp(1 / (2 * std::log(2.0)));
    CHECK(std::abs(la.r_star[0] - r_lim) <= la.err);
    LimitPhase lp = limit_phase(tr, sys, la, env);
    CHECK(lp.divergent);
    const double drift = (tr.theta_at(1e6) - la.r_star * la.r_star[0] * 1e6)[0] -
                         (tr.theta_at(1e3) - la.r_star * la.r_star[0] * 1e3)[0];
    CHECK(std::abs(drift + 2 * std::log(2.0) * r_lim * r_lim) < 0.05 * r_lim * r_lim);
  }
}

TEST_CASE("orbital convergence") {
  const auto sys = two_rates();
  const double t0 = 10.0;
  auto run = [&](const VectorXd& limit) {
    const VectorXd r0 = limit - v2(1.0, 2.0) / t0;
    PhaseTrajectory tr = simulate(sys, r0, v2(0, 0), t0, 1e5, 1e-12, sample_times(t0, 1e5));
    return orbital_convergence_test(tr, sys, limit).verdict;
  };
  CHECK(run(v2(1.0, 1.0)) == OrbitalResult::Verdict::Fails);
  CHECK(run(v2(1.0, 2.0)) == OrbitalResult::Verdict::Converges);

  ActionAngleSystem still;
  still.A = [](const VectorXd&) { return v2(0.0, 0.0); };
  still.m = still.n = 2;
  PhaseTrajectory tr = simulate(still, v2(1, 1), v2(0, 0), 1.0, 100.0, 1e-10, sample_times(1.0, 100.0));
  CHECK(code_of([&] { orbital_convergence_test(tr, still, v2(1, 1)); }) == int(ErrorCode::ZeroFrequency));
}

TEST_CASE("torus convergence check") {
  PhaseTrajectory conv, osc;
  const double r0 = 0.7;
  for (double t : sample_times(3.0, 1e8)) {
    conv.t.push_back(t);
    conv.r.push_back(v2(1.0, 1.0) - v2(1.0, 2.0) / t);
    osc.t.push_back(t);
    osc.r.push_back(v1(r0 * std::exp(std::sin(std::log(std::log(t))))));
  }
  CauchyOptions opts{1e-8, 1e-3};
  TorusResult a = torus_convergence_check(conv, opts);
  CHECK(a.converges);
  TorusResult b = torus_convergence_check(osc, opts);
  CHECK_FALSE(b.converges);
  // sin(ln ln t) sweeps roughly [-0.8, 1] between t = 3 and 1e8
  CHECK(b.spread[0] > 0.5 * r0);
}

TEST_CASE("analysis report") {
  const auto sys = cubic_drift();
  PhaseTrajectory tr = simulate(sys, v1(1.0), v1(0.0), 1.0, 1e3, 1e-12, sample_times(1.0, 1e3));
  AsymptoticsReport rep = analyze(tr, sys);
  REQUIRE(rep.p_hat);
  CHECK(std::abs(*rep.p_hat - 3.0) < 0.01);
  REQUIRE(rep.r_star);
  CHECK(std::abs((*rep.r_star)[0] - 1.5) < 1e-8);
  REQUIRE(rep.theta0);
  CHECK(std::abs((*rep.theta0)[0] + 2.0) <= rep.theta0_err);
  CHECK(rep.orbital_verdict == OrbitalResult::Verdict::Converges);
  CHECK(rep.torus_verdict == true);
  nlohmann::json j = to_json(rep);
  for (const char* key : {"p_hat", "p_confidence", "bounded_class", "r_star", "r_star_err", "theta0", "theta0_err",
                          "theta0_divergent", "orbital_verdict", "torus_verdict", "checkpoints"}) {
    CHECK(j.contains(key));
  }
  CHECK(j.size() == 11);
  CHECK(j["bounded_class"]["class"] == "AllBounded");
  CHECK(j["checkpoints"].size() == 10);

  ActionAngleSystem free;
  free.A = [](const VectorXd&) { return v1(0.5); };
  PhaseTrajectory ft = simulate(free, v1(0.3), v1(0.1), 1.0, 100.0, 1e-12, sample_times(1.0, 100.0));
  AsymptoticsReport fr = analyze(ft, free);
  CHECK_FALSE(fr.p_hat);
  REQUIRE(fr.r_star);
  CHECK((*fr.r_star)[0] == 0.3);
  REQUIRE(fr.theta0);
  CHECK(std::abs((*fr.theta0)[0] - 0.1 + 0.5) < 1e-9);
}
