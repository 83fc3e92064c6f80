#include "verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>

#include "torus/catalog.hpp"
#include "torus/error.hpp"
#include "torus/pipeline.hpp"

namespace torus::cli {

using Eigen::VectorXd;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

struct Checker {
  VerifyResult& out;
  void operator()(std::string name, bool ok, std::string detail) {
    out.checks.push_back({std::move(name), ok, std::move(detail)});
  }
};

double max_rel_spread(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x / double(v.size());
  double worst = 0.0;
  for (double x : v) worst = std::max(worst, std::abs(x - mean) / std::abs(mean));
  return worst;
}

std::vector<ode::State> run(const catalog::CatalogEntry& e, double t0, const std::vector<double>& times, double tol) {
  ode::IntegratorOptions opts;
  opts.tol = tol;
  return ode::sample_solution(e.field(), e.default_initial, t0, times, opts);
}

void closed_form(const catalog::CatalogEntry& e, double tol, Checker& check) {
  const double t0 = e.default_t0, t1 = t0 + std::min(e.default_t_end - t0, 100.0);
  std::vector<double> times;
  for (int k = 1; k <= 10; ++k) times.push_back(t0 + (t1 - t0) * k / 10.0);
  const auto states = run(e, t0, times, tol);
  double worst = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const ode::State exact = e.analytic_solution(times[i], t0, e.default_initial);
    worst = std::max(worst, (states[i] - exact).norm() / (1 + exact.norm()));
  }
  check("closed_form", worst <= 10 * tol, fmt::format("max relative deviation {:.3g} on [{}, {}]", worst, t0, t1));
}

std::shared_ptr<const ActionAngleChart> single_chart(const catalog::CatalogEntry& e) {
  return build_product_chart(*e.cartesian).charts().front();
}

AsymptoticsReport analyze_cartesian(const catalog::CatalogEntry& e, double tol) {
  const auto times = sample_times(e.default_t0, e.default_t_end);
  const ChartedSystem cs = chart_system(*e.cartesian, build_product_chart(*e.cartesian));
  return analyze(run_cartesian(*e.cartesian, cs, e.default_initial, e.default_t0, times, tol), cs.system);
}

/// Compares r* and theta0 with limits read off the closed form far out.
void limits(const catalog::CatalogEntry& e, double tol, bool phase_converges, Checker& check) {
  const ActionAngleSystem& sys = *e.action_angle;
  const auto m = Eigen::Index(sys.m), n = Eigen::Index(sys.n);
  const double t0 = e.default_t0;
  const PhaseTrajectory tr = simulate(sys, e.default_initial.head(m), e.default_initial.tail(n), t0, e.default_t_end,
                                      tol, sample_times(t0, e.default_t_end));
  const AsymptoticsReport rep = analyze(tr, sys);
  const VectorXd r_exact = e.analytic_solution(1e12, t0, e.default_initial).head(m);
  if (!rep.r_star) {
    check("limit_action", false, "no limit action reported");
    return;
  }
  const double dr = (*rep.r_star - r_exact).norm();
  check("limit_action", dr <= rep.r_star_err + 1e-9,
        fmt::format("|r* - closed form| {:.3g}, reported err {:.3g}", dr, rep.r_star_err));
  if (!phase_converges) {
    check("limit_phase", !rep.theta0, rep.theta0 ? "a limit phase was reported" : "no limit phase, as expected");
    return;
  }
  if (!rep.theta0) {
    check("limit_phase", false, rep.theta0_divergent ? "reported divergent" : "no limit phase reported");
    return;
  }
  const double far = 1e8;
  const VectorXd th_exact = e.analytic_solution(far, t0, e.default_initial).tail(n) - sys.A(r_exact) * far;
  const double dth = (*rep.theta0 - th_exact).norm();
  check("limit_phase", dth <= rep.theta0_err + 1e-6,
        fmt::format("|theta0 - closed form| {:.3g}, reported err {:.3g}", dth, rep.theta0_err));
}

void linear_centre(const catalog::CatalogEntry& e, double tol, Checker& check) {
  const auto x = run(e, 0.0, {kTwoPi}, tol).front();
  const double gap = (x - e.default_initial).norm();
  check("period_closure", gap <= 10 * tol * (1 + e.default_initial.norm()), fmt::format("|x(2 pi) - x0| {:.3g}", gap));
  const auto chart = single_chart(e);
  double worst = 0.0;
  for (double r : {0.1, 1.0, 10.0}) worst = std::max(worst, std::abs(chart->period(r) - kTwoPi));
  check("chart_period", worst <= 1e-8, fmt::format("max |T - 2 pi| {:.3g}", worst));
}

void duffing_centre(const catalog::CatalogEntry& e, double tol, Checker& check) {
  const double a = e.params["a"], b = e.params["b"];
  auto energy = [&](const ode::State& x) {
    double h = 0.0;
    for (Eigen::Index k = 0; k + 1 < x.size(); k += 2) {
      h += 0.5 * x[k + 1] * x[k + 1] + 0.5 * a * x[k] * x[k] + 0.25 * b * std::pow(x[k], 4);
    }
    return h;
  };
  std::vector<double> times;
  for (int k = 1; k <= 200; ++k) times.push_back(0.5 * k);
  const double h0 = energy(e.default_initial);
  double drift = 0.0;
  for (const auto& x : run(e, 0.0, times, tol)) drift = std::max(drift, std::abs(energy(x) - h0) / h0);
  check("energy", drift <= 1e-7, fmt::format("relative energy drift {:.3g} over [0, 100]", drift));

  // T(A) = 4 int_0^A dx / sqrt(2 (V(A) - V(x))), with V(A) - V(x) factored
  const auto chart = single_chart(e);
  boost::math::quadrature::tanh_sinh<double> quad;
  double worst = 0.0;
  for (double amp : {0.3, 0.8, 1.5}) {
    auto integrand = [&](double x) {
      return 1.0 / std::sqrt(2 * (amp * amp - x * x) * (0.5 * a + 0.25 * b * (amp * amp + x * x)));
    };
    const double exact = 4 * quad.integrate(integrand, 0.0, amp);
    const double T = chart->period(chart->action_of(Point(amp, 0.0)));
    worst = std::max(worst, std::abs(T - exact) / exact);
  }
  check("period_quadrature", worst <= 1e-7, fmt::format("max relative period error {:.3g}", worst));
}

void quartic_centre(const catalog::CatalogEntry& e, double tol, Checker& check) {
  std::vector<double> times;
  for (int k = 1; k <= 200; ++k) times.push_back(e.default_t0 + 0.5 * k);
  const double h0 = e.conserved(e.default_initial);
  double drift = 0.0;
  for (const auto& x : run(e, e.default_t0, times, tol)) drift = std::max(drift, std::abs(e.conserved(x) - h0) / h0);
  check("conserved", drift <= 1e-6, fmt::format("relative drift of x1^4 + x2^4 {:.3g}", drift));

  const auto chart = single_chart(e);
  std::vector<double> scaled;
  for (int k = 0; k <= 8; ++k) {
    const double amp = 0.5 + 1.5 * k / 8.0;
    scaled.push_back(chart->period(chart->action_of(Point(amp, 0.0))) * amp * amp);
  }
  const double spread = max_rel_spread(scaled);
  check("period_scaling", spread <= 1e-6, fmt::format("spread of T(a) a^2 {:.3g}", spread));
}

void ex4_2(const catalog::CatalogEntry& e, double tol, Checker& check) {
  const AsymptoticsReport rep = analyze_cartesian(e, tol);
  const bool slow = rep.p_hat && *rep.p_hat - rep.p_confidence <= 1.0;
  check("slow_decay", slow, fmt::format("p_hat {:.4g} +- {:.2g}", rep.p_hat.value_or(NAN), rep.p_confidence));
  check("action_refused", !rep.r_star, rep.r_star ? "a limit action was reported" : "no limit action");
}

void ex4_3(const catalog::CatalogEntry& e, double tol, Checker& check) {
  limits(e, tol, false, check);
  const ActionAngleSystem& sys = *e.action_angle;
  const double t0 = e.default_t0;
  const PhaseTrajectory tr = simulate(sys, e.default_initial.head(2), e.default_initial.tail(2), t0, e.default_t_end,
                                      tol, sample_times(t0, e.default_t_end));
  const VectorXd limit = e.analytic_solution(1e12, t0, e.default_initial).head(2);
  const auto verdict = orbital_convergence_test(tr, sys, limit).verdict;
  // the phase drift is -(1, 2) ln t, which a periodic orbit absorbs only when R is parallel to (1, 2)
  const bool parallel = std::abs(2 * limit[0] - limit[1]) < 1e-12;
  const bool expected = (verdict == OrbitalResult::Verdict::Converges) == parallel;
  check("orbital", expected, fmt::format("orbital verdict {} for limit ({:.6g}, {:.6g})", to_string(verdict), limit[0], limit[1]));
}

void ex4_5(const catalog::CatalogEntry& e, double tol, Checker& check) {
  const AsymptoticsReport rep = analyze_cartesian(e, tol);
  const bool fails = rep.torus_verdict && !*rep.torus_verdict;
  check("torus_diverges", fails, rep.torus_verdict ? fmt::format("torus verdict {}", *rep.torus_verdict) : "no verdict");
}

}  // namespace

bool VerifyResult::passed() const {
  return error.empty() && !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

VerifyResult verify(const std::string& id, double tol) {
  VerifyResult out{id, {}, 0.0, {}};
  const auto start = std::chrono::steady_clock::now();
  try {
    const catalog::CatalogEntry& e = catalog::get(id);
    Checker check{out};
    if (e.analytic_solution) closed_form(e, tol, check);
    if (id == "linear_centre") linear_centre(e, tol, check);
    if (id == "duffing_centre") duffing_centre(e, tol, check);
    if (id == "quartic_centre") quartic_centre(e, tol, check);
    if (id == "ex4_1" || id == "thm51_smoke" || id == "iso_note52") limits(e, tol, true, check);
    if (id == "ex4_2") ex4_2(e, tol, check);
    if (id == "ex4_3") ex4_3(e, tol, check);
    if (id == "ex4_5") ex4_5(e, tol, check);
  } catch (const std::exception& ex) {
    out.error = ex.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<VerifyResult> verify_all(std::vector<std::string> ids, double tol) {
  if (ids.empty()) ids = catalog::list();
  for (const auto& id : ids) catalog::get(id);  // unknown ids fail before any work starts

  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TORUS_ASYMPTOTE_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) workers = std::size_t(n);
  }
  workers = std::min(workers, ids.size());

  std::vector<VerifyResult> results(ids.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) results[i] = verify(ids[i], tol);
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  return results;
}

}  // namespace torus::cli
