#include "torus/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

#include "torus/error.hpp"

namespace torus {

using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd interpolate(const std::vector<double>& t, const std::vector<VectorXd>& v, double time) {
  if (t.empty()) throw Error(ErrorCode::OutOfRange, "empty trajectory");
  if (time <= t.front()) return v.front();
  if (time >= t.back()) return v.back();
  auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
  if (t[i] == time) return v[i];
  const double w = (time - t[i]) / (t[i + 1] - t[i]);
  return (1.0 - w) * v[i] + w * v[i + 1];
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {my - slope * mx, slope};
}

// Indices of samples in the last dyadic window [t_end / 2, t_end].
std::vector<std::size_t> last_window(const std::vector<double>& t) {
  std::vector<std::size_t> idx;
  const double from = 0.5 * t.back();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= from) idx.push_back(i);
  }
  return idx;
}

bool one_signed(const std::vector<double>& values) {
  const bool pos = std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; });
  const bool neg = std::all_of(values.begin(), values.end(), [](double v) { return v < 0.0; });
  return pos || neg;
}

double pq_norm(const PhaseTrajectory& traj, std::size_t i) {
  double s = 0.0;
  if (i < traj.P.size()) s += traj.P[i].squaredNorm();
  if (i < traj.Q.size()) s += traj.Q[i].squaredNorm();
  return std::sqrt(s);
}

double alpha_shape(AlphaFamily family, double s) {
  switch (family) {
    case AlphaFamily::Constant: return 1.0;
    case AlphaFamily::Linear: return s;
    case AlphaFamily::Quadratic: return s * s;
    case AlphaFamily::Custom: break;
  }
  return 1.0;
}

double beta_shape(BetaFamily family, double t) { return family == BetaFamily::One ? 1.0 : 1.0 / std::log(t); }

}  // namespace

// ---------------------------------------------------------------------------

ode::VectorField ActionAngleSystem::as_vector_field() const {
  const std::size_t mm = m, nn = n;
  auto a = A;
  auto p = P;
  auto q = Q;
  return {m + n,
          [mm, nn, a, p, q](double t, const ode::State& x) {
            const VectorXd r = x.head(Eigen::Index(mm));
            const VectorXd th = x.tail(Eigen::Index(nn));
            ode::State dx(x.size());
            dx.head(Eigen::Index(mm)) = p ? p(t, r, th) : VectorXd::Zero(Eigen::Index(mm));
            dx.tail(Eigen::Index(nn)) = a(r) + (q ? q(t, r, th) : VectorXd::Zero(Eigen::Index(nn)));
            return dx;
          },
          false};
}

VectorXd PhaseTrajectory::r_at(double time) const { return interpolate(t, r, time); }
VectorXd PhaseTrajectory::theta_at(double time) const { return interpolate(t, theta, time); }

std::vector<double> sample_times(double t0, double t_end, int per_decade) {
  if (!(t_end > t0) || !(t0 > 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("need 0 < t0 < t_end, got t0 = {}, t_end = {}", t0, t_end));
  }
  std::vector<double> dyadic;
  for (double c = t_end; c >= t0; c *= 0.5) dyadic.push_back(c);
  const int count = std::max(2, int(std::ceil(per_decade * std::log10(t_end / t0))));
  std::vector<double> out(dyadic.begin(), dyadic.end());
  for (int i = 0; i <= count; ++i) {
    const double t = i == 0 ? t0 : (i == count ? t_end : t0 * std::pow(t_end / t0, double(i) / count));
    const bool near_dyadic = std::any_of(dyadic.begin(), dyadic.end(),
                                         [t](double d) { return std::abs(t - d) <= 1e-9 * d; });
    if (!near_dyadic) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PhaseTrajectory simulate(const ActionAngleSystem& sys, const VectorXd& r0, const VectorXd& theta0, double t0,
                         double t_end, double tol, const std::vector<double>& times) {
  ode::State x0(Eigen::Index(sys.m + sys.n));
  x0 << r0, theta0;
  ode::Trajectory traj = ode::integrate(sys.as_vector_field(), x0, t0, t_end, tol);
  PhaseTrajectory out;
  for (double t : times) {
    if (t < t0 || t > t_end) continue;
    const ode::State x = traj.dense_eval(t);
    VectorXd r = x.head(Eigen::Index(sys.m)), th = x.tail(Eigen::Index(sys.n));
    out.t.push_back(t);
    out.P.push_back(sys.P ? sys.P(t, r, th) : VectorXd::Zero(Eigen::Index(sys.m)));
    out.Q.push_back(sys.Q ? sys.Q(t, r, th) : VectorXd::Zero(Eigen::Index(sys.n)));
    out.r.push_back(std::move(r));
    out.theta.push_back(std::move(th));
  }
  return out;
}

PhaseTrajectory sample_cartesian(const ProductChart& pc, const TransformedPerturbation* perturbation,
                                 const std::vector<double>& times, const std::vector<ode::State>& states) {
  if (times.size() != states.size()) throw Error(ErrorCode::OutOfRange, "times and states differ in length");
  PhaseTrajectory out;
  VectorXd prev_wrapped, prev_A;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const ActionAngleState s = to_action_angle(pc, states[i]);
    const VectorXd A = pc.frequencies(s.r);
    if (out.t.empty()) {
      out.theta.push_back(s.theta);
    } else {
      const VectorXd predicted = 0.5 * (A + prev_A) * (t - out.t.back());
      VectorXd step = s.theta - prev_wrapped;
      for (Eigen::Index k = 0; k < step.size(); ++k) step[k] += std::round(predicted[k] - step[k]);
      out.theta.push_back(out.theta.back() + step);
    }
    prev_wrapped = s.theta;
    prev_A = A;
    out.t.push_back(t);
    out.r.push_back(s.r);
    if (perturbation) {
      auto [P, Q] = (*perturbation)(t, s.r, s.theta);
      out.P.push_back(std::move(P));
      out.Q.push_back(std::move(Q));
    } else {
      out.P.push_back(VectorXd::Zero(s.r.size()));
      out.Q.push_back(VectorXd::Zero(s.theta.size()));
    }
  }
  return out;
}

PhaseTrajectory sample_cartesian(const ProductChart& pc, const TransformedPerturbation* perturbation,
                                 const ode::Trajectory& solution, const std::vector<double>& times) {
  std::vector<double> inside;
  std::vector<ode::State> states;
  for (double t : times) {
    if (t < solution.t_min() || t > solution.t_max()) continue;
    inside.push_back(t);
    states.push_back(solution.dense_eval(t));
  }
  return sample_cartesian(pc, perturbation, inside, states);
}

// ---------------------------------------------------------------------------

std::vector<DecaySample> decay_samples(const PhaseTrajectory& traj) {
  std::vector<DecaySample> out;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out.push_back({traj.t[i], i < traj.P.size() ? traj.P[i].norm() : 0.0, i < traj.Q.size() ? traj.Q[i].norm() : 0.0});
  }
  return out;
}

DecayFit estimate_decay_exponent(const std::vector<DecaySample>& samples) {
  std::vector<double> u, y;
  for (const auto& s : samples) {
    const double m = std::hypot(s.p_norm, s.q_norm);
    if (s.t > 0.0 && m > 0.0 && std::isfinite(m)) {
      u.push_back(std::log(s.t));
      y.push_back(std::log(m));
    }
  }
  if (u.size() < 20) {
    throw Error(ErrorCode::InsufficientSpan, fmt::format("{} usable samples, need at least 20", u.size()));
  }
  const double u_lo = *std::min_element(u.begin(), u.end());
  const double u_hi = *std::max_element(u.begin(), u.end());
  if ((u_hi - u_lo) / std::log(10.0) < 2.0) {
    throw Error(ErrorCode::InsufficientSpan,
                fmt::format("samples span {:.3g} decades, need at least 2", (u_hi - u_lo) / std::log(10.0)));
  }
  // tail: upper half in log t
  const double u_mid = 0.5 * (u_lo + u_hi);
  std::vector<double> tu, ty;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] >= u_mid) {
      tu.push_back(u[i]);
      ty.push_back(y[i]);
    }
  }
  if (tu.size() < 10) {
    tu.assign(u.end() - 10, u.end());
    ty.assign(y.end() - 10, y.end());
  }
  DecayFit fit;
  fit.tail_samples = tu.size();
  fit.power_law_slope = -least_squares_line(tu, ty).slope;

  const bool log_ok = *std::min_element(tu.begin(), tu.end()) > 0.5;
  const auto rows = Eigen::Index(tu.size());
  const Eigen::Index cols = log_ok ? 3 : 2;
  Eigen::MatrixXd X(rows, cols);
  VectorXd Y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = tu[std::size_t(i)];
    if (log_ok) X(i, 2) = std::log(tu[std::size_t(i)]);
    Y[i] = ty[std::size_t(i)];
  }
  const VectorXd beta = X.colPivHouseholderQr().solve(Y);
  const double rss = (X * beta - Y).squaredNorm();
  const double dof = double(rows - cols);
  const Eigen::MatrixXd cov = (X.transpose() * X).inverse() * (rss / dof);
  fit.p_hat = -beta[1];
  fit.log_exponent = log_ok ? -beta[2] : 0.0;
  const double se = std::sqrt(std::max(0.0, cov(1, 1)));
  fit.confidence = std::max(2.0 * se, 0.005);
  if (!std::isfinite(fit.p_hat) || fit.p_hat <= std::max(fit.confidence, 1e-6)) {
    throw Error(ErrorCode::NonDecaying,
                fmt::format("fitted decay exponent {:.4g} +- {:.2g} is not positive", fit.p_hat, fit.confidence));
  }
  fit.above_one = fit.p_hat - fit.confidence > 1.0;
  fit.above_two = fit.p_hat - fit.confidence > 2.0;
  return fit;
}

// ---------------------------------------------------------------------------

std::string_view to_string(AlphaFamily a) {
  switch (a) {
    case AlphaFamily::Constant: return "constant";
    case AlphaFamily::Linear: return "linear";
    case AlphaFamily::Quadratic: return "quadratic";
    case AlphaFamily::Custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(BetaFamily b) { return b == BetaFamily::One ? "one" : "inverse_log"; }

double DecayEnvelope::alpha(double s) const {
  if (alpha_family == AlphaFamily::Custom) return custom_alpha(s);
  return c * alpha_shape(alpha_family, s);
}

double DecayEnvelope::beta(double t) const { return beta_shape(beta_family, t); }

DecayEnvelope fit_envelope(const PhaseTrajectory& traj, const DecayFit& fit) {
  DecayEnvelope env;
  env.p = fit.p_hat;
  env.p_confidence = fit.confidence;
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (pq_norm(traj, i) > 0.0) used.push_back(i);
  }
  if (used.empty()) return env;
  const bool log_ok = traj.t[used.front()] > 1.0 + 1e-9;

  double best_score = kInf;
  for (AlphaFamily a : {AlphaFamily::Constant, AlphaFamily::Linear, AlphaFamily::Quadratic}) {
    for (BetaFamily b : {BetaFamily::One, BetaFamily::InverseLog}) {
      if (b == BetaFamily::InverseLog && !log_ok) continue;
      std::vector<double> logs;
      double max_ratio = 0.0;
      bool usable = true;
      for (std::size_t i : used) {
        const double shape = alpha_shape(a, traj.r[i].norm()) * beta_shape(b, traj.t[i]);
        if (!(shape > 0.0)) {
          usable = false;
          break;
        }
        const double ratio = std::pow(traj.t[i], env.p) * pq_norm(traj, i) / shape;
        logs.push_back(std::log(ratio));
        max_ratio = std::max(max_ratio, ratio);
      }
      if (!usable) continue;
      const double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / double(logs.size());
      double score = 0.0;
      for (double l : logs) score += (l - mean) * (l - mean);
      if (score < best_score * (1.0 - 1e-9) - 1e-12) {
        best_score = score;
        env.alpha_family = a;
        env.beta_family = b;
        env.c = 1.05 * max_ratio;
      }
    }
  }
  env.M = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    env.M = std::max(env.M, env.alpha(traj.r[i].norm()) * env.beta(traj.t[i]));
  }
  return env;
}

// ---------------------------------------------------------------------------

ComparisonModel::ComparisonModel(AlphaFamily family, double c, double p) : family_(family), c_(c), p_(p) {
  if (family == AlphaFamily::Custom) throw Error(ErrorCode::ConfigInvalid, "custom alpha needs a function");
  if (!(c > 0.0)) throw Error(ErrorCode::ConfigInvalid, fmt::format("alpha scale must be positive, got {}", c));
  alpha_ = [family, c](double s) { return c * alpha_shape(family, s); };
  resolve_g_star();
}

ComparisonModel::ComparisonModel(std::function<double(double)> alpha, double p)
    : family_(AlphaFamily::Custom), alpha_(std::move(alpha)), p_(p) {
  resolve_g_star();
}

ComparisonModel ComparisonModel::from_envelope(const DecayEnvelope& env, double t0) {
  // beta is decreasing, so beta(t) <= beta(t0) from t0 on
  const double b0 = env.beta(t0);
  if (env.alpha_family == AlphaFamily::Custom) {
    auto a = env.custom_alpha;
    return ComparisonModel([a, b0](double s) { return a(s) * b0; }, env.p);
  }
  return ComparisonModel(env.alpha_family, env.c * b0, env.p);
}

double ComparisonModel::alpha(double s) const { return alpha_(s); }

double ComparisonModel::G(double rho) const {
  switch (family_) {
    case AlphaFamily::Constant: return (rho - 1.0) / c_;
    case AlphaFamily::Linear: return std::log(rho) / c_;
    case AlphaFamily::Quadratic: return (1.0 - 1.0 / rho) / c_;
    case AlphaFamily::Custom: break;
  }
  if (rho == 1.0) return 0.0;
  auto inv = [this](double s) { return 1.0 / alpha_(s); };
  using boost::math::quadrature::gauss_kronrod;
  const double lo = std::min(1.0, rho), hi = std::max(1.0, rho);
  const double v = gauss_kronrod<double, 31>::integrate(inv, lo, hi, 20, 1e-13);
  return rho >= 1.0 ? v : -v;
}

void ComparisonModel::resolve_g_star() {
  switch (family_) {
    case AlphaFamily::Constant:
    case AlphaFamily::Linear: g_star_.reset(); return;
    case AlphaFamily::Quadratic: g_star_ = 1.0 / c_; return;
    case AlphaFamily::Custom: break;
  }
  // Decade increments of G; a geometric decay of the increments is taken as
  // evidence of a finite limit.
  auto inv = [this](double s) { return 1.0 / alpha_(s); };
  using boost::math::quadrature::gauss_kronrod;
  std::vector<double> inc;
  for (int k = 1; k <= 12; ++k) {
    inc.push_back(gauss_kronrod<double, 31>::integrate(inv, std::pow(10.0, k - 1), std::pow(10.0, k), 20, 1e-13));
  }
  const std::size_t n = inc.size();
  bool geometric = true;
  for (std::size_t k = n - 3; k < n; ++k) {
    if (!(inc[k - 1] > 0.0) || inc[k] / inc[k - 1] > 0.8) geometric = false;
  }
  if (!geometric) {
    g_star_.reset();
    return;
  }
  const double q = inc[n - 1] / inc[n - 2];
  g_star_ = std::accumulate(inc.begin(), inc.end(), 0.0) + inc.back() * q / (1.0 - q);
}

double ComparisonModel::G_inverse(double g) const {
  if (g_star_ && g >= *g_star_) {
    throw Error(ErrorCode::BlowUpBefore, fmt::format("G = {} is beyond G* = {}", g, *g_star_));
  }
  switch (family_) {
    case AlphaFamily::Constant: return 1.0 + c_ * g;
    case AlphaFamily::Linear: return std::exp(c_ * g);
    case AlphaFamily::Quadratic: return 1.0 / (1.0 - c_ * g);
    case AlphaFamily::Custom: break;
  }
  double lo = 1.0, hi = 1.0;
  if (g >= 0.0) {
    hi = 2.0;
    while (G(hi) < g) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw Error(ErrorCode::BlowUpBefore, fmt::format("G never reaches {}", g));
    }
  } else {
    lo = 0.5;
    while (G(lo) > g) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) throw Error(ErrorCode::OutOfRange, fmt::format("G never falls to {}", g));
    }
  }
  auto f = [&](double rho) { return G(rho) - g; };
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(std::abs(a), std::abs(b)); };
  auto br = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (br.first + br.second);
}

std::string_view to_string(BoundedKind k) {
  switch (k) {
    case BoundedKind::AllBounded: return "AllBounded";
    case BoundedKind::ConditionallyBounded: return "ConditionallyBounded";
    case BoundedKind::UnboundedEvidence: return "UnboundedEvidence";
  }
  return "UnboundedEvidence";
}

BoundedClass classify_boundedness(const ComparisonModel& cm, double rho0, double t0) {
  const double p = cm.p();
  if (!(p > 1.0)) {
    throw Error(ErrorCode::ExponentTooSmall, fmt::format("boundedness needs p > 1, got {}", p));
  }
  BoundedClass out;
  if (!cm.G_star()) {
    out.kind = BoundedKind::AllBounded;
    return out;
  }
  out.g_star = *cm.G_star();
  const double slack = *cm.G_star() - cm.G(rho0);
  const double tail_mass = std::pow(t0, 1.0 - p) / (p - 1.0);
  out.t0_min = std::pow((p - 1.0) * slack, -1.0 / (p - 1.0));
  const bool boundary = std::abs(slack - tail_mass) <= 1e-12 * std::max(slack, tail_mass);
  out.kind = (slack > tail_mass && !boundary) ? BoundedKind::ConditionallyBounded : BoundedKind::UnboundedEvidence;
  return out;
}

double comparison_solution(const ComparisonModel& cm, double rho0, double t0, double t) {
  if (t == t0) return rho0;
  const double p = cm.p();
  auto mass = [&](double tt) {
    return p == 1.0 ? std::log(tt / t0) : (std::pow(t0, 1.0 - p) - std::pow(tt, 1.0 - p)) / (p - 1.0);
  };
  const double g0 = cm.G(rho0);
  const double g = g0 + mass(t);
  if (cm.G_star() && g >= *cm.G_star()) {
    const double room = *cm.G_star() - g0;
    double t_blow = kInf;
    if (p == 1.0) {
      t_blow = t0 * std::exp(room);
    } else {
      const double base = std::pow(t0, 1.0 - p) - (p - 1.0) * room;
      if (base > 0.0) t_blow = std::pow(base, 1.0 / (1.0 - p));
    }
    throw BlowUpError(t_blow, fmt::format("comparison solution from rho({}) = {} blows up at t = {}", t0, rho0, t_blow));
  }
  return cm.G_inverse(g);
}

double DominatingBound::operator()(double t) const {
  if (frozen) return rho0;
  try {
    return comparison_solution(model, rho0, t0, t);
  } catch (const BlowUpError&) {
    return kInf;
  }
}

DominatingBound dominating_trajectory_bound(const PhaseTrajectory& traj, const DecayEnvelope& env, double t0) {
  const double rho0 = traj.r_at(t0).norm();
  const bool frozen = env.alpha_family != AlphaFamily::Custom && !(env.c > 0.0);
  DominatingBound bound{frozen ? ComparisonModel(AlphaFamily::Constant, 1.0, 2.0)
                               : ComparisonModel::from_envelope(env, t0),
                        t0, rho0};
  bound.frozen = frozen;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.t[i] < t0) continue;
    const double rho = bound(traj.t[i]);
    const double norm = traj.r[i].norm();
    if (rho == kInf) continue;
    bound.worst_ratio = std::max(bound.worst_ratio, rho > 0.0 ? norm / rho : (norm > 0.0 ? kInf : 0.0));
    if (norm > rho * (1.0 + 1e-9) + 1e-14) {
      throw Error(ErrorCode::EnvelopeViolated,
                  fmt::format("|r({})| = {} exceeds the comparison bound {}", traj.t[i], norm, rho));
    }
  }
  return bound;
}

// ---------------------------------------------------------------------------

LimitAction limit_action(const PhaseTrajectory& traj, const DecayEnvelope& env) {
  if (traj.size() == 0) throw Error(ErrorCode::OutOfRange, "empty trajectory");
  LimitAction out;
  out.r_star = traj.r.back();
  if (env.M == 0.0) return out;
  if (!(env.p - env.p_confidence > 1.0)) {
    throw Error(ErrorCode::ExponentTooSmall,
                fmt::format("limit action needs p > 1, fitted {:.4g} +- {:.2g}", env.p, env.p_confidence));
  }
  const double t_end = traj.t.back();
  const double p = env.p;
  // power-law tail of the remaining drift, only where P keeps one sign
  const auto window = last_window(traj.t);
  for (Eigen::Index j = 0; j < out.r_star.size(); ++j) {
    std::vector<double> pj;
    for (std::size_t i : window) pj.push_back(traj.P[i][j]);
    if (one_signed(pj)) out.r_star[j] += traj.P.back()[j] * t_end / (p - 1.0);
  }
  out.err = env.M * std::pow(t_end, 1.0 - p) / (p - 1.0);
  return out;
}

std::string_view to_string(CauchyVerdict v) {
  switch (v) {
    case CauchyVerdict::Converges: return "converges";
    case CauchyVerdict::Divergent: return "divergent";
    case CauchyVerdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

CauchyResult dyadic_cauchy_test(const std::function<VectorXd(double)>& value, double t_first, double t_end,
                                const CauchyOptions& options) {
  CauchyResult out;
  for (double c = t_end; c >= t_first * (1.0 - 1e-12); c *= 0.5) out.checkpoints.push_back(c);
  std::reverse(out.checkpoints.begin(), out.checkpoints.end());
  for (double c : out.checkpoints) out.values.push_back(value(c));
  if (out.checkpoints.size() < std::max<std::size_t>(options.min_checkpoints, 2)) return out;
  for (std::size_t k = 1; k < out.values.size(); ++k) out.increments.push_back((out.values[k] - out.values[k - 1]).norm());

  const auto& d = out.increments;
  const std::size_t n = d.size();
  const double scale = std::max(1.0, out.values.back().norm());
  const double thresh = std::max(options.abs_tol, options.rel_tol * scale);

  // slope of log increment against log log of the interval midpoint
  const std::size_t first = n > 6 ? n - 6 : 0;
  std::vector<double> x, y;
  for (std::size_t k = first; k < n; ++k) {
    const double mid = std::sqrt(out.checkpoints[k] * out.checkpoints[k + 1]);
    if (d[k] > 0.0 && mid > 1.0 && std::log(mid) > 0.0) {
      x.push_back(std::log(std::log(mid)));
      y.push_back(std::log(d[k]));
    }
  }
  out.harmonic_slope = x.size() >= 3 ? least_squares_line(x, y).slope : -kInf;

  if (d[n - 1] <= thresh && (n < 2 || d[n - 2] <= thresh)) {
    out.verdict = CauchyVerdict::Converges;
    return out;
  }
  if (n >= 4) {
    bool geometric = true;
    for (std::size_t k = n - 3; k < n; ++k) {
      if (!(d[k - 1] > 0.0) || d[k] / d[k - 1] > options.ratio) geometric = false;
    }
    if (geometric) {
      out.verdict = CauchyVerdict::Converges;
      return out;
    }
  }
  if (n >= 3 && d[n - 1] > thresh) {
    bool non_decreasing = true;
    for (std::size_t k = n - 2; k < n; ++k) {
      if (d[k] < d[k - 1] * (1.0 - 1e-6)) non_decreasing = false;
    }
    if (non_decreasing || (x.size() >= 4 && out.harmonic_slope >= options.harmonic_slope)) {
      out.verdict = CauchyVerdict::Divergent;
      return out;
    }
  }
  return out;
}

double estimate_lipschitz(const std::function<VectorXd(const VectorXd&)>& A, const VectorXd& r_star, double radius) {
  const Eigen::Index m = r_star.size();
  std::vector<double> norms;
  auto jac_norm = [&](const VectorXd& at) {
    const VectorXd a0 = A(at);
    Eigen::MatrixXd D(a0.size(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(at[j]));
      VectorXd up = at, dn = at;
      up[j] += h;
      dn[j] -= h;
      D.col(j) = (A(up) - A(dn)) / (2.0 * h);
    }
    return Eigen::JacobiSVD<Eigen::MatrixXd>(D).singularValues()(0);
  };
  norms.push_back(jac_norm(r_star));
  for (Eigen::Index j = 0; j < m; ++j) {
    for (double o : {-1.0, -0.5, 0.5, 1.0}) {
      VectorXd at = r_star;
      at[j] += o * radius;
      norms.push_back(jac_norm(at));
    }
  }
  const double hi = *std::max_element(norms.begin(), norms.end());
  const double lo = *std::min_element(norms.begin(), norms.end());
  return hi + 2.0 * (hi - lo);
}

LimitPhase limit_phase(const PhaseTrajectory& traj, const ActionAngleSystem& sys, const LimitAction& action,
                       const DecayEnvelope& env, const CauchyOptions& options) {
  const VectorXd A_star = sys.A(action.r_star);
  auto residual = [&](double t) -> VectorXd { return traj.theta_at(t) - A_star * t; };
  LimitPhase out;
  out.cauchy = dyadic_cauchy_test(residual, traj.t.front(), traj.t.back(), options);
  if (out.cauchy.verdict == CauchyVerdict::Divergent) {
    out.divergent = true;
    return out;
  }
  bool iso = sys.isochronous;
  if (!iso) {
    iso = true;
    for (const auto& r : traj.r) {
      if ((sys.A(r) - A_star).norm() > 0.0) {
        iso = false;
        break;
      }
    }
  }
  const double p = env.p;
  const double pq = env.q_exponent.value_or(p);
  const double conf = env.p_confidence;
  const double need = iso ? 1.0 : 2.0;
  if (env.M > 0.0 && (!(p - conf > need) || !(pq - conf > 1.0))) {
    throw Error(ErrorCode::ExponentTooSmall,
                fmt::format("limit phase needs p > {} ({}), fitted {:.4g} +- {:.2g}", need,
                            iso ? "isochronous" : "non-isochronous", p, conf));
  }
  const double t_end = traj.t.back();
  out.theta0 = residual(t_end);
  if (env.M == 0.0) return out;

  const double Mq = env.q_M.value_or(env.M);
  const auto window = last_window(traj.t);
  for (Eigen::Index j = 0; j < out.theta0.size(); ++j) {
    std::vector<double> qj, aj;
    for (std::size_t i : window) {
      qj.push_back(traj.Q[i][j]);
      if (!iso) aj.push_back(sys.A(traj.r[i])[j] - A_star[j]);
    }
    if (one_signed(qj)) out.theta0[j] += traj.Q.back()[j] * t_end / (pq - 1.0);
    if (!iso && one_signed(aj)) out.theta0[j] += aj.back() * t_end / (p - 2.0);
  }
  out.err = Mq * std::pow(t_end, 1.0 - pq) / (pq - 1.0);
  if (!iso) {
    const double radius = std::max(2.0 * action.err, 1e-8 * (1.0 + action.r_star.norm()));
    out.lipschitz = estimate_lipschitz(sys.A, action.r_star, radius);
    out.err += out.lipschitz * env.M * std::pow(t_end, 2.0 - p) / ((p - 1.0) * (p - 2.0));
  }
  return out;
}

std::string_view to_string(OrbitalResult::Verdict v) {
  switch (v) {
    case OrbitalResult::Verdict::Converges: return "converges";
    case OrbitalResult::Verdict::Fails: return "fails";
    case OrbitalResult::Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

OrbitalResult orbital_convergence_test(const PhaseTrajectory& traj, const ActionAngleSystem& sys,
                                       const VectorXd& r_star, const CauchyOptions& options) {
  const VectorXd a = sys.A(r_star);
  if (!(a.norm() > 0.0)) throw Error(ErrorCode::ZeroFrequency, "A(r*) vanishes");
  OrbitalResult out;
  if (a.size() == 1) {
    out.verdict = OrbitalResult::Verdict::Converges;
    return out;
  }
  const VectorXd unit = a / a.norm();
  auto projected = [&](double t) -> VectorXd {
    const VectorXd d = traj.theta_at(t) - a * t;
    return d - unit * unit.dot(d);
  };
  out.cauchy = dyadic_cauchy_test(projected, traj.t.front(), traj.t.back(), options);
  switch (out.cauchy.verdict) {
    case CauchyVerdict::Converges: out.verdict = OrbitalResult::Verdict::Converges; break;
    case CauchyVerdict::Divergent: out.verdict = OrbitalResult::Verdict::Fails; break;
    case CauchyVerdict::Inconclusive: out.verdict = OrbitalResult::Verdict::Inconclusive; break;
  }
  return out;
}

TorusResult torus_convergence_check(const PhaseTrajectory& traj, const CauchyOptions& options) {
  TorusResult out;
  out.cauchy = dyadic_cauchy_test([&](double t) { return traj.r_at(t); }, traj.t.front(), traj.t.back(), options);
  out.converges = out.cauchy.verdict == CauchyVerdict::Converges;
  out.r_star = traj.r.back();
  VectorXd hi = traj.r.front(), lo = traj.r.front();
  for (const auto& r : traj.r) {
    hi = hi.cwiseMax(r);
    lo = lo.cwiseMin(r);
  }
  out.spread = hi - lo;
  return out;
}

TorusResult torus_convergence_check(const ode::Trajectory& solution, const ProductChart& pc,
                                    const std::vector<double>& times, const CauchyOptions& options) {
  PhaseTrajectory traj = sample_cartesian(pc, nullptr, solution, times);
  return torus_convergence_check(traj, options);
}

// ---------------------------------------------------------------------------

AsymptoticsReport analyze(const PhaseTrajectory& traj, const ActionAngleSystem& sys, const AnalysisOptions& options) {
  if (traj.size() < 2) throw Error(ErrorCode::InsufficientSpan, "need at least two samples");
  AsymptoticsReport rep;
  const double t0 = traj.t.front(), t_end = traj.t.back();

  bool vanishing = true;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (pq_norm(traj, i) > 0.0) vanishing = false;
  }

  std::optional<DecayEnvelope> env;
  if (vanishing) {
    rep.notes.push_back("perturbation vanishes on every sample");
    env = DecayEnvelope{};
    rep.bounded_class = BoundedClass{};
  } else {
    try {
      const DecayFit fit = estimate_decay_exponent(decay_samples(traj));
      rep.p_hat = fit.p_hat;
      rep.p_confidence = fit.confidence;
      rep.power_law_slope = fit.power_law_slope;
      env = fit_envelope(traj, fit);
    } catch (const Error& e) {
      rep.notes.push_back(e.what());
    }
  }
  rep.envelope = env;

  if (env && !vanishing) {
    try {
      rep.bounded_class = classify_boundedness(ComparisonModel::from_envelope(*env, t0), traj.r.front().norm(), t0);
    } catch (const Error& e) {
      rep.notes.push_back(e.what());
    }
    try {
      const DominatingBound b = dominating_trajectory_bound(traj, *env, t0);
      rep.notes.push_back(fmt::format("comparison bound holds, worst |r|/rho = {:.6g}", b.worst_ratio));
    } catch (const Error& e) {
      rep.notes.push_back(e.what());
    }
  }

  std::optional<LimitAction> action;
  if (env) {
    try {
      action = limit_action(traj, *env);
      rep.r_star = action->r_star;
      rep.r_star_err = action->err;
    } catch (const Error& e) {
      rep.notes.push_back(e.what());
    }
  }
  if (action) {
    try {
      const LimitPhase phase = limit_phase(traj, sys, *action, *env, options.phase_cauchy);
      rep.theta0_divergent = phase.divergent;
      if (!phase.divergent) {
        rep.theta0 = phase.theta0;
        rep.theta0_err = phase.err;
      }
      if (env->q_exponent) rep.notes.push_back("phase error uses the split-exponent heuristic");
    } catch (const Error& e) {
      rep.notes.push_back(e.what());
    }
    try {
      rep.orbital_verdict = orbital_convergence_test(traj, sys, action->r_star, options.phase_cauchy).verdict;
    } catch (const Error& e) {
      rep.notes.push_back(e.what());
    }
  }
  rep.torus_verdict = torus_convergence_check(traj, options.torus_cauchy).converges;

  const VectorXd A_star = rep.r_star ? sys.A(*rep.r_star) : VectorXd();
  std::vector<double> marks;
  for (double c = t_end; c >= t0 * (1.0 - 1e-12); c *= 0.5) marks.push_back(c);
  std::reverse(marks.begin(), marks.end());
  for (double c : marks) {
    Checkpoint cp{c, traj.r_at(c), std::nullopt};
    if (rep.r_star) cp.phase_residual = VectorXd(traj.theta_at(c) - A_star * c);
    rep.checkpoints.push_back(std::move(cp));
  }
  return rep;
}

namespace {

nlohmann::json vec_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json opt_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const AsymptoticsReport& rep) {
  nlohmann::json j;
  j["p_hat"] = opt_number(rep.p_hat);
  j["p_confidence"] = rep.p_hat ? nlohmann::json(rep.p_confidence) : nlohmann::json(nullptr);
  if (rep.bounded_class) {
    j["bounded_class"] = {{"class", std::string(to_string(rep.bounded_class->kind))},
                          {"t0_min", opt_number(rep.bounded_class->t0_min)},
                          {"g_star", opt_number(rep.bounded_class->g_star)}};
  } else {
    j["bounded_class"] = nullptr;
  }
  j["r_star"] = rep.r_star ? vec_json(*rep.r_star) : nlohmann::json(nullptr);
  j["r_star_err"] = rep.r_star ? nlohmann::json(rep.r_star_err) : nlohmann::json(nullptr);
  j["theta0"] = rep.theta0 ? vec_json(*rep.theta0) : nlohmann::json(nullptr);
  j["theta0_err"] = rep.theta0 ? nlohmann::json(rep.theta0_err) : nlohmann::json(nullptr);
  j["theta0_divergent"] = rep.theta0_divergent;
  j["orbital_verdict"] = rep.orbital_verdict ? nlohmann::json(std::string(to_string(*rep.orbital_verdict)))
                                             : nlohmann::json(nullptr);
  j["torus_verdict"] = rep.torus_verdict ? nlohmann::json(*rep.torus_verdict) : nlohmann::json(nullptr);
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& cp : rep.checkpoints) {
    cps.push_back({{"t", cp.t},
                   {"r", vec_json(cp.r)},
                   {"phase_residual", cp.phase_residual ? vec_json(*cp.phase_residual) : nlohmann::json(nullptr)}});
  }
  j["checkpoints"] = cps;
  return j;
}

}  // namespace torus
