#include "torus/action_angle.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "torus/error.hpp"

namespace torus {

namespace {

Point block(const ode::State& x, std::size_t k) { return Point(x[Eigen::Index(2 * k)], x[Eigen::Index(2 * k + 1)]); }

double wrap_turns(double theta) {
  double w = theta - std::floor(theta);
  return w >= 1.0 ? 0.0 : w;
}

// Point of the cycle at action r after a fraction `phase` of its period;
// phase may lie in [-0.1, 1].
Point cycle_point(const ActionAngleChart& chart, double r, double phase) {
  auto orb = chart.orbit(r);
  ode::State x = orb->path.dense_eval(phase * orb->period);
  return Point(x[0], x[1]);
}

double r_step(double r) { return 1e-5 * std::abs(r); }

void require_stencil(const ActionAngleChart& chart, double r, double h) {
  if (!chart.contains(r - h) || !chart.contains(r + h)) {
    auto [lo, hi] = chart.r_range();
    throw Error(ErrorCode::OutOfRange,
                fmt::format("difference stencil around r = {} leaves [{}, {}]", r, lo, hi));
  }
}

Eigen::Matrix2d check_block(const Eigen::Matrix2d& J, std::size_t k) {
  const double det = J.determinant();
  const double scale = J.col(0).norm() * J.col(1).norm();
  if (!std::isfinite(det) || std::abs(det) <= 1e-10 * scale) {
    throw Error(ErrorCode::SingularJacobian, fmt::format("block {} has determinant {}", k, det));
  }
  return J;
}

Eigen::Matrix2d fd_block(const ActionAngleChart& chart, double r, double theta, std::size_t k) {
  double phase = wrap_turns(theta);
  const double ht = 1e-5 * (1.0 + std::abs(theta));
  if (phase + ht > 1.0) phase -= 1.0;
  const double hr = r_step(r);
  require_stencil(chart, r, hr);
  Eigen::Matrix2d J;
  J.col(0) = (cycle_point(chart, r + hr, phase) - cycle_point(chart, r - hr, phase)) / (2.0 * hr);
  J.col(1) = (cycle_point(chart, r, phase + ht) - cycle_point(chart, r, phase - ht)) / (2.0 * ht);
  return check_block(J, k);
}

Eigen::Matrix2d variational_block(const ActionAngleChart& chart, double r, double theta, std::size_t k) {
  const double phase = wrap_turns(theta);
  const double T = chart.period(r);
  const double hr = r_step(r);
  require_stencil(chart, r, hr);
  const double dT = (chart.period(r + hr) - chart.period(r - hr)) / (2.0 * hr);
  const auto& f = chart.field();
  const Point v = chart.section_point(r);
  const Point dv = orthogonal_direction(f(v), chart.gamma().orientation()) / r;

  // x' = f(x), y' = Df(x) y with the directional derivative by differences
  ode::VectorField tangent{4,
                           [&f](double, const ode::State& z) {
                             const Point x(z[0], z[1]), y(z[2], z[3]);
                             const double yn = y.norm();
                             Point dy = Point::Zero();
                             if (yn > 0.0) {
                               const double eps = 1e-7 * (1.0 + x.norm()) / yn;
                               dy = (f(x + eps * y) - f(x - eps * y)) / (2.0 * eps);
                             }
                             const Point fx = f(x);
                             return ode::State{{fx.x(), fx.y(), dy.x(), dy.y()}};
                           },
                           true};
  Point x = v, y = dv;
  if (phase > 0.0) {
    ode::Trajectory traj = ode::integrate(tangent, ode::State{{v.x(), v.y(), dv.x(), dv.y()}}, 0.0, phase * T,
                                          chart.tolerance());
    const ode::State& z = traj.back();
    x = Point(z[0], z[1]);
    y = Point(z[2], z[3]);
  }
  Eigen::Matrix2d J;
  J.col(0) = y + phase * dT * f(x);
  J.col(1) = T * f(x);
  return check_block(J, k);
}

template <class BlockFn>
Eigen::MatrixXd assemble(const ProductChart& pc, const ActionAngleState& s, BlockFn fn) {
  const auto n = Eigen::Index(pc.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (std::size_t k = 0; k < pc.size(); ++k) {
    const auto i = Eigen::Index(2 * k);
    J.block<2, 2>(i, i) = fn(pc.chart(k), s.r[Eigen::Index(k)], s.theta[Eigen::Index(k)], k);
  }
  return J;
}

}  // namespace

ProductChart::ProductChart(std::vector<std::shared_ptr<const ActionAngleChart>> charts)
    : charts_(std::move(charts)) {
  for (const auto& c : charts_) {
    if (!c) throw Error(ErrorCode::InvalidField, "null chart in product");
  }
}

Eigen::VectorXd ProductChart::frequencies(const Eigen::VectorXd& r) const {
  Eigen::VectorXd A(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) A[Eigen::Index(k)] = charts_[k]->frequency(r[Eigen::Index(k)]);
  return A;
}

ode::VectorField ProductChart::unperturbed_field() const {
  auto charts = charts_;
  return {cartesian_dimension(),
          [charts](double, const ode::State& x) {
            ode::State dx(x.size());
            for (std::size_t k = 0; k < charts.size(); ++k) {
              const Point f = charts[k]->field()(block(x, k));
              dx[Eigen::Index(2 * k)] = f.x();
              dx[Eigen::Index(2 * k + 1)] = f.y();
            }
            return dx;
          },
          true};
}

ActionAngleState to_action_angle(const ProductChart& pc, const ode::State& x) {
  if (std::size_t(x.size()) != pc.cartesian_dimension()) {
    throw Error(ErrorCode::OutOfRange, fmt::format("state has dimension {}, expected {}", x.size(), pc.cartesian_dimension()));
  }
  const auto n = Eigen::Index(pc.size());
  ActionAngleState s{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (std::size_t k = 0; k < pc.size(); ++k) {
    const ActionAngleChart& chart = pc.chart(k);
    const GammaCrossing c = chart.first_crossing(block(x, k));
    // the forward time to the transversal complements the backward one
    s.r[Eigen::Index(k)] = c.r;
    s.theta[Eigen::Index(k)] = wrap_turns(1.0 - c.time / chart.period(c.r));
  }
  return s;
}

ode::State from_action_angle(const ProductChart& pc, const ActionAngleState& s) {
  ode::State x(Eigen::Index(pc.cartesian_dimension()));
  for (std::size_t k = 0; k < pc.size(); ++k) {
    const Point p = cycle_point(pc.chart(k), s.r[Eigen::Index(k)], wrap_turns(s.theta[Eigen::Index(k)]));
    x[Eigen::Index(2 * k)] = p.x();
    x[Eigen::Index(2 * k + 1)] = p.y();
  }
  return x;
}

std::vector<Eigen::VectorXd> lift_angles(const std::vector<Eigen::VectorXd>& wrapped) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(wrapped.size());
  for (const auto& w : wrapped) {
    if (out.empty()) {
      out.push_back(w);
      continue;
    }
    Eigen::VectorXd d = w - wrapped[out.size() - 1];
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] -= std::round(d[i]);
    out.push_back(out.back() + d);
  }
  return out;
}

Eigen::MatrixXd jacobian(const ProductChart& pc, const ActionAngleState& s) { return assemble(pc, s, fd_block); }

Eigen::MatrixXd jacobian_variational(const ProductChart& pc, const ActionAngleState& s) {
  return assemble(pc, s, variational_block);
}

TransformedPerturbation::TransformedPerturbation(ProductChart pc, CartesianPerturbation g)
    : pc_(std::move(pc)), g_(std::move(g)) {}

std::pair<Eigen::VectorXd, Eigen::VectorXd> TransformedPerturbation::operator()(double t, const Eigen::VectorXd& r,
                                                                                const Eigen::VectorXd& theta) const {
  const ActionAngleState s{r, theta};
  const ode::State x = from_action_angle(pc_, s);
  const ode::State gx = g_(t, x);
  const auto n = Eigen::Index(pc_.size());
  Eigen::VectorXd P(n), Q(n);
  if (gx.isZero(0.0)) return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (std::size_t k = 0; k < pc_.size(); ++k) {
    const auto i = Eigen::Index(k);
    const Eigen::Matrix2d J = fd_block(pc_.chart(k), r[i], theta[i], k);
    const Eigen::Vector2d y = J.partialPivLu().solve(Eigen::Vector2d(gx[2 * i], gx[2 * i + 1]));
    P[i] = y[0];
    Q[i] = y[1];
  }
  return {P, Q};
}

TransformedPerturbation transform_perturbation(const ProductChart& pc, CartesianPerturbation g) {
  return TransformedPerturbation(pc, std::move(g));
}

}  // namespace torus
