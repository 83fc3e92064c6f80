#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "torus/center_chart.hpp"
#include "torus/ode.hpp"

namespace torus {

/// Independent planar centres stacked as x = (x_1, ..., x_n), x_k in R^2.
class ProductChart {
 public:
  ProductChart() = default;
  explicit ProductChart(std::vector<std::shared_ptr<const ActionAngleChart>> charts);

  std::size_t size() const { return charts_.size(); }
  std::size_t cartesian_dimension() const { return 2 * charts_.size(); }
  const ActionAngleChart& chart(std::size_t k) const { return *charts_[k]; }
  const std::vector<std::shared_ptr<const ActionAngleChart>>& charts() const { return charts_; }

  Eigen::VectorXd frequencies(const Eigen::VectorXd& r) const;
  /// The uncoupled field f on R^{2n}.
  ode::VectorField unperturbed_field() const;

 private:
  std::vector<std::shared_ptr<const ActionAngleChart>> charts_;
};

/// Angles are measured in turns. `theta` is normally wrapped into [0, 1);
/// maps that take a state accept any real angle.
struct ActionAngleState {
  Eigen::VectorXd r;
  Eigen::VectorXd theta;
};

ActionAngleState to_action_angle(const ProductChart& pc, const ode::State& x);
ode::State from_action_angle(const ProductChart& pc, const ActionAngleState& s);

/// Nearest-integer continuation of wrapped angle samples.
std::vector<Eigen::VectorXd> lift_angles(const std::vector<Eigen::VectorXd>& wrapped);

/// Block-diagonal Jacobian of (r, theta) -> x by central differences.
/// Variables are ordered (r_1, theta_1, r_2, theta_2, ...), rows follow x.
/// Throws SingularJacobian when a block is numerically singular.
Eigen::MatrixXd jacobian(const ProductChart& pc, const ActionAngleState& s);

/// Same matrix assembled from the variational equation along the orbit; the
/// period derivative is still taken by differences.
Eigen::MatrixXd jacobian_variational(const ProductChart& pc, const ActionAngleState& s);

using CartesianPerturbation = std::function<ode::State(double, const ode::State&)>;

/// (P, Q)(t, r, theta) = J^{-1} g(t, x(r, theta)).
class TransformedPerturbation {
 public:
  TransformedPerturbation(ProductChart pc, CartesianPerturbation g);

  std::pair<Eigen::VectorXd, Eigen::VectorXd> operator()(double t, const Eigen::VectorXd& r,
                                                         const Eigen::VectorXd& theta) const;
  Eigen::VectorXd P(double t, const Eigen::VectorXd& r, const Eigen::VectorXd& theta) const {
    return (*this)(t, r, theta).first;
  }
  Eigen::VectorXd Q(double t, const Eigen::VectorXd& r, const Eigen::VectorXd& theta) const {
    return (*this)(t, r, theta).second;
  }

 private:
  ProductChart pc_;
  CartesianPerturbation g_;
};

TransformedPerturbation transform_perturbation(const ProductChart& pc, CartesianPerturbation g);

}  // namespace torus
