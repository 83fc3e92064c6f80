#include "torus/pipeline.hpp"

#include <cmath>

namespace torus {

Point default_seed(const PlanarCentreField& field) {
  return Point(std::sqrt(field.inner_radius * field.outer_radius), 0.0);
}

ProductChart build_product_chart(const catalog::CartesianSystem& sys, const ChartOptions& options) {
  std::vector<std::shared_ptr<const ActionAngleChart>> charts;
  for (const auto& block : sys.blocks) {
    charts.push_back(std::make_shared<const ActionAngleChart>(build_chart(block, default_seed(block), options)));
  }
  return ProductChart(std::move(charts));
}

ChartedSystem chart_system(const catalog::CartesianSystem& sys, ProductChart charts, double iso_tol) {
  ChartedSystem out{charts, nullptr, {}};
  if (sys.perturbation) {
    out.perturbation = std::make_shared<const TransformedPerturbation>(charts, sys.perturbation);
  }
  ActionAngleSystem& s = out.system;
  s.m = s.n = charts.size();
  s.A = [charts](const Eigen::VectorXd& r) { return charts.frequencies(r); };
  if (auto tp = out.perturbation) {
    s.P = [tp](double t, const Eigen::VectorXd& r, const Eigen::VectorXd& th) { return (*tp)(t, r, th).first; };
    s.Q = [tp](double t, const Eigen::VectorXd& r, const Eigen::VectorXd& th) { return (*tp)(t, r, th).second; };
  }
  s.isochronous = true;
  for (const auto& c : charts.charts()) {
    if (!check_isochronous(*c, c->r_grid(), iso_tol)) s.isochronous = false;
  }
  return out;
}

PhaseTrajectory run_cartesian(const catalog::CartesianSystem& sys, const ChartedSystem& charted, const ode::State& x0,
                              double t0, const std::vector<double>& times, double tol) {
  ode::IntegratorOptions opts;
  opts.tol = tol;
  const std::vector<ode::State> states = ode::sample_solution(sys.field(), x0, t0, times, opts);
  return sample_cartesian(charted.charts, charted.perturbation.get(), times, states);
}

}  // namespace torus
