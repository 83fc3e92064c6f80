#pragma once

#include <memory>
#include <vector>

#include "torus/action_angle.hpp"
#include "torus/asymptotics.hpp"
#include "torus/catalog.hpp"
#include "torus/center_chart.hpp"

namespace torus {

/// A Cartesian system seen through its product chart.
struct ChartedSystem {
  ProductChart charts;
  std::shared_ptr<const TransformedPerturbation> perturbation;  // null when unperturbed
  ActionAngleSystem system;
};

/// (sqrt(inner * outer), 0): inside the annulus on a log scale.
Point default_seed(const PlanarCentreField& field);

ProductChart build_product_chart(const catalog::CartesianSystem& sys, const ChartOptions& options = {});

/// A is the chart frequency map; the system counts as isochronous when every
/// chart passes check_isochronous on its grid with `iso_tol`.
ChartedSystem chart_system(const catalog::CartesianSystem& sys, ProductChart charts, double iso_tol = 1e-8);

/// Integrates the Cartesian system once and maps the samples into the chart.
PhaseTrajectory run_cartesian(const catalog::CartesianSystem& sys, const ChartedSystem& charted, const ode::State& x0,
                              double t0, const std::vector<double>& times, double tol);

}  // namespace torus
