#include <benchmark/benchmark.h>

#include <cmath>

#include "torus/action_angle.hpp"
#include "torus/asymptotics.hpp"
#include "torus/catalog.hpp"
#include "torus/pipeline.hpp"

using namespace torus;

namespace {

const catalog::CatalogEntry& duffing() { return catalog::get("duffing_centre"); }

ProductChart duffing_chart() {
  static const ProductChart pc = build_product_chart(*duffing().cartesian);
  return pc;
}

void integrate_duffing(benchmark::State& state) {
  const double tol = std::pow(10.0, -double(state.range(0)));
  const auto field = duffing().field();
  std::size_t steps = 0;
  for (auto _ : state) {
    const ode::Trajectory traj = ode::integrate(field, ode::State{{1.0, 0.0}}, 0.0, 100.0, tol);
    steps += traj.size();
    benchmark::DoNotOptimize(traj);
  }
  state.counters["steps"] = benchmark::Counter(double(steps), benchmark::Counter::kAvgIterations);
}
BENCHMARK(integrate_duffing)->DenseRange(8, 12, 2)->Unit(benchmark::kMicrosecond);

void build_chart_linear(benchmark::State& state) {
  ChartOptions opts;
  opts.grid_points = std::size_t(state.range(0));
  const auto& sys = *catalog::get("linear_centre").cartesian;
  for (auto _ : state) benchmark::DoNotOptimize(build_product_chart(sys, opts));
}
BENCHMARK(build_chart_linear)->Arg(17)->Arg(33)->Unit(benchmark::kMillisecond);

void build_chart_duffing(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_product_chart(*duffing().cartesian));
}
BENCHMARK(build_chart_duffing)->Unit(benchmark::kMillisecond);

void to_action_angle_duffing(benchmark::State& state) {
  const ProductChart pc = duffing_chart();
  double phase = 0.0;
  for (auto _ : state) {
    phase += 0.37;
    const ode::State x{{0.8 * std::cos(phase), 0.8 * std::sin(phase)}};
    benchmark::DoNotOptimize(to_action_angle(pc, x));
  }
}
BENCHMARK(to_action_angle_duffing)->Unit(benchmark::kMicrosecond);

void jacobian_duffing(benchmark::State& state) {
  const ProductChart pc = duffing_chart();
  const ActionAngleState s{Eigen::VectorXd::Constant(1, 1.2), Eigen::VectorXd::Constant(1, 0.3)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(state.range(0) ? jacobian_variational(pc, s) : jacobian(pc, s));
  }
}
BENCHMARK(jacobian_duffing)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void analyze_two_rates(benchmark::State& state) {
  const auto& e = catalog::get("ex4_3");
  const auto& sys = *e.action_angle;
  const PhaseTrajectory tr = simulate(sys, e.default_initial.head(2), e.default_initial.tail(2), e.default_t0,
                                      e.default_t_end, 1e-10, sample_times(e.default_t0, e.default_t_end));
  for (auto _ : state) benchmark::DoNotOptimize(analyze(tr, sys));
}
BENCHMARK(analyze_two_rates)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
