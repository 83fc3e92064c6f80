#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "torus/action_angle.hpp"
#include "torus/ode.hpp"

namespace torus {

/// r' = P(t, r, theta), theta' = A(r) + Q(t, r, theta) with r in R^m, theta in R^n (turns).
struct ActionAngleSystem {
  std::size_t m = 1;
  std::size_t n = 1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& r)> A;
  std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& r, const Eigen::VectorXd& theta)> P;
  std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& r, const Eigen::VectorXd& theta)> Q;
  /// Declared constant frequency map.
  bool isochronous = false;

  /// State layout (r, theta).
  ode::VectorField as_vector_field() const;
};

/// Samples of a solution in action-angle form. theta is the continuous lift;
/// P and Q are the perturbation values along the solution.
struct PhaseTrajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> r;
  std::vector<Eigen::VectorXd> theta;
  std::vector<Eigen::VectorXd> P;
  std::vector<Eigen::VectorXd> Q;

  std::size_t size() const { return t.size(); }
  /// Linear interpolation of r or theta; exact at sample times.
  Eigen::VectorXd r_at(double time) const;
  Eigen::VectorXd theta_at(double time) const;
};

/// Log-spaced times from t0 to t_end merged with the dyadic checkpoints
/// t_end / 2^k >= t0.
std::vector<double> sample_times(double t0, double t_end, int per_decade = 40);

PhaseTrajectory simulate(const ActionAngleSystem& sys, const Eigen::VectorXd& r0, const Eigen::VectorXd& theta0,
                         double t0, double t_end, double tol, const std::vector<double>& times);

/// Maps a Cartesian solution through the product chart. Angle lifting uses
/// the predicted turn count A(r) dt between samples, so samples may be far
/// apart compared with the period.
PhaseTrajectory sample_cartesian(const ProductChart& pc, const TransformedPerturbation* perturbation,
                                 const ode::Trajectory& solution, const std::vector<double>& times);
PhaseTrajectory sample_cartesian(const ProductChart& pc, const TransformedPerturbation* perturbation,
                                 const std::vector<double>& times, const std::vector<ode::State>& states);

// ---------------------------------------------------------------------------
// decay exponent

struct DecaySample {
  double t = 0.0;
  double p_norm = 0.0;
  double q_norm = 0.0;
};

struct DecayFit {
  /// Exponent of the model |(P,Q)| ~ C t^-p (ln t)^-k fitted on the tail.
  double p_hat = 0.0;
  double confidence = 0.0;
  double log_exponent = 0.0;
  /// Plain least-squares slope of -log|(P,Q)| against log t on the tail.
  double power_law_slope = 0.0;
  bool above_one = false;  // p_hat - confidence > 1
  bool above_two = false;  // p_hat - confidence > 2
  std::size_t tail_samples = 0;
};

/// Throws InsufficientSpan (fewer than 20 usable samples or under two
/// decades) and NonDecaying.
DecayFit estimate_decay_exponent(const std::vector<DecaySample>& samples);

std::vector<DecaySample> decay_samples(const PhaseTrajectory& traj);

// ---------------------------------------------------------------------------
// envelope and comparison equation

enum class AlphaFamily { Constant, Linear, Quadratic, Custom };
enum class BetaFamily { One, InverseLog };

std::string_view to_string(AlphaFamily a);
std::string_view to_string(BetaFamily b);

struct DecayEnvelope {
  double p = 0.0;
  double p_confidence = 0.0;
  AlphaFamily alpha_family = AlphaFamily::Constant;
  double c = 0.0;
  std::function<double(double)> custom_alpha;  // used with AlphaFamily::Custom
  BetaFamily beta_family = BetaFamily::One;
  /// sup of alpha(|r(s)|) beta(s) along the trajectory
  double M = 0.0;
  /// Separate exponent for Q; the resulting phase error is a heuristic.
  std::optional<double> q_exponent;
  std::optional<double> q_M;

  double alpha(double s) const;
  double beta(double t) const;
};

/// Chooses alpha in {c, c s, c s^2} and beta in {1, 1/ln t} by log least
/// squares, then sets c to 1.05 times the largest sample ratio so that the
/// envelope dominates every sample.
DecayEnvelope fit_envelope(const PhaseTrajectory& traj, const DecayFit& fit);

/// Scalar majorant rho' = alpha(rho) / t^p through G(rho) = int_1^rho ds / alpha(s).
class ComparisonModel {
 public:
  ComparisonModel(AlphaFamily family, double c, double p);
  ComparisonModel(std::function<double(double)> alpha, double p);
  static ComparisonModel from_envelope(const DecayEnvelope& env, double t0);

  double p() const { return p_; }
  double alpha(double s) const;
  double G(double rho) const;
  double G_inverse(double g) const;
  /// Limit of G at infinity when finite.
  std::optional<double> G_star() const { return g_star_; }
  /// The custom-alpha G* verdict comes from a finite Cauchy test.
  bool g_star_heuristic() const { return family_ == AlphaFamily::Custom; }

 private:
  void resolve_g_star();

  AlphaFamily family_;
  double c_ = 1.0;
  std::function<double(double)> alpha_;
  double p_;
  std::optional<double> g_star_;
};

enum class BoundedKind { AllBounded, ConditionallyBounded, UnboundedEvidence };
std::string_view to_string(BoundedKind k);

struct BoundedClass {
  BoundedKind kind = BoundedKind::AllBounded;
  /// Smallest start time from which the comparison solution through rho0 stays bounded.
  std::optional<double> t0_min;
  std::optional<double> g_star;
};

/// Throws ExponentTooSmall for p <= 1.
BoundedClass classify_boundedness(const ComparisonModel& cm, double rho0, double t0);

/// Throws BlowUpError when the solution reaches infinity before t.
double comparison_solution(const ComparisonModel& cm, double rho0, double t0, double t);

struct DominatingBound {
  ComparisonModel model;
  double t0;
  double rho0;
  double operator()(double t) const;  // +inf past blow-up
  double worst_ratio = 0.0;           // max |r(t)| / rho(t) over samples
  /// Vanishing envelope: rho stays at rho0.
  bool frozen = false;
};

/// Throws EnvelopeViolated if |r(t)| exceeds rho(t) at a sample.
DominatingBound dominating_trajectory_bound(const PhaseTrajectory& traj, const DecayEnvelope& env, double t0);

// ---------------------------------------------------------------------------
// limits

struct LimitAction {
  Eigen::VectorXd r_star;
  double err = 0.0;
};

/// Throws ExponentTooSmall unless p - confidence > 1.
LimitAction limit_action(const PhaseTrajectory& traj, const DecayEnvelope& env);

enum class CauchyVerdict { Converges, Divergent, Inconclusive };
std::string_view to_string(CauchyVerdict v);

struct CauchyOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  std::size_t min_checkpoints = 4;
  double ratio = 0.8;
  double harmonic_slope = -1.1;
};

struct CauchyResult {
  CauchyVerdict verdict = CauchyVerdict::Inconclusive;
  std::vector<double> checkpoints;  // ascending
  std::vector<Eigen::VectorXd> values;
  std::vector<double> increments;
  double harmonic_slope = 0.0;
};

/// Evaluates `value` at t_end / 2^k down to t_first and inspects the
/// successive increments.
CauchyResult dyadic_cauchy_test(const std::function<Eigen::VectorXd(double)>& value, double t_first, double t_end,
                                const CauchyOptions& options = {});

struct LimitPhase {
  bool divergent = false;
  Eigen::VectorXd theta0;
  double err = 0.0;
  double lipschitz = 0.0;
  CauchyResult cauchy;
};

/// Largest slope of A over a ball around r_star, plus twice the spread of the
/// sampled slopes.
double estimate_lipschitz(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& A,
                          const Eigen::VectorXd& r_star, double radius);

/// Returns divergent = true when the phase residual fails the Cauchy test;
/// otherwise requires p > 2, or p > 1 for an isochronous system, and throws
/// ExponentTooSmall.
LimitPhase limit_phase(const PhaseTrajectory& traj, const ActionAngleSystem& sys, const LimitAction& action,
                       const DecayEnvelope& env, const CauchyOptions& options = {});

struct OrbitalResult {
  enum class Verdict { Converges, Fails, Inconclusive } verdict = Verdict::Inconclusive;
  CauchyResult cauchy;
};
std::string_view to_string(OrbitalResult::Verdict v);

/// Throws ZeroFrequency when A(r*) = 0.
OrbitalResult orbital_convergence_test(const PhaseTrajectory& traj, const ActionAngleSystem& sys,
                                       const Eigen::VectorXd& r_star, const CauchyOptions& options = {});

struct TorusResult {
  bool converges = false;
  Eigen::VectorXd r_star;
  /// limsup - liminf of each action over the samples
  Eigen::VectorXd spread;
  CauchyResult cauchy;
};

TorusResult torus_convergence_check(const PhaseTrajectory& traj, const CauchyOptions& options = {});
/// Maps a Cartesian solution through the chart first.
TorusResult torus_convergence_check(const ode::Trajectory& solution, const ProductChart& pc,
                                    const std::vector<double>& times, const CauchyOptions& options = {});

// ---------------------------------------------------------------------------
// pipeline

struct Checkpoint {
  double t = 0.0;
  Eigen::VectorXd r;
  std::optional<Eigen::VectorXd> phase_residual;
};

struct AsymptoticsReport {
  std::optional<double> p_hat;
  double p_confidence = 0.0;
  std::optional<double> power_law_slope;
  std::optional<BoundedClass> bounded_class;
  std::optional<Eigen::VectorXd> r_star;
  double r_star_err = 0.0;
  std::optional<Eigen::VectorXd> theta0;
  double theta0_err = 0.0;
  bool theta0_divergent = false;
  std::optional<OrbitalResult::Verdict> orbital_verdict;
  std::optional<bool> torus_verdict;
  std::vector<Checkpoint> checkpoints;
  /// Refusals and heuristic flags; not part of the JSON report.
  std::vector<std::string> notes;
  std::optional<DecayEnvelope> envelope;
};

struct AnalysisOptions {
  CauchyOptions phase_cauchy;
  CauchyOptions torus_cauchy{1e-8, 1e-3};
};

AsymptoticsReport analyze(const PhaseTrajectory& traj, const ActionAngleSystem& sys,
                          const AnalysisOptions& options = {});

nlohmann::json to_json(const AsymptoticsReport& report);

}  // namespace torus
