#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace torus::ode {

using State = Eigen::VectorXd;

/// Right-hand side x' = eval(t, x) of a system of ODEs.
struct VectorField {
  std::size_t dimension = 0;
  std::function<State(double, const State&)> eval;
  bool autonomous = false;

  State operator()(double t, const State& x) const { return eval(t, x); }
};

struct IntegratorOptions {
  /// Local error per step is kept below tol * (1 + |x_i|) componentwise.
  double tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  /// Zero selects the step automatically.
  double initial_step = 0.0;
  std::size_t max_steps = 20'000'000;
};

/// One accepted DOP853 step together with its 7th-order continuous extension.
struct Segment {
  double t_start = 0.0;
  double h = 0.0;
  State y_start;
  std::array<State, 7> coeffs;

  double t_end() const { return t_start + h; }
  State eval(double t) const;
};

/// Dense solution on [t_min, t_max]; knots are stored in increasing time
/// order regardless of the integration direction.
class Trajectory {
 public:
  Trajectory() = default;

  const std::vector<double>& times() const { return times_; }
  const std::vector<State>& states() const { return states_; }
  const std::vector<Segment>& segments() const { return segments_; }
  double tolerance_used() const { return tol_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double t_min() const { return times_.front(); }
  double t_max() const { return times_.back(); }
  const State& front() const { return states_.front(); }
  const State& back() const { return states_.back(); }

  /// Interpolated state; exact at knots. Throws OutOfRange outside the span.
  State dense_eval(double t) const;

  /// Rebuilds a dense trajectory from stored knots by taking exactly one
  /// DOP853 step of the field across every knot interval. Knot values are
  /// kept bit-for-bit.
  static Trajectory from_knots(const VectorField& field, std::vector<double> times,
                               std::vector<State> states, double tol);

  /// Concatenates two trajectories that share the knot
  /// first.t_max() == second.t_min().
  static Trajectory join(Trajectory first, Trajectory second);

 private:
  friend class TrajectoryBuilder;

  std::vector<double> times_;
  std::vector<State> states_;
  std::vector<Segment> segments_;  // segments_[i] spans [times_[i], times_[i+1]]
  double tol_ = 0.0;
};

/// Collects segments in integration order and produces a time-sorted
/// Trajectory.
class TrajectoryBuilder {
 public:
  TrajectoryBuilder(double t0, State x0, double tol);
  void append(const Segment& seg, const State& y_end);
  Trajectory finish() &&;

 private:
  std::vector<double> times_;
  std::vector<State> states_;
  std::vector<Segment> segments_;
  double tol_;
};

/// Adaptive DOP853 stepper with mixed absolute/relative error control.
class Dop853Stepper {
 public:
  Dop853Stepper(const VectorField& field, double t0, State x0, double direction,
                const IntegratorOptions& options);

  /// Performs one accepted step of at most |limit - t()| and returns it.
  const Segment& step(double limit);

  double t() const { return t_; }
  const State& x() const { return x_; }
  std::size_t accepted_steps() const { return accepted_; }
  std::size_t rejected_steps() const { return rejected_; }
  std::size_t evaluations() const { return evals_; }

 private:
  State f(double t, const State& x);
  double initial_step();
  void build_dense(double h);

  const VectorField& field_;
  IntegratorOptions options_;
  double direction_;
  double t_;
  State x_;
  State fx_;
  double h_abs_ = 0.0;
  std::vector<State> k_;  // extended stage buffer
  State x_new_;
  State f_new_;
  Segment segment_;
  std::size_t accepted_ = 0;
  std::size_t rejected_ = 0;
  std::size_t evals_ = 0;
};

/// Single unchecked DOP853 step of size h from (t, y).
Segment single_step(const VectorField& field, double t, const State& y, double h,
                    State* y_end = nullptr);

Trajectory integrate(const VectorField& field, const State& x0, double t0, double t1,
                     const IntegratorOptions& options);
Trajectory integrate(const VectorField& field, const State& x0, double t0, double t1, double tol);

/// Streams accepted steps to `observer` without storing them. Returns the
/// final state.
State integrate_streaming(const VectorField& field, const State& x0, double t0, double t1,
                          const IntegratorOptions& options,
                          const std::function<void(const Segment&, const State& y_end)>& observer);

/// States at ascending `times` (all >= t0) from one forward integration,
/// without keeping the dense solution.
std::vector<State> sample_solution(const VectorField& field, const State& x0, double t0,
                                   const std::vector<double>& times, const IntegratorOptions& options);

enum class Direction { Rising, Falling, Any };

struct EventSpec {
  std::function<double(double, const State&)> event_fn;
  Direction direction = Direction::Any;
  bool terminal = true;
  /// Interior points of each step where the event function is also sampled,
  /// so that two crossings inside one step are still resolved.
  int subsamples = 4;
};

struct EventHit {
  double t = 0.0;
  State x;
  std::size_t event_index = 0;
};

struct EventRun {
  Trajectory trajectory;
  std::vector<EventHit> hits;
  bool terminated = false;
};

/// Integrates towards t1 and records every qualifying zero crossing of the
/// event functions; stops at the first terminal one. A zero at t0 itself
/// is never reported.
EventRun integrate_with_events(const VectorField& field, const State& x0, double t0, double t1,
                               const std::vector<EventSpec>& events,
                               const IntegratorOptions& options, bool keep_trajectory = true);

struct EventResult {
  double t_event = 0.0;
  State x_event;
  Trajectory trajectory;  // covers [t0, t_event] (and possibly a little more)
};

/// First crossing of `event` after t0 and before t_max. Throws EventNotFound.
EventResult integrate_to_event(const VectorField& field, const State& x0, double t0, double t_max,
                               const EventSpec& event, const IntegratorOptions& options,
                               bool keep_trajectory = true);
EventResult integrate_to_event(const VectorField& field, const State& x0, double t0, double t_max,
                               const EventSpec& event, double tol);

}  // namespace torus::ode
