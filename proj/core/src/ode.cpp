#include "torus/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

#include "dop853_tableau.hpp"
#include "torus/error.hpp"

namespace torus::ode {

namespace {

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;
constexpr double kErrorExponent = -1.0 / 8.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

double rms(const State& v) { return v.size() == 0 ? 0.0 : v.norm() / std::sqrt(double(v.size())); }

void check_finite(const State& v, double t, const char* what) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::NonFiniteState, fmt::format("{} is not finite at t = {}", what, t));
  }
}

}  // namespace

State Segment::eval(double t) const {
  const double x = (t - t_start) / h;
  State y = State::Zero(y_start.size());
  for (int i = 6; i >= 0; --i) {
    y += coeffs[static_cast<std::size_t>(i)];
    // reversed index parity: F6 * x, then (+F5) * (1 - x), ...
    if ((6 - i) % 2 == 0) {
      y *= x;
    } else {
      y *= (1.0 - x);
    }
  }
  y += y_start;
  return y;
}

State Trajectory::dense_eval(double t) const {
  if (times_.empty()) throw Error(ErrorCode::OutOfRange, "empty trajectory");
  const double slack = 1e-12 * std::max(1.0, std::abs(times_.back() - times_.front()));
  if (t < times_.front() - slack || t > times_.back() + slack) {
    throw Error(ErrorCode::OutOfRange,
                fmt::format("t = {} outside trajectory span [{}, {}]", t, times_.front(), times_.back()));
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return states_.front();
  std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  if (times_[i] == t) return states_[i];
  if (i >= segments_.size()) return states_.back();
  return segments_[i].eval(t);
}

Trajectory Trajectory::from_knots(const VectorField& field, std::vector<double> times,
                                  std::vector<State> states, double tol) {
  if (times.size() != states.size() || times.empty()) {
    throw Error(ErrorCode::OutOfRange, "knot arrays must be non-empty and of equal length");
  }
  Trajectory traj;
  traj.tol_ = tol;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i + 1] > times[i])) {
      throw Error(ErrorCode::OutOfRange, "knot times must be strictly increasing");
    }
    traj.segments_.push_back(single_step(field, times[i], states[i], times[i + 1] - times[i]));
  }
  traj.times_ = std::move(times);
  traj.states_ = std::move(states);
  return traj;
}

Trajectory Trajectory::join(Trajectory first, Trajectory second) {
  if (first.empty()) return second;
  if (second.empty()) return first;
  if (first.t_max() != second.t_min()) {
    throw Error(ErrorCode::OutOfRange,
                fmt::format("cannot join trajectories ending at {} and starting at {}", first.t_max(),
                            second.t_min()));
  }
  Trajectory out = std::move(first);
  out.times_.insert(out.times_.end(), second.times_.begin() + 1, second.times_.end());
  out.states_.insert(out.states_.end(), second.states_.begin() + 1, second.states_.end());
  out.segments_.insert(out.segments_.end(), second.segments_.begin(), second.segments_.end());
  out.tol_ = std::max(out.tol_, second.tol_);
  return out;
}

TrajectoryBuilder::TrajectoryBuilder(double t0, State x0, double tol) : tol_(tol) {
  times_.push_back(t0);
  states_.push_back(std::move(x0));
}

void TrajectoryBuilder::append(const Segment& seg, const State& y_end) {
  segments_.push_back(seg);
  times_.push_back(seg.t_end());
  states_.push_back(y_end);
}

Trajectory TrajectoryBuilder::finish() && {
  Trajectory traj;
  if (times_.size() > 1 && times_.back() < times_.front()) {
    std::reverse(times_.begin(), times_.end());
    std::reverse(states_.begin(), states_.end());
    std::reverse(segments_.begin(), segments_.end());
  }
  traj.times_ = std::move(times_);
  traj.states_ = std::move(states_);
  traj.segments_ = std::move(segments_);
  traj.tol_ = tol_;
  return traj;
}

// ---------------------------------------------------------------------------
// DOP853 stepper

namespace {

// Computes the 12 main stages and the new state. k[0] must hold f(t, y).
template <class F>
void main_stages(F&& f, double t, const State& y, double h, std::vector<State>& k, State& tmp,
                 State& y_new) {
  using namespace dop853;
  for (std::size_t s = 1; s < kStages; ++s) {
    tmp = y;
    for (std::size_t j = 0; j < s; ++j) {
      if (kA[s][j] != 0.0) tmp.noalias() += (h * kA[s][j]) * k[j];
    }
    k[s] = f(t + kC[s] * h, tmp);
  }
  y_new = y;
  for (std::size_t j = 0; j < kStages; ++j) {
    if (kB[j] != 0.0) y_new.noalias() += (h * kB[j]) * k[j];
  }
}

// Three extra stages and the interpolation coefficients. k[12] must hold
// f(t + h, y_new).
template <class F>
void dense_coefficients(F&& f, double t, const State& y, const State& y_new, double h,
                        std::vector<State>& k, State& tmp, Segment& seg) {
  using namespace dop853;
  for (std::size_t s = kStages + 1; s < kExtendedStages; ++s) {
    tmp = y;
    for (std::size_t j = 0; j < s; ++j) {
      if (kA[s][j] != 0.0) tmp.noalias() += (h * kA[s][j]) * k[j];
    }
    k[s] = f(t + kC[s] * h, tmp);
  }
  const State dy = y_new - y;
  seg.t_start = t;
  seg.h = h;
  seg.y_start = y;
  seg.coeffs[0] = dy;
  seg.coeffs[1] = h * k[0] - dy;
  seg.coeffs[2] = 2.0 * dy - h * (k[kStages] + k[0]);
  for (std::size_t i = 0; i < 4; ++i) {
    State acc = State::Zero(y.size());
    for (std::size_t j = 0; j < kExtendedStages; ++j) {
      if (kD[i][j] != 0.0) acc.noalias() += kD[i][j] * k[j];
    }
    seg.coeffs[3 + i] = h * acc;
  }
}

}  // namespace

Dop853Stepper::Dop853Stepper(const VectorField& field, double t0, State x0, double direction,
                             const IntegratorOptions& options)
    : field_(field),
      options_(options),
      direction_(direction >= 0 ? 1.0 : -1.0),
      t_(t0),
      x_(std::move(x0)),
      k_(dop853::kExtendedStages) {
  if (!(options_.tol > 0.0)) throw Error(ErrorCode::OutOfRange, "tolerance must be positive");
  if (static_cast<std::size_t>(x_.size()) != field_.dimension) {
    throw Error(ErrorCode::OutOfRange,
                fmt::format("state has dimension {}, field expects {}", x_.size(), field_.dimension));
  }
  check_finite(x_, t_, "initial state");
  fx_ = f(t_, x_);
  h_abs_ = options_.initial_step > 0.0 ? options_.initial_step : initial_step();
  h_abs_ = std::min(h_abs_, options_.max_step);
}

State Dop853Stepper::f(double t, const State& x) {
  ++evals_;
  State dx = field_.eval(t, x);
  if (static_cast<std::size_t>(dx.size()) != field_.dimension) {
    throw Error(ErrorCode::NonFiniteState,
                fmt::format("field returned dimension {} (expected {})", dx.size(), field_.dimension));
  }
  check_finite(dx, t, "field value");
  return dx;
}

double Dop853Stepper::initial_step() {
  const double tol = options_.tol;
  State scale = (tol + tol * x_.array().abs()).matrix();
  const double d0 = rms((x_.array() / scale.array()).matrix());
  const double d1 = rms((fx_.array() / scale.array()).matrix());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  State y1 = x_ + direction_ * h0 * fx_;
  State f1 = f(t_ + direction_ * h0, y1);
  const double d2 = rms(((f1 - fx_).array() / scale.array()).matrix()) / h0;
  double h1;
  if (d1 <= 1e-15 && d2 <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
  }
  return std::min(100.0 * h0, h1);
}

const Segment& Dop853Stepper::step(double limit) {
  const double remaining = std::abs(limit - t_);
  const double tol = options_.tol;
  const std::size_t n = static_cast<std::size_t>(x_.size());
  State tmp(static_cast<Eigen::Index>(n));
  bool rejected_once = false;
  k_[0] = fx_;
  auto fn = [this](double t, const State& x) { return f(t, x); };
  for (;;) {
    const double min_step = 10.0 * std::abs(std::nextafter(t_, direction_ * std::numeric_limits<double>::infinity()) - t_);
    double h_abs = std::min({h_abs_, options_.max_step, remaining});
    if (h_abs < min_step && h_abs < remaining) {
      throw Error(ErrorCode::StepSizeUnderflow,
                  fmt::format("step size {} below resolution at t = {}", h_abs, t_));
    }
    const double h = direction_ * h_abs;
    main_stages(fn, t_, x_, h, k_, tmp, x_new_);
    check_finite(x_new_, t_ + h, "state");
    f_new_ = f(t_ + h, x_new_);
    k_[dop853::kStages] = f_new_;

    // Error estimate combining the 5th and 3rd order embedded solutions.
    State scale = (tol + tol * x_.array().abs().max(x_new_.array().abs())).matrix();
    State e5 = State::Zero(static_cast<Eigen::Index>(n));
    State e3 = State::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j <= dop853::kStages; ++j) {
      if (dop853::kE5[j] != 0.0) e5.noalias() += dop853::kE5[j] * k_[j];
      if (dop853::kE3[j] != 0.0) e3.noalias() += dop853::kE3[j] * k_[j];
    }
    const double err5 = (e5.array() / scale.array()).matrix().squaredNorm();
    const double err3 = (e3.array() / scale.array()).matrix().squaredNorm();
    double err_norm = 0.0;
    if (err5 > 0.0 || err3 > 0.0) {
      err_norm = h_abs * err5 / std::sqrt((err5 + 0.01 * err3) * double(n));
    }

    if (err_norm < 1.0) {
      double factor = err_norm == 0.0 ? kMaxFactor
                                      : std::min(kMaxFactor, kSafety * std::pow(err_norm, kErrorExponent));
      if (rejected_once) factor = std::min(1.0, factor);
      dense_coefficients(fn, t_, x_, x_new_, h, k_, tmp, segment_);
      t_ = (h_abs == remaining) ? limit : t_ + h;
      segment_.h = t_ - segment_.t_start;
      x_ = x_new_;
      fx_ = f_new_;
      h_abs_ = h_abs * factor;
      ++accepted_;
      return segment_;
    }
    h_abs_ = h_abs * std::max(kMinFactor, kSafety * std::pow(err_norm, kErrorExponent));
    rejected_once = true;
    ++rejected_;
  }
}

Segment single_step(const VectorField& field, double t, const State& y, double h, State* y_end) {
  std::vector<State> k(dop853::kExtendedStages);
  State tmp(y.size());
  State y_new;
  auto fn = [&field](double tt, const State& x) { return field.eval(tt, x); };
  k[0] = fn(t, y);
  main_stages(fn, t, y, h, k, tmp, y_new);
  k[dop853::kStages] = fn(t + h, y_new);
  Segment seg;
  dense_coefficients(fn, t, y, y_new, h, k, tmp, seg);
  if (y_end != nullptr) *y_end = y_new;
  return seg;
}

// ---------------------------------------------------------------------------
// Drivers

State integrate_streaming(const VectorField& field, const State& x0, double t0, double t1,
                          const IntegratorOptions& options,
                          const std::function<void(const Segment&, const State&)>& observer) {
  if (t1 == t0) throw Error(ErrorCode::OutOfRange, "integration interval is empty");
  Dop853Stepper stepper(field, t0, x0, t1 > t0 ? 1.0 : -1.0, options);
  while (stepper.t() != t1) {
    if (stepper.accepted_steps() >= options.max_steps) {
      throw Error(ErrorCode::TooManySteps,
                  fmt::format("exceeded {} steps at t = {}", options.max_steps, stepper.t()));
    }
    const Segment& seg = stepper.step(t1);
    observer(seg, stepper.x());
  }
  return stepper.x();
}

std::vector<State> sample_solution(const VectorField& field, const State& x0, double t0,
                                   const std::vector<double>& times, const IntegratorOptions& options) {
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < t0)) {
    throw Error(ErrorCode::OutOfRange, "sample times must be ascending and start at or after t0");
  }
  std::vector<State> out;
  out.reserve(times.size());
  std::size_t next = 0;
  while (next < times.size() && times[next] == t0) {
    out.push_back(x0);
    ++next;
  }
  if (next == times.size()) return out;
  integrate_streaming(field, x0, t0, times.back(), options, [&](const Segment& seg, const State& y_end) {
    while (next < times.size() && times[next] <= seg.t_end()) {
      out.push_back(times[next] == seg.t_end() ? y_end : seg.eval(times[next]));
      ++next;
    }
  });
  return out;
}

Trajectory integrate(const VectorField& field, const State& x0, double t0, double t1,
                     const IntegratorOptions& options) {
  TrajectoryBuilder builder(t0, x0, options.tol);
  integrate_streaming(field, x0, t0, t1, options,
                      [&builder](const Segment& seg, const State& y) { builder.append(seg, y); });
  return std::move(builder).finish();
}

Trajectory integrate(const VectorField& field, const State& x0, double t0, double t1, double tol) {
  IntegratorOptions opts;
  opts.tol = tol;
  return integrate(field, x0, t0, t1, opts);
}

namespace {

bool crosses(Direction dir, double a, double b) {
  switch (dir) {
    case Direction::Rising: return a < 0.0 && b >= 0.0;
    case Direction::Falling: return a > 0.0 && b <= 0.0;
    case Direction::Any: return (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0);
  }
  return false;
}

double locate_root(const EventSpec& ev, const Segment& seg, double ta, double ga, double tb, double gb) {
  if (gb == 0.0) return tb;
  auto g = [&](double t) { return ev.event_fn(t, seg.eval(t)); };
  double lo = ta, hi = tb, glo = ga, ghi = gb;
  if (lo > hi) {
    std::swap(lo, hi);
    std::swap(glo, ghi);
  }
  if (glo == 0.0) return lo;
  auto tol = [](double a, double b) {
    return std::abs(b - a) <= 4.0 * kEps * std::max({1.0, std::abs(a), std::abs(b)});
  };
  std::uintmax_t max_iter = 200;
  auto bracket = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, max_iter);
  return 0.5 * (bracket.first + bracket.second);
}

}  // namespace

EventRun integrate_with_events(const VectorField& field, const State& x0, double t0, double t1,
                               const std::vector<EventSpec>& events,
                               const IntegratorOptions& options, bool keep_trajectory) {
  if (t1 == t0) throw Error(ErrorCode::OutOfRange, "integration interval is empty");
  Dop853Stepper stepper(field, t0, x0, t1 > t0 ? 1.0 : -1.0, options);
  TrajectoryBuilder builder(t0, x0, options.tol);
  EventRun run;
  std::vector<double> g_prev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) g_prev[e] = events[e].event_fn(t0, x0);

  while (stepper.t() != t1) {
    if (stepper.accepted_steps() >= options.max_steps) {
      throw Error(ErrorCode::TooManySteps,
                  fmt::format("exceeded {} steps at t = {}", options.max_steps, stepper.t()));
    }
    const Segment& seg = stepper.step(t1);
    if (keep_trajectory) builder.append(seg, stepper.x());

    // Earliest crossing within this step, scanning interior sample points.
    struct Candidate {
      double t;
      std::size_t index;
    };
    std::vector<Candidate> found;
    for (std::size_t e = 0; e < events.size(); ++e) {
      const EventSpec& ev = events[e];
      const int parts = std::max(0, ev.subsamples) + 1;
      double ta = seg.t_start;
      double ga = g_prev[e];
      for (int j = 1; j <= parts; ++j) {
        const double tb = (j == parts) ? seg.t_end() : seg.t_start + seg.h * double(j) / double(parts);
        const double gb = (j == parts) ? ev.event_fn(tb, stepper.x()) : ev.event_fn(tb, seg.eval(tb));
        if (crosses(ev.direction, ga, gb)) {
          found.push_back({locate_root(ev, seg, ta, ga, tb, gb), e});
          // later crossings of the same event in this step are picked up on
          // subsequent intervals only if the event is non-terminal
          if (ev.terminal) break;
        }
        ta = tb;
        ga = gb;
      }
      g_prev[e] = ga;
    }
    if (!found.empty()) {
      const double dir = seg.h >= 0 ? 1.0 : -1.0;
      std::sort(found.begin(), found.end(),
                [dir](const Candidate& a, const Candidate& b) { return dir * a.t < dir * b.t; });
      for (const Candidate& c : found) {
        run.hits.push_back({c.t, seg.eval(c.t), c.index});
        if (events[c.index].terminal) {
          run.terminated = true;
          break;
        }
      }
      if (run.terminated) break;
    }
  }
  if (keep_trajectory) run.trajectory = std::move(builder).finish();
  return run;
}

EventResult integrate_to_event(const VectorField& field, const State& x0, double t0, double t_max,
                               const EventSpec& event, const IntegratorOptions& options,
                               bool keep_trajectory) {
  EventSpec terminal = event;
  terminal.terminal = true;
  EventRun run = integrate_with_events(field, x0, t0, t_max, {terminal}, options, keep_trajectory);
  if (!run.terminated) {
    throw Error(ErrorCode::EventNotFound,
                fmt::format("no qualifying crossing in [{}, {}]", std::min(t0, t_max), std::max(t0, t_max)));
  }
  EventResult out;
  out.t_event = run.hits.back().t;
  out.x_event = run.hits.back().x;
  out.trajectory = std::move(run.trajectory);
  return out;
}

EventResult integrate_to_event(const VectorField& field, const State& x0, double t0, double t_max,
                               const EventSpec& event, double tol) {
  IntegratorOptions opts;
  opts.tol = tol;
  return integrate_to_event(field, x0, t0, t_max, event, opts);
}

}  // namespace torus::ode
