#pragma once

// Sample-and-hold and open-loop simulation of the original, rescaled and
// extended dynamics with target-hit and blow-up detection.

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uctl/core.hpp"
#include "uctl/transforms.hpp"

namespace uctl {

enum class DynamicsMode { Original, Rescaled, Extended };

inline const char* to_string(DynamicsMode m) {
  switch (m) {
    case DynamicsMode::Original: return "original";
    case DynamicsMode::Rescaled: return "rescaled";
    case DynamicsMode::Extended: return "extended";
  }
  return "?";
}

enum class FeedbackKind { Original, Extended };

/// State feedback, either K: x -> U or K_hat: x -> simplex. Evaluators must be thread-safe.
class Feedback {
 public:
  using OriginalFn = std::function<Control(const State&)>;
  using ExtendedFn = std::function<ExtendedControl(const State&)>;

  static Feedback original(OriginalFn fn) { return Feedback(std::move(fn)); }
  static Feedback extended(ExtendedFn fn) { return Feedback(std::move(fn)); }

  static Feedback constant(Control u) {
    return original([u = std::move(u)](const State&) { return u; });
  }
  static Feedback constant(ExtendedControl wc) {
    return extended([wc = std::move(wc)](const State&) { return wc; });
  }

  [[nodiscard]] FeedbackKind kind() const {
    return std::holds_alternative<OriginalFn>(fn_) ? FeedbackKind::Original : FeedbackKind::Extended;
  }

  [[nodiscard]] Control original_value(const State& x) const {
    if (kind() != FeedbackKind::Original) throw PreconditionError("feedback is extended, not original");
    Control u = guarded([&] { return std::get<OriginalFn>(fn_)(x); });
    if (!all_finite(u)) throw FeedbackDomainError("feedback returned a non-finite control");
    return u;
  }

  [[nodiscard]] ExtendedControl extended_value(const State& x) const {
    if (kind() != FeedbackKind::Extended) throw PreconditionError("feedback is original, not extended");
    return guarded([&] {
      ExtendedControl wc = std::get<ExtendedFn>(fn_)(x);
      wc.validate();
      return wc;
    });
  }

  /// Original control, or (w0, w) packed, at x.
  [[nodiscard]] Control packed_value(const State& x) const {
    return kind() == FeedbackKind::Original ? original_value(x) : extended_value(x).pack();
  }

 private:
  explicit Feedback(OriginalFn fn) : fn_(std::move(fn)) {}
  explicit Feedback(ExtendedFn fn) : fn_(std::move(fn)) {}

  template <class F>
  static auto guarded(F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const FeedbackDomainError&) {
      throw;
    } catch (const std::exception& e) {
      throw FeedbackDomainError(e.what());
    }
  }

  std::variant<OriginalFn, ExtendedFn> fn_;
};

/// Supremum of |K(x)| over the samples; finite on compact annuli for a locally bounded feedback.
inline double feedback_sup(const Feedback& k, std::span<const State> samples) {
  double sup = 0.0;
  for (const auto& x : samples) {
    double v = k.kind() == FeedbackKind::Original ? k.original_value(x).norm() : k.extended_value(x).w.norm();
    sup = std::max(sup, v);
  }
  return sup;
}

struct SimOptions {
  double target_tol = 1e-8;
  double blowup_norm = 1e9;
  double min_step = 1e-12;
  double horizon = 10.0;
  double integrator_abs_tol = 1e-12;
  double integrator_rel_tol = 1e-10;
  /// Extra output points inside each sampling interval, at most this far apart (0: nodes only).
  double output_step = 0.0;
  double initial_step = 1e-3;

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError(std::string(name) + " must be > 0");
    };
    pos(target_tol, "target_tol");
    pos(blowup_norm, "blowup_norm");
    pos(min_step, "min_step");
    pos(horizon, "horizon");
    pos(integrator_abs_tol, "integrator_abs_tol");
    pos(integrator_rel_tol, "integrator_rel_tol");
    pos(initial_step, "initial_step");
    if (output_step < 0.0) throw PreconditionError("output_step must be >= 0");
  }
};

/// Piecewise-constant control signal; values[k] holds on [breakpoints[k], breakpoints[k+1]),
/// the last value until the horizon. Extended values are packed (w0, w).
struct PiecewiseConstantSignal {
  std::vector<double> breakpoints;
  std::vector<Control> values;

  static PiecewiseConstantSignal constant(Control v) { return {{0.0}, {std::move(v)}}; }
};

/// Nodes k * delta up to the horizon, closed with the horizon itself.
inline Partition uniform_partition(double delta, double horizon) {
  if (!(delta > 0.0) || !(horizon > 0.0)) throw DomainError("delta and horizon must be > 0");
  if (delta > horizon) throw DomainError("delta exceeds the horizon");
  std::vector<double> t{0.0};
  for (std::size_t k = 1;; ++k) {
    const double tk = static_cast<double>(k) * delta;
    if (tk >= horizon * (1.0 - 1e-12)) break;
    t.push_back(tk);
  }
  t.push_back(horizon);
  return Partition(std::move(t));
}

/// Partition with gaps drawn uniformly from [delta_max/2, delta_max]; deterministic in the seed.
inline Partition random_partition(double delta_max, double horizon, std::uint64_t seed) {
  if (!(delta_max > 0.0) || !(horizon > 0.0)) throw DomainError("delta and horizon must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(0.5 * delta_max, delta_max);
  std::vector<double> t{0.0};
  while (t.back() + delta_max < horizon) t.push_back(t.back() + gap(rng));
  t.push_back(horizon);
  return Partition(std::move(t));
}

namespace detail {

using OdeState = std::vector<double>;

inline OdeState to_ode(const State& x) { return OdeState(x.data(), x.data() + x.size()); }
inline State from_ode(const OdeState& v) { return Eigen::Map<const State>(v.data(), static_cast<Eigen::Index>(v.size())); }

/// Right-hand side for one mode and one held control value.
inline std::function<State(const State&)> held_rhs(const ControlPolynomialSystem& sys, DynamicsMode mode,
                                                  const Control& held) {
  switch (mode) {
    case DynamicsMode::Original:
      sys.check_control(held);
      return [&sys, held](const State& x) { return eval_dynamics(sys, x, held); };
    case DynamicsMode::Rescaled:
      sys.check_control(held);
      return [&sys, held](const State& x) { return rescaled_dynamics(sys, x, held); };
    case DynamicsMode::Extended: {
      ExtendedControl wc = ExtendedControl::unpack(held);
      if (!sys.in_cone(wc.w)) throw ControlSetViolation("extended direction outside the cone U");
      return [&sys, wc](const State& x) { return extended_dynamics(sys, x, wc); };
    }
  }
  throw PreconditionError("unknown dynamics mode");
}

enum class SegmentEnd { Completed, TargetHit, BlowUp };

/// Adaptive DOPRI5(4) integration of x' = rhs(x) over [t0, t1].
class SegmentIntegrator {
 public:
  SegmentIntegrator(const Target& target, const SimOptions& opts) : target_(target), opts_(opts),
        dt_(opts.initial_step) {}

  SegmentEnd run(const std::function<State(const State&)>& rhs, State& x, double& t, double t1) {
    namespace ode = boost::numeric::odeint;
    auto system = [&rhs](const OdeState& y, OdeState& dydt, double) {
      State v;
      try {
        v = rhs(from_ode(y));
      } catch (const DomainError&) {
        v = State::Constant(static_cast<Eigen::Index>(y.size()), std::numeric_limits<double>::quiet_NaN());
      }
      dydt.assign(v.data(), v.data() + v.size());
    };
    auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<OdeState>>(opts_.integrator_abs_tol,
                                                                           opts_.integrator_rel_tol);
    OdeState y = to_ode(x);
    stepper.initialize(system, y, t);
    while (t < t1) {
      const double remaining = t1 - t;
      const bool clipped = dt_ >= remaining;
      const double tried = clipped ? remaining : dt_;
      double h = tried;
      const double t_prev = t;
      const OdeState y_prev = y;
      auto res = stepper.try_step(system, y, t, h);
      if (res != ode::success) {
        dt_ = h;
        if (dt_ < opts_.min_step) return finish(y, x, SegmentEnd::BlowUp);
        continue;
      }
      const bool finite = std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
      const Crossing cross = finite ? scan_step(rhs, y_prev, y, tried) : Crossing{};
      if (!finite || cross.refine) {
        y = y_prev;
        t = t_prev;
        dt_ = 0.5 * tried;
        stepper.initialize(system, y, t);
        if (dt_ < opts_.min_step) return finish(y, x, SegmentEnd::BlowUp);
        continue;
      }
      if (cross.hit) {
        t = t_prev + cross.s * tried;
        x = cross.x;
        return SegmentEnd::TargetHit;
      }
      if (clipped) t = t1;
      else dt_ = h;
      x = from_ode(y);
      if (x.norm() >= opts_.blowup_norm) return SegmentEnd::BlowUp;
      if (target_(x) <= opts_.target_tol) return SegmentEnd::TargetHit;
    }
    return SegmentEnd::Completed;
  }

 private:
  struct Crossing {
    bool hit = false;
    bool refine = false;
    double s = 0.0;
    State x;
  };

  /// Looks for a pass through the target inside an accepted step using the cubic
  /// Hermite interpolant; a deep dip below both endpoints asks for a shorter step.
  Crossing scan_step(const std::function<State(const State&)>& rhs, const OdeState& a, const OdeState& b,
                     double h) const {
    Crossing c;
    const State xa = from_ode(a);
    const State xb = from_ode(b);
    State fa, fb;
    try {
      fa = rhs(xa);
      fb = rhs(xb);
    } catch (const DomainError&) {
      return c;
    }
    if (!all_finite(fa) || !all_finite(fb)) return c;
    const double da = target_(xa);
    const double db = target_(xb);
    const auto at = [&](double s) {
      const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
      const double h10 = s * (1.0 - s) * (1.0 - s);
      const double h01 = s * s * (3.0 - 2.0 * s);
      const double h11 = s * s * (s - 1.0);
      return State(h00 * xa + h10 * h * fa + h01 * xb + h11 * h * fb);
    };
    constexpr int kSamples = 16;
    int j_best = 0;
    double coarse = da;
    for (int j = 1; j <= kSamples; ++j) {
      const double dp = j == kSamples ? db : target_(at(static_cast<double>(j) / kSamples));
      if (dp < coarse) {
        coarse = dp;
        j_best = j;
      }
    }
    // golden-section refinement around the best sample
    double lo = std::max(0, j_best - 1) / static_cast<double>(kSamples);
    double hi = std::min(kSamples, j_best + 1) / static_cast<double>(kSamples);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    double f1 = target_(at(m1)), f2 = target_(at(m2));
    for (int it = 0; it < 60; ++it) {
      if (f1 <= f2) {
        hi = m2;
        m2 = m1;
        f2 = f1;
        m1 = hi - g * (hi - lo);
        f1 = target_(at(m1));
      } else {
        lo = m1;
        m1 = m2;
        f1 = f2;
        m2 = lo + g * (hi - lo);
        f2 = target_(at(m2));
      }
    }
    const double best_s = f1 <= f2 ? m1 : m2;
    const double best = std::min(f1, f2);
    State best_x = at(best_s);
    if (best >= std::min(da, db)) return c;
    if (best <= opts_.target_tol) {
      c.hit = true;
      c.s = best_s;
      c.x = std::move(best_x);
    } else if (best < 0.5 * std::min(da, db)) {
      c.refine = true;
    }
    return c;
  }

  static SegmentEnd finish(const OdeState& y, State& x, SegmentEnd end) {
    x = from_ode(y);
    return end;
  }

  const Target& target_;
  const SimOptions& opts_;
  double dt_;
};

/// Shared driver: holds control_at(k, x(t_k)) on [nodes[k], nodes[k+1]].
template <class ControlAt>
TrajectoryRecord drive(const ControlPolynomialSystem& sys, DynamicsMode mode, const Target& target,
                       const std::vector<double>& nodes, const State& z, const SimOptions& opts,
                       ControlKind kind, ControlAt&& control_at) {
  opts.validate();
  sys.check_state(z);
  TrajectoryRecord rec;
  rec.control_kind = kind;
  rec.times.push_back(nodes.front());
  rec.states.push_back(z);
  rec.node_indices.push_back(0);
  if (target(z) <= opts.target_tol) {
    rec.status = TrajectoryStatus::TargetReached;
    rec.status_time = nodes.front();
    rec.frozen_point = z;
    return rec;
  }

  SegmentIntegrator integrator(target, opts);
  State x = z;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const Control held = control_at(k, x);
    const auto rhs = held_rhs(sys, mode, held);
    const double a = nodes[k];
    const double b = nodes[k + 1];
    std::size_t pieces = 1;
    if (opts.output_step > 0.0) pieces = static_cast<std::size_t>(std::ceil((b - a) / opts.output_step - 1e-9));
    pieces = std::max<std::size_t>(pieces, 1);
    double t = a;
    for (std::size_t j = 1; j <= pieces; ++j) {
      const double stop = j == pieces ? b : a + (b - a) * static_cast<double>(j) / static_cast<double>(pieces);
      const SegmentEnd end = integrator.run(rhs, x, t, stop);
      rec.times.push_back(t);
      rec.states.push_back(x);
      rec.controls.push_back(held);
      if (end == SegmentEnd::TargetHit) {
        rec.status = TrajectoryStatus::TargetReached;
        rec.status_time = t;
        rec.frozen_point = x;
        return rec;
      }
      if (end == SegmentEnd::BlowUp) {
        // Keep only the last finite state.
        if (!all_finite(rec.states.back())) {
          rec.times.pop_back();
          rec.states.pop_back();
          rec.controls.pop_back();
        }
        rec.status = TrajectoryStatus::BlowUp;
        rec.status_time = rec.times.back();
        return rec;
      }
    }
    rec.node_indices.push_back(rec.times.size() - 1);
  }
  rec.status = TrajectoryStatus::HorizonEnd;
  rec.status_time = rec.times.back();
  return rec;
}

inline void check_mode(DynamicsMode mode, FeedbackKind kind) {
  const bool extended_mode = mode == DynamicsMode::Extended;
  const bool extended_kind = kind == FeedbackKind::Extended;
  if (extended_mode != extended_kind)
    throw PreconditionError(std::string("feedback kind does not match ") + to_string(mode) + " dynamics");
}

}  // namespace detail

/// pi-sampling trajectory: on [t_{k-1}, t_k] the control K(x(t_{k-1})) is held.
/// Runs to the earlier of the partition end and opts.horizon.
inline TrajectoryRecord simulate_sample_hold(const ControlPolynomialSystem& sys, DynamicsMode mode,
                                             const Target& target, const Feedback& k, const Partition& pi,
                                             const State& z, const SimOptions& opts) {
  detail::check_mode(mode, k.kind());
  if (target(z) <= opts.target_tol) throw PreconditionError("initial state already within target tolerance");
  std::vector<double> nodes;
  for (double t : pi.times()) {
    if (t >= opts.horizon) break;
    nodes.push_back(t);
  }
  const double stop = std::min(opts.horizon, pi.end());
  if (nodes.back() < stop) nodes.push_back(stop);
  const ControlKind kind = mode == DynamicsMode::Extended ? ControlKind::Extended : ControlKind::Original;
  return detail::drive(sys, mode, target, nodes, z, opts, kind,
                       [&k](std::size_t, const State& x) { return k.packed_value(x); });
}

/// Open-loop run of x' = f(x, u(t)) (or the rescaled / extended dynamics) up to opts.horizon.
inline TrajectoryRecord simulate_open_loop(const ControlPolynomialSystem& sys, DynamicsMode mode,
                                           const Target& target, const PiecewiseConstantSignal& signal,
                                           const State& z, const SimOptions& opts) {
  if (signal.values.empty() || signal.values.size() != signal.breakpoints.size())
    throw PreconditionError("signal needs one value per breakpoint");
  if (signal.breakpoints.front() != 0.0) throw PreconditionError("signal must start at 0");
  std::vector<double> nodes;
  std::vector<std::size_t> which;
  for (std::size_t k = 0; k < signal.breakpoints.size(); ++k) {
    if (k > 0 && !(signal.breakpoints[k] > signal.breakpoints[k - 1]))
      throw PreconditionError("signal breakpoints must increase");
    if (signal.breakpoints[k] >= opts.horizon) break;
    nodes.push_back(signal.breakpoints[k]);
    which.push_back(k);
  }
  nodes.push_back(opts.horizon);
  const ControlKind kind = mode == DynamicsMode::Extended ? ControlKind::Extended : ControlKind::Original;
  return detail::drive(sys, mode, target, nodes, z, opts, kind,
                       [&](std::size_t k, const State&) { return signal.values[which[k]]; });
}

}  // namespace uctl
