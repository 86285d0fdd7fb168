#pragma once

// Rescaled dynamics f/(1+nu(|u|)), the impulsive extension F on the simplex
// w0 + |w| = 1, the two control maps between U and the simplex, and the
// time changes relating original and rescaled trajectories.

#include <cmath>
#include <string>

#include "uctl/core.hpp"

namespace uctl {

/// Point (w0, w) of the closed simplex w0 + |w| = 1, w0 in [0,1].
struct ExtendedControl {
  double w0 = 1.0;
  Control w;

  static constexpr double kSimplexTol = 1e-12;

  static ExtendedControl make(double w0, Control w, double tol = kSimplexTol) {
    ExtendedControl wc{w0, std::move(w)};
    wc.validate(tol);
    return wc;
  }

  /// Rebuilds from (w0, w_1, ..., w_m).
  static ExtendedControl unpack(const Eigen::VectorXd& packed, double tol = kSimplexTol) {
    if (packed.size() < 2) throw InvariantError("packed extended control needs at least two entries");
    return make(packed[0], packed.tail(packed.size() - 1), tol);
  }

  [[nodiscard]] Eigen::VectorXd pack() const {
    Eigen::VectorXd v(w.size() + 1);
    v[0] = w0;
    v.tail(w.size()) = w;
    return v;
  }

  void validate(double tol = kSimplexTol) const {
    if (!std::isfinite(w0) || !all_finite(w)) throw InvariantError("extended control has non-finite entries");
    if (w0 < -tol || w0 > 1.0 + tol) throw InvariantError("w0 = " + std::to_string(w0) + " outside [0,1]");
    if (std::abs(w0 + w.norm() - 1.0) > tol)
      throw InvariantError("w0 + |w| = " + std::to_string(w0 + w.norm()) + " differs from 1");
  }

  [[nodiscard]] bool impulsive() const { return w0 == 0.0; }
};

/// Restricted extended control set {(w0,w) : w0 >= rho}.
struct RestrictedControlSet {
  double rho;

  explicit RestrictedControlSet(double r) : rho(r) {
    if (!(rho > 0.0 && rho <= 1.0)) throw InvariantError("rho must lie in (0,1]");
  }
  [[nodiscard]] bool contains(const ExtendedControl& wc) const { return wc.w0 >= rho; }
};

inline State rescaled_dynamics(const ControlPolynomialSystem& sys, const State& x, const Control& u) {
  State f = eval_dynamics(sys, x, u);
  return f / (1.0 + sys.growth()(u.norm()));
}

namespace detail {
// s^a on [0,1] with 0^0 = 1 and 0^a = 0 for a > 0.
inline double simplex_pow(double s, int num, int den) {
  if (num == 0) return 1.0;
  if (num == den) return s;
  if (s == 0.0) return 0.0;
  if (den == 1) return ipow(s, num);
  return std::pow(s, static_cast<double>(num) / den);
}
}  // namespace detail

/// F(x, w0, w) = sum_k f_k(x, w/|w|) |w|^{k/d} w0^{1-k/d}.
inline State extended_dynamics(const ControlPolynomialSystem& sys, const State& x, const ExtendedControl& wc) {
  sys.check_state(x);
  wc.validate();
  if (wc.w.size() != sys.control_dim()) throw InvariantError("extended control has wrong dimension");
  if (!sys.in_cone(wc.w)) throw ControlSetViolation("extended direction w outside the cone U");
  const int d = sys.degree();
  const double w0 = std::clamp(wc.w0, 0.0, 1.0);
  const double wn = wc.w.norm();
  const Control e = unit_direction(wc.w);
  State out = State::Zero(sys.state_dim());
  for (std::size_t i = 0; i < sys.terms().size(); ++i) {
    const int k = sys.terms()[i].degree;
    const double weight = detail::simplex_pow(wn, k, d) * detail::simplex_pow(w0, d - k, d);
    if (weight == 0.0) continue;
    out += sys.term_value(i, x, e) * weight;
  }
  return out;
}

/// u -> (1/(1+nu(|u|)), u nu(|u|) / (|u| (1+nu(|u|)))).
inline ExtendedControl control_to_extended(const GrowthRate& g, const Control& u) {
  if (!all_finite(u)) throw DomainError("control has non-finite entries");
  const double mag = u.norm();
  if (mag == 0.0) return ExtendedControl{1.0, Control::Zero(u.size())};
  const double nu = g(mag);
  const double denom = 1.0 + nu;
  return ExtendedControl{1.0 / denom, u * (nu / (mag * denom))};
}

/// (w0, w) -> (w/|w|) nu^{-1}(|w| / w0); undefined at w0 = 0.
inline Control extended_to_control(const GrowthRate& g, const ExtendedControl& wc) {
  wc.validate();
  if (wc.w0 <= 0.0) throw ImpulsivePointError("w0 = 0 has no finite control");
  const double wn = wc.w.norm();
  if (wn == 0.0) return Control::Zero(wc.w.size());
  return wc.w * (g.inverse(wn / wc.w0) / wn);
}

// ---------------------------------------------------------------------------
// Time changes
// ---------------------------------------------------------------------------

namespace detail {
inline TrajectoryRecord rescale_clock(const TrajectoryRecord& traj, const GrowthRate& g, bool forward) {
  if (traj.control_kind != ControlKind::Original)
    throw PreconditionError("time change needs a record with original controls");
  if (traj.times.empty()) return traj;
  if (traj.controls.size() + 1 < traj.times.size())
    throw PreconditionError("record has fewer controls than intervals");
  TrajectoryRecord out = traj;
  out.times[0] = traj.times[0];
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double speed = 1.0 + g(traj.controls[k].norm());
    const double gap = traj.times[k + 1] - traj.times[k];
    out.times[k + 1] = out.times[k] + (forward ? gap * speed : gap / speed);
  }
  out.status_time = out.times.back();
  return out;
}
}  // namespace detail

/// (x,u)(t) -> (y,v)(s) with s(t) = int_0^t (1 + nu(|u|)), exact on constant-control intervals.
inline TrajectoryRecord time_change_forward(const TrajectoryRecord& traj, const GrowthRate& g) {
  return detail::rescale_clock(traj, g, true);
}

/// (y,v)(s) -> (x,u)(t) with t(s) = int_0^s (1 + nu(|v|))^{-1}.
inline TrajectoryRecord time_change_backward(const TrajectoryRecord& traj, const GrowthRate& g) {
  return detail::rescale_clock(traj, g, false);
}

/// Original time t(s) = int_0^s w0 along an extended record. Constant stretches
/// of the result mark impulsive (jump) intervals.
inline std::vector<double> original_time_of_extended(const TrajectoryRecord& traj) {
  if (traj.control_kind != ControlKind::Extended)
    throw PreconditionError("record does not carry extended controls");
  std::vector<double> t(traj.times.size(), 0.0);
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k)
    t[k + 1] = t[k] + traj.controls[k][0] * (traj.times[k + 1] - traj.times[k]);
  return t;
}

}  // namespace uctl
