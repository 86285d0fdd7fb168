#pragma once

// Domain types shared by the whole library: growth rates, targets,
// control-polynomial systems, KL comparison functions, partitions and
// trajectory records.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uctl/errors.hpp"

namespace uctl {

using State = Eigen::VectorXd;
using Control = Eigen::VectorXd;

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

inline void require_finite(const State& x, const char* what) {
  if (!all_finite(x)) throw DomainError(std::string(what) + " has non-finite entries");
}

/// Integer power by repeated multiplication; exact for small integer data.
inline double ipow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

// ---------------------------------------------------------------------------
// Growth rate
// ---------------------------------------------------------------------------

/// Strictly increasing bijection nu of [0, inf) with nu(0) = 0, carried with its exact inverse.
class GrowthRate {
 public:
  using Fn = std::function<double(double)>;

  /// nu(r) = r^degree.
  static GrowthRate power(int degree) {
    if (degree < 1) throw DomainError("growth degree must be >= 1, got " + std::to_string(degree));
    GrowthRate g;
    g.degree_ = degree;
    return g;
  }

  static GrowthRate generic(Fn nu, Fn inverse) {
    if (!nu || !inverse) throw InvariantError("generic growth rate needs both nu and its inverse");
    GrowthRate g;
    g.nu_ = std::move(nu);
    g.inverse_ = std::move(inverse);
    return g;
  }

  [[nodiscard]] std::optional<int> degree() const { return degree_; }

  [[nodiscard]] double operator()(double r) const {
    check_arg(r);
    if (degree_) return ipow(r, *degree_);
    return nu_(r);
  }

  [[nodiscard]] double inverse(double r) const {
    check_arg(r);
    if (degree_) {
      switch (*degree_) {
        case 1: return r;
        case 2: return std::sqrt(r);
        case 3: return std::cbrt(r);
        default: return std::pow(r, 1.0 / *degree_);
      }
    }
    return inverse_(r);
  }

 private:
  GrowthRate() = default;

  static void check_arg(double r) {
    if (!(r >= 0.0) || !std::isfinite(r))
      throw DomainError("growth rate argument must be finite and >= 0, got " + std::to_string(r));
  }

  std::optional<int> degree_;
  Fn nu_;
  Fn inverse_;
};

inline double nu_eval(const GrowthRate& g, double r) { return g(r); }
inline double nu_inverse(const GrowthRate& g, double r) { return g.inverse(r); }

struct GrowthRateReport {
  bool zero_at_zero = true;
  bool strictly_increasing = true;
  double worst_round_trip = 0.0;  // max relative |nu(nu^-1(r)) - r| / r
  [[nodiscard]] bool ok(double tol = 1e-12) const {
    return zero_at_zero && strictly_increasing && worst_round_trip <= tol;
  }
};

/// Checks nu(0) = 0, strict monotonicity and the inverse identity on a sorted grid.
inline GrowthRateReport check_growth_rate(const GrowthRate& g, std::span<const double> grid) {
  GrowthRateReport rep;
  rep.zero_at_zero = g(0.0) == 0.0;
  double prev = -std::numeric_limits<double>::infinity();
  for (double r : grid) {
    double v = g(r);
    if (!(v > prev)) rep.strictly_increasing = false;
    prev = v;
    if (r > 0.0) rep.worst_round_trip = std::max(rep.worst_round_trip, std::abs(g(g.inverse(r)) - r) / r);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Target
// ---------------------------------------------------------------------------

/// Closed target set given through its distance function. The compact-boundary
/// hypothesis is carried by boundary_radius and trusted.
struct Target {
  std::function<double(const State&)> distance;
  double boundary_radius = 0.0;
  std::function<bool(const State&)> interior;
  /// Radius of the ball around the origin forming the target (0 for the origin itself).
  double ball_radius = 0.0;

  [[nodiscard]] double operator()(const State& x) const { return distance(x); }

  static Target origin() {
    Target t;
    t.distance = [](const State& x) { return x.norm(); };
    t.boundary_radius = 1.0;
    t.interior = [](const State&) { return false; };
    return t;
  }

  static Target ball(double radius) {
    if (!(radius > 0.0)) throw DomainError("ball target radius must be > 0");
    Target t;
    t.distance = [radius](const State& x) { return std::max(0.0, x.norm() - radius); };
    t.boundary_radius = radius;
    t.interior = [radius](const State& x) { return x.norm() < radius; };
    t.ball_radius = radius;
    return t;
  }
};

/// Largest observed violation of |d(x) - d(y)| <= |x - y| over the given pairs (0 when 1-Lipschitz).
inline double target_lipschitz_excess(const Target& target, std::span<const std::pair<State, State>> pairs) {
  double worst = 0.0;
  for (const auto& [x, y] : pairs)
    worst = std::max(worst, std::abs(target(x) - target(y)) - (x - y).norm());
  return worst;
}

// ---------------------------------------------------------------------------
// Control-polynomial system
// ---------------------------------------------------------------------------

using CoefficientFn = std::function<State(const State& x, const Control& direction)>;
using ConeTest = std::function<bool(const Control&)>;

/// One homogeneous term f_k(x, u/|u|) |u|^k of the dynamics.
struct PolynomialTerm {
  int degree = 0;
  CoefficientFn coefficient;
};

namespace cones {
inline ConeTest nonnegative() {
  return [](const Control& u) { return (u.array() >= 0.0).all(); };
}
inline ConeTest whole_space() {
  return [](const Control&) { return true; };
}
}  // namespace cones

/// Dynamics f(x,u) = sum_k f_k(x, u/|u|) |u|^k with u in a closed cone U and growth nu(r) = r^d.
/// The direction passed to the coefficients is the zero vector when u = 0.
class ControlPolynomialSystem {
 public:
  ControlPolynomialSystem(int state_dim, int control_dim, int degree, std::vector<PolynomialTerm> terms,
                          ConeTest cone, std::string name = {})
      : n_(state_dim), m_(control_dim), d_(degree), terms_(std::move(terms)), cone_(std::move(cone)),
        name_(std::move(name)) {
    if (n_ < 1 || m_ < 1) throw InvariantError("state and control dimensions must be >= 1");
    if (d_ < 1) throw InvariantError("control degree must be >= 1");
    if (!cone_) throw InvariantError("missing control cone test");
    for (const auto& t : terms_) {
      if (t.degree < 0 || t.degree > d_)
        throw InvariantError("term degree " + std::to_string(t.degree) + " outside 0.." + std::to_string(d_));
      if (!t.coefficient) throw InvariantError("term without coefficient function");
    }
  }

  [[nodiscard]] int state_dim() const { return n_; }
  [[nodiscard]] int control_dim() const { return m_; }
  [[nodiscard]] int degree() const { return d_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::vector<PolynomialTerm>& terms() const { return terms_; }
  [[nodiscard]] GrowthRate growth() const { return GrowthRate::power(d_); }
  [[nodiscard]] bool in_cone(const Control& u) const { return u.size() == m_ && cone_(u); }

  /// f_k(x, e) for term index i, checked for dimension and finiteness.
  [[nodiscard]] State term_value(std::size_t i, const State& x, const Control& direction) const {
    State v = terms_[i].coefficient(x, direction);
    if (v.size() != n_) throw InvariantError("coefficient returned wrong dimension");
    return v;
  }

  void check_state(const State& x) const {
    if (x.size() != n_) throw DomainError("state has dimension " + std::to_string(x.size()) +
                                          ", expected " + std::to_string(n_));
    require_finite(x, "state");
  }

  void check_control(const Control& u) const {
    if (u.size() != m_) throw ControlSetViolation("control has dimension " + std::to_string(u.size()));
    if (!all_finite(u)) throw ControlSetViolation("control has non-finite entries");
    if (!cone_(u)) throw ControlSetViolation("control outside the cone U");
  }

 private:
  int n_;
  int m_;
  int d_;
  std::vector<PolynomialTerm> terms_;
  ConeTest cone_;
  std::string name_;
};

/// Unit direction of u, or the zero vector for u = 0.
inline Control unit_direction(const Control& u) {
  double norm = u.norm();
  if (norm == 0.0) return Control::Zero(u.size());
  return u / norm;
}

inline State eval_dynamics(const ControlPolynomialSystem& sys, const State& x, const Control& u) {
  sys.check_state(x);
  sys.check_control(u);
  const double magnitude = u.norm();
  const Control e = unit_direction(u);
  State out = State::Zero(sys.state_dim());
  for (std::size_t i = 0; i < sys.terms().size(); ++i) {
    const int k = sys.terms()[i].degree;
    if (k > 0 && magnitude == 0.0) continue;
    out += sys.term_value(i, x, e) * ipow(magnitude, k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// KL functions
// ---------------------------------------------------------------------------

/// Two-argument comparison function beta(r, t).
class KLFunction {
 public:
  using Fn = std::function<double(double, double)>;

  KLFunction() = default;
  KLFunction(Fn fn, bool strict_at_zero) : fn_(std::move(fn)), strict_at_zero_(strict_at_zero) {
    if (!fn_) throw InvariantError("empty KL function");
  }

  [[nodiscard]] double operator()(double r, double t) const {
    if (!(r >= 0.0) || !(t >= 0.0)) throw DomainError("KL arguments must be >= 0");
    return fn_(r, t);
  }
  /// Declared property beta(R, 0) > R for every R > 0.
  [[nodiscard]] bool strict_at_zero() const { return strict_at_zero_; }
  [[nodiscard]] explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
  bool strict_at_zero_ = false;
};

struct KLViolation {
  enum class Kind { NonzeroAtZero, Negative, NotIncreasingInR, NotDecreasingInT, NoDecay };
  Kind kind;
  double r;
  double t;
  double value;
};

inline const char* to_string(KLViolation::Kind k) {
  switch (k) {
    case KLViolation::Kind::NonzeroAtZero: return "nonzero-at-zero";
    case KLViolation::Kind::Negative: return "negative";
    case KLViolation::Kind::NotIncreasingInR: return "not-increasing-in-r";
    case KLViolation::Kind::NotDecreasingInT: return "not-decreasing-in-t";
    case KLViolation::Kind::NoDecay: return "no-decay";
  }
  return "?";
}

struct KLReport {
  std::vector<KLViolation> violations;
  /// beta(R,0) > R held at every grid radius.
  bool strict_at_zero_observed = true;
  [[nodiscard]] bool clean() const { return violations.empty(); }
  [[nodiscard]] bool has(KLViolation::Kind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const auto& v) { return v.kind == k; });
  }
};

/// Checks the KL axioms on the product of two sorted grids. The limit in t is
/// checked as beta(r, t_max) <= decay_fraction * beta(r, t_min).
inline KLReport kl_check(const KLFunction& beta, std::span<const double> r_grid, std::span<const double> t_grid,
                         double decay_fraction = 1e-2) {
  KLReport rep;
  for (double t : t_grid) {
    double v = beta(0.0, t);
    if (v != 0.0) rep.violations.push_back({KLViolation::Kind::NonzeroAtZero, 0.0, t, v});
  }
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
      const double r = r_grid[i];
      const double t = t_grid[j];
      const double v = beta(r, t);
      if (v < 0.0 || !std::isfinite(v)) rep.violations.push_back({KLViolation::Kind::Negative, r, t, v});
      if (i > 0 && !(v > beta(r_grid[i - 1], t)))
        rep.violations.push_back({KLViolation::Kind::NotIncreasingInR, r, t, v});
      if (j > 0 && !(v < beta(r, t_grid[j - 1])))
        rep.violations.push_back({KLViolation::Kind::NotDecreasingInT, r, t, v});
    }
  }
  if (t_grid.size() >= 2) {
    for (double r : r_grid) {
      const double first = beta(r, t_grid.front());
      const double last = beta(r, t_grid.back());
      if (!(last <= decay_fraction * first))
        rep.violations.push_back({KLViolation::Kind::NoDecay, r, t_grid.back(), last});
    }
  }
  for (double r : r_grid)
    if (r > 0.0 && !(beta(r, 0.0) > r)) rep.strict_at_zero_observed = false;
  return rep;
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

/// Finite sampling partition 0 = t_0 < t_1 < ... < t_K.
class Partition {
 public:
  explicit Partition(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw InvariantError("partition needs at least two nodes");
    if (times_.front() != 0.0) throw InvariantError("partition must start at 0");
    for (std::size_t k = 1; k < times_.size(); ++k) {
      if (!(times_[k] > times_[k - 1]) || !std::isfinite(times_[k]))
        throw InvariantError("partition nodes must be finite and strictly increasing");
      diameter_ = std::max(diameter_, times_[k] - times_[k - 1]);
    }
  }

  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] double diameter() const { return diameter_; }
  [[nodiscard]] double end() const { return times_.back(); }
  [[nodiscard]] std::size_t size() const { return times_.size(); }

 private:
  std::vector<double> times_;
  double diameter_ = 0.0;
};

// ---------------------------------------------------------------------------
// Trajectory record
// ---------------------------------------------------------------------------

enum class TrajectoryStatus { TargetReached, BlowUp, HorizonEnd };
enum class ControlKind { Original, Extended };

inline const char* to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::TargetReached: return "TargetReached";
    case TrajectoryStatus::BlowUp: return "BlowUp";
    case TrajectoryStatus::HorizonEnd: return "HorizonEnd";
  }
  return "?";
}

/// Sampled trajectory-control pair. controls[k] is the value held on [times[k], times[k+1]);
/// extended controls are packed as (w0, w_1, ..., w_m).
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Control> controls;
  /// Positions in `times` of the partition nodes (sample instants).
  std::vector<std::size_t> node_indices;
  ControlKind control_kind = ControlKind::Original;
  TrajectoryStatus status = TrajectoryStatus::HorizonEnd;
  double status_time = 0.0;
  /// Point the state is frozen at after TargetReached.
  std::optional<State> frozen_point;

  [[nodiscard]] std::size_t size() const { return times.size(); }

  /// State at time t, piecewise-linear between records and frozen after the status time.
  [[nodiscard]] State state_at(double t) const {
    if (times.empty()) throw DomainError("empty trajectory");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) {
      if (frozen_point) return *frozen_point;
      if (t > times.back() && status == TrajectoryStatus::BlowUp) throw DomainError("query beyond blow-up time");
      return states.back();
    }
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times.begin());
    double a = times[k - 1], b = times[k];
    double lam = (t - a) / (b - a);
    return (1.0 - lam) * states[k - 1] + lam * states[k];
  }
};

}  // namespace uctl
