#pragma once

// Descent-rate machinery: beta-strips r_{i-1} = beta(r_i, 0), descent times,
// the piecewise-constant rate b(R,t) stitched from them, a continuous KL
// majorant of b, and trajectory-level checks of descent and control bounds,
// including an empirical sample-stabilizability sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "uctl/core.hpp"
#include "uctl/parallel.hpp"
#include "uctl/sampling.hpp"

namespace uctl {

// ---------------------------------------------------------------------------
// Strips
// ---------------------------------------------------------------------------

/// Radii r_i for i in [i_min, i_max] with r_0 = 1 and r_{i-1} = beta(r_i, 0).
/// Strip i is the half-open band R in [r_i, r_{i-1}).
class StripSystem {
 public:
  StripSystem(int i_min, int i_max, std::vector<double> radii, KLFunction beta)
      : i_min_(i_min), i_max_(i_max), radii_(std::move(radii)), beta_(std::move(beta)) {}

  [[nodiscard]] int i_min() const { return i_min_; }
  [[nodiscard]] int i_max() const { return i_max_; }
  [[nodiscard]] const KLFunction& beta() const { return beta_; }
  [[nodiscard]] const std::vector<double>& radii() const { return radii_; }

  [[nodiscard]] double radius(int i) const {
    if (i < i_min_ || i > i_max_) throw WindowExhausted("radius index " + std::to_string(i) + " outside window");
    return radii_[static_cast<std::size_t>(i - i_min_)];
  }

  /// The i with R in [r_i, r_{i-1}).
  [[nodiscard]] int strip_index(double R) const {
    if (!(R > 0.0)) throw DomainError("strip index needs R > 0");
    if (R >= radius(i_min_) || R < radius(i_max_))
      throw WindowExhausted("R = " + std::to_string(R) + " outside the stored strips");
    // radii decrease with i
    int lo = i_min_ + 1, hi = i_max_;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      if (R >= radius(mid)) hi = mid;
      else lo = mid + 1;
    }
    return lo;
  }

 private:
  int i_min_;
  int i_max_;
  std::vector<double> radii_;
  KLFunction beta_;
};

namespace detail {
/// r in (0, level) with beta(r, 0) = level, by bisection.
inline double invert_at_zero(const KLFunction& beta, double level) {
  double lo = 0.0, hi = level;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = beta(mid, 0.0);
    if (v == level) return mid;
    (v < level ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}
}  // namespace detail

inline StripSystem strip_radii(const KLFunction& beta, int i_min, int i_max) {
  if (i_min > 0 || i_max < 0) throw PreconditionError("strip window must contain index 0");
  if (!beta.strict_at_zero()) throw StrictnessError("beta is not declared strict at zero (beta(R,0) > R)");
  auto strict_at = [&](double r) {
    if (!(beta(r, 0.0) > r))
      throw StrictnessError("beta(" + std::to_string(r) + ", 0) = " + std::to_string(beta(r, 0.0)) + " is not > R");
  };
  std::vector<double> radii(static_cast<std::size_t>(i_max - i_min + 1));
  auto at = [&](int i) -> double& { return radii[static_cast<std::size_t>(i - i_min)]; };
  at(0) = 1.0;
  strict_at(1.0);
  for (int i = 0; i > i_min; --i) {
    at(i - 1) = beta(at(i), 0.0);
    strict_at(at(i - 1));
  }
  for (int i = 1; i <= i_max; ++i) {
    at(i) = detail::invert_at_zero(beta, at(i - 1));
    strict_at(at(i));
  }
  return StripSystem(i_min, i_max, std::move(radii), beta);
}

// ---------------------------------------------------------------------------
// Descent times
// ---------------------------------------------------------------------------

/// t_hat_i for i in [first, first + times.size()).
struct DwellTimes {
  int first = 0;
  std::vector<double> times;

  [[nodiscard]] int last() const { return first + static_cast<int>(times.size()) - 1; }
  [[nodiscard]] double at(int i) const {
    if (i < first || i > last()) throw WindowExhausted("dwell time index " + std::to_string(i) + " outside window");
    return times[static_cast<std::size_t>(i - first)];
  }
};

/// Smallest t with beta(r_{i-1}, t) <= r_i for every strip i in [i_min+1, i_max].
inline DwellTimes descent_times(const KLFunction& beta, const StripSystem& strips, double max_time = 1e6) {
  DwellTimes out;
  out.first = strips.i_min() + 1;
  for (int i = out.first; i <= strips.i_max(); ++i) {
    const double from = strips.radius(i - 1);
    const double level = strips.radius(i);
    double lo = 0.0, hi = 1.0;
    while (beta(from, hi) > level) {
      lo = hi;
      hi *= 2.0;
      if (hi > max_time)
        throw DecayFailure("beta(" + std::to_string(from) + ", t) stays above " + std::to_string(level));
    }
    while (hi - lo > 1e-14 * std::max(1.0, hi)) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (beta(from, mid) > level ? lo : hi) = mid;
    }
    out.times.push_back(hi);
  }
  if (out.times.empty()) throw PreconditionError("strip window holds no strip");
  return out;
}

// ---------------------------------------------------------------------------
// Piecewise rate b and its KL majorant
// ---------------------------------------------------------------------------

/// b(R,t) = r_{i(R)+N-2} for t in [Tbar_{i(R),N-1}, Tbar_{i(R),N}), Tbar_{i,N} = sum_{j<=N} T_{i+j}.
class PiecewiseB {
 public:
  PiecewiseB(StripSystem strips, DwellTimes dwell, double horizon)
      : strips_(std::move(strips)), dwell_(std::move(dwell)) {
    if (dwell_.first != strips_.i_min() + 1 || dwell_.last() != strips_.i_max())
      throw PreconditionError("dwell times do not match the strip window");
    const int first_usable = strips_.i_min() + 2;
    double total = 0.0;
    for (int i = first_usable; i <= strips_.i_max(); ++i) total += dwell_.at(i);
    if (!(total > horizon))
      throw PreconditionError("cumulative dwell time " + std::to_string(total) + " does not exceed horizon " +
                              std::to_string(horizon));
  }

  [[nodiscard]] const StripSystem& strips() const { return strips_; }
  [[nodiscard]] const DwellTimes& dwell() const { return dwell_; }

  /// Tbar_{i,N}; Tbar_{i,-1} = 0.
  [[nodiscard]] double cumulative(int i, int n) const {
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) acc += dwell_.at(i + j);
    return acc;
  }

  /// Largest t for which b(R, .) is defined when R lies in strip i.
  [[nodiscard]] double time_limit(int i) const { return cumulative(i, strips_.i_max() - i); }

  [[nodiscard]] double operator()(double R, double t) const {
    if (!(t >= 0.0)) throw DomainError("b needs t >= 0");
    if (R == 0.0) return 0.0;
    const int i = strips_.strip_index(R);
    if (i - 2 < strips_.i_min()) throw WindowExhausted("strip " + std::to_string(i) + " needs r_{i-2}");
    double acc = 0.0;
    for (int n = 0;; ++n) {
      acc += dwell_.at(i + n);
      if (t < acc) return strips_.radius(i + n - 2);
    }
  }

 private:
  StripSystem strips_;
  DwellTimes dwell_;
};

namespace detail {

/// Continuous strictly decreasing g_i >= b(R in strip i, .): linear from r_{i+N-3} at Tbar_{i,N-1}
/// to r_{i+N-2} at Tbar_{i,N}, then exponential decay past the window.
inline double strip_envelope(const PiecewiseB& b, int i, double t) {
  const auto& s = b.strips();
  double start = 0.0;
  for (int n = 0; i + n <= s.i_max(); ++n) {
    const double end = start + b.dwell().at(i + n);
    if (t < end) {
      const double lam = (t - start) / (end - start);
      return (1.0 - lam) * s.radius(i + n - 3) + lam * s.radius(i + n - 2);
    }
    start = end;
  }
  const double last = s.radius(s.i_max() - 2);
  return last * std::exp(-(t - start) / b.dwell().at(s.i_max()));
}

inline double strip_upper(const PiecewiseB& b, int i, double t) {
  double g = 0.0;
  for (int j = i; j <= b.strips().i_max(); ++j) g = std::max(g, strip_envelope(b, j, t));
  return g;
}

}  // namespace detail

/// Continuous KL function dominating b: in R, linear interpolation between the running
/// maxima of the strip envelopes at r_i and r_{i-1}, plus eps R e^{-t} for strictness.
/// Defined for R = 0 and R in [r_{i_max}, r_{i_min+3}); other R raise WindowExhausted,
/// as do times past the window of the strip containing R.
inline KLFunction kl_majorant(const PiecewiseB& b) {
  const auto& s = b.strips();
  if (s.i_max() - s.i_min() < 4) throw PreconditionError("majorant needs at least five radii in the window");
  const double eps = 1e-9 * s.radius(s.i_max());
  return KLFunction(
      [b, eps](double R, double t) {
        if (R == 0.0) return 0.0;
        const auto& st = b.strips();
        const int i = st.strip_index(R);
        if (i - 1 < st.i_min() + 3) throw WindowExhausted("R above the majorant window");
        if (t > b.time_limit(i)) throw WindowExhausted("t beyond the dwell window of strip " + std::to_string(i));
        const double lo_r = st.radius(i), hi_r = st.radius(i - 1);
        const double lam = (R - lo_r) / (hi_r - lo_r);
        const double g = (1.0 - lam) * detail::strip_upper(b, i, t) + lam * detail::strip_upper(b, i - 1, t);
        return g + eps * R * std::exp(-t);
      },
      true);
}

// ---------------------------------------------------------------------------
// Trajectory checks
// ---------------------------------------------------------------------------

struct BoundViolation {
  double t;
  double value;
  double bound;
};

struct DescentReport {
  std::size_t checked = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::vector<BoundViolation> violations;
  [[nodiscard]] bool clean() const { return violations.empty(); }
};

/// d(x(t_k)) <= beta(d(z), t_k) + tol at every recorded point (partition nodes only if nodes_only).
inline DescentReport verify_descent(const TrajectoryRecord& traj, const KLFunction& beta, const Target& target,
                                    double tol = 1e-6, bool nodes_only = false) {
  DescentReport rep;
  if (traj.states.empty()) return rep;
  const double dz = target(traj.states.front());
  auto check = [&](std::size_t k) {
    const double d = target(traj.states[k]);
    const double bound = beta(dz, traj.times[k]);
    ++rep.checked;
    rep.worst_excess = std::max(rep.worst_excess, d - bound);
    if (d > bound + tol) rep.violations.push_back({traj.times[k], d, bound});
  };
  if (nodes_only) {
    for (std::size_t k : traj.node_indices) check(k);
  } else {
    for (std::size_t k = 0; k < traj.size(); ++k) check(k);
  }
  return rep;
}

/// |u(t_k)| <= sigma(d(x(t_k))) on every control interval of an original-control record.
inline DescentReport verify_sigma_bound(const TrajectoryRecord& traj, const Target& target,
                                        const std::function<double(double)>& sigma, double tol = 0.0) {
  if (traj.control_kind != ControlKind::Original) throw PreconditionError("sigma bound needs original controls");
  DescentReport rep;
  for (std::size_t k = 0; k < traj.controls.size(); ++k) {
    const double mag = traj.controls[k].norm();
    const double bound = sigma(target(traj.states[k]));
    ++rep.checked;
    rep.worst_excess = std::max(rep.worst_excess, mag - bound);
    if (mag > bound + tol) rep.violations.push_back({traj.times[k], mag, bound});
  }
  return rep;
}

/// Step function sigma(r) = max{sbar(i-1), sbar(i), sbar(i+1)} on [r_i, r_{i-1}), where sbar(i)
/// is the largest |u| seen on intervals starting in strip i over the supplied runs.
class StepSigma {
 public:
  StepSigma(StripSystem strips, std::vector<double> per_strip)
      : strips_(std::move(strips)), per_strip_(std::move(per_strip)) {}

  [[nodiscard]] double strip_max(int i) const {
    if (i <= strips_.i_min() || i > strips_.i_max()) return 0.0;
    return per_strip_[static_cast<std::size_t>(i - strips_.i_min() - 1)];
  }

  [[nodiscard]] double operator()(double r) const {
    const int i = strips_.strip_index(r);
    return std::max({strip_max(i - 1), strip_max(i), strip_max(i + 1)});
  }

 private:
  StripSystem strips_;
  std::vector<double> per_strip_;
};

inline StepSigma sigma_from_runs(const std::vector<TrajectoryRecord>& runs, const StripSystem& strips,
                                 const Target& target) {
  std::vector<double> per(static_cast<std::size_t>(strips.i_max() - strips.i_min()), 0.0);
  for (const auto& run : runs) {
    if (run.control_kind != ControlKind::Original) throw PreconditionError("sigma needs original controls");
    for (std::size_t k = 0; k < run.controls.size(); ++k) {
      const double d = target(run.states[k]);
      if (!(d > 0.0) || d >= strips.radius(strips.i_min()) || d < strips.radius(strips.i_max())) continue;
      const int i = strips.strip_index(d);
      auto& slot = per[static_cast<std::size_t>(i - strips.i_min() - 1)];
      slot = std::max(slot, run.controls[k].norm());
    }
  }
  return StepSigma(strips, std::move(per));
}

// ---------------------------------------------------------------------------
// Empirical sample stabilizability
// ---------------------------------------------------------------------------

struct RadiusPair {
  double R;
  double r;
};

struct StabViolation {
  State z;
  std::size_t partition = 0;
  double t = 0.0;
  double d = 0.0;
  double bound = 0.0;
  std::string reason;
};

struct PairReport {
  double R = 0.0;
  double r = 0.0;
  double delta = 0.0;
  std::size_t seeds_tested = 0;
  std::size_t partitions_tested = 0;
  /// Largest d(x(t_{k+1})) / d(x(t_k)) over sampled node pairs.
  double worst_node_ratio = 0.0;
  std::vector<StabViolation> violations;
};

struct StabReport {
  std::vector<PairReport> pairs;
  [[nodiscard]] bool pass() const {
    return std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.violations.empty(); });
  }
};

/// Initial states z with 0 < d(z) <= R.
using InitialStateSampler = std::function<std::vector<State>(double R, std::size_t count, std::uint64_t seed)>;

/// Evenly spaced distances up to R; signs alternate in one dimension, seeded random directions otherwise.
inline InitialStateSampler shell_sampler(const Target& target, int n) {
  const double offset = target.ball_radius;
  return [offset, n](double R, std::size_t count, std::uint64_t seed) {
    std::vector<State> out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (std::size_t k = 0; k < count; ++k) {
      State e(n);
      if (n == 1) {
        e[0] = k % 2 == 0 ? 1.0 : -1.0;
      } else {
        for (int j = 0; j < n; ++j) e[j] = gauss(rng);
        e.normalize();
      }
      const std::size_t per_sign = n == 1 ? (count + 1) / 2 : count;
      const std::size_t slot = n == 1 ? k / 2 : k;
      const double d = R * static_cast<double>(per_sign - slot) / static_cast<double>(per_sign);
      out.push_back(e * (offset + d));
    }
    return out;
  };
}

struct StabSettings {
  std::size_t seeds_per_pair = 8;
  std::size_t random_partitions = 2;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  /// Simulated time beyond the first t with beta(R, t) <= r.
  double extra_time = 10.0;
  unsigned jobs = 1;
  std::size_t max_violations_per_run = 5;
};

/// Checks d(x(t)) <= max{beta(d(z), t), r} + tol along pi-sampling trajectories from sampled
/// z with d(z) <= R, for a uniform partition of diameter delta(R, r) and seeded random ones.
/// Blow-up and feedback failures count as violations.
inline StabReport certify_sample_stabilizability(const ControlPolynomialSystem& sys, DynamicsMode mode,
                                                 const Target& target, const Feedback& k, const KLFunction& beta,
                                                 const std::vector<RadiusPair>& pairs,
                                                 const std::function<double(double, double)>& delta,
                                                 const InitialStateSampler& sampler, const StabSettings& settings,
                                                 SimOptions opts) {
  for (const auto& p : pairs)
    if (!(p.r > 0.0 && p.r < p.R)) throw PreconditionError("pairs need 0 < r < R");

  struct Task {
    std::size_t pair;
    State z;
    std::size_t partition;
  };
  struct Outcome {
    std::vector<StabViolation> violations;
    double worst_ratio = 0.0;
  };

  StabReport report;
  std::vector<Task> tasks;
  std::vector<std::vector<Partition>> partitions(pairs.size());
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto [R, r] = pairs[pi];
    const double dlt = delta(R, r);
    if (!(dlt > 0.0)) throw PreconditionError("delta(R, r) must be > 0");
    // first time the bound reaches the floor r
    double t_floor = 1.0;
    while (beta(R, t_floor) > r) {
      t_floor *= 2.0;
      if (t_floor > 1e6) throw DecayFailure("beta(R, t) never drops below r");
    }
    const double horizon = std::max(t_floor + settings.extra_time, dlt);
    partitions[pi].push_back(uniform_partition(dlt, horizon));
    for (std::size_t q = 0; q < settings.random_partitions; ++q)
      partitions[pi].push_back(random_partition(dlt, horizon, settings.seed * 1000003ULL + pi * 7919ULL + q));
    const auto seeds = sampler(R, settings.seeds_per_pair, settings.seed + pi);
    PairReport pr;
    pr.R = R;
    pr.r = r;
    pr.delta = dlt;
    pr.seeds_tested = seeds.size();
    pr.partitions_tested = partitions[pi].size();
    report.pairs.push_back(pr);
    for (const auto& z : seeds)
      for (std::size_t q = 0; q < partitions[pi].size(); ++q) tasks.push_back({pi, z, q});
  }

  std::vector<Outcome> outcomes(tasks.size());
  parallel_for(tasks.size(), settings.jobs, [&](std::size_t ti) {
    const Task& task = tasks[ti];
    const auto [R, r] = pairs[task.pair];
    const Partition& part = partitions[task.pair][task.partition];
    Outcome& out = outcomes[ti];
    SimOptions o = opts;
    o.horizon = part.end();
    const double dz = target(task.z);
    auto violation = [&](double t, double d, double bound, std::string reason) {
      if (out.violations.size() < settings.max_violations_per_run)
        out.violations.push_back({task.z, task.partition, t, d, bound, std::move(reason)});
    };
    TrajectoryRecord rec;
    try {
      rec = simulate_sample_hold(sys, mode, target, k, part, task.z, o);
    } catch (const FeedbackDomainError& e) {
      violation(0.0, dz, beta(dz, 0.0), std::string("feedback failure: ") + e.what());
      return;
    }
    for (std::size_t i = 0; i < rec.size(); ++i) {
      const double d = target(rec.states[i]);
      const double bound = std::max(beta(dz, rec.times[i]), r);
      if (d > bound + settings.tol) violation(rec.times[i], d, bound, "bound exceeded");
    }
    if (rec.status == TrajectoryStatus::BlowUp)
      violation(rec.status_time, target(rec.states.back()), std::numeric_limits<double>::infinity(), "blow-up");
    for (std::size_t n = 0; n + 1 < rec.node_indices.size(); ++n) {
      const double a = target(rec.states[rec.node_indices[n]]);
      const double b = target(rec.states[rec.node_indices[n + 1]]);
      if (a > 0.0) out.worst_ratio = std::max(out.worst_ratio, b / a);
    }
  });

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    auto& pr = report.pairs[tasks[ti].pair];
    pr.worst_node_ratio = std::max(pr.worst_node_ratio, outcomes[ti].worst_ratio);
    for (auto& v : outcomes[ti].violations) pr.violations.push_back(std::move(v));
  }
  return report;
}

}  // namespace uctl
