#pragma once

// Control Lyapunov function certification on control grids, the N(.) lower
// bound on w0 keeping synthesized feedbacks non-impulsive, and feedback
// synthesis on the extended system with projection back to U.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "uctl/core.hpp"
#include "uctl/parallel.hpp"
#include "uctl/sampling.hpp"
#include "uctl/transforms.hpp"

namespace uctl {

/// W with user-supplied limiting-subgradient selections and decrease rate gamma.
struct LyapunovCandidate {
  std::function<double(const State&)> W;
  std::function<std::vector<Eigen::VectorXd>(const State&)> subgradient;
  std::function<double(double)> gamma;
};

struct CandidateReport {
  bool positive_off_target = true;
  bool gamma_increasing = true;
  bool gamma_positive = true;
  [[nodiscard]] bool ok() const { return positive_off_target && gamma_increasing && gamma_positive; }
};

/// Sample-level check of the candidate invariants: W > 0 at samples, gamma > 0 and increasing on the grid.
inline CandidateReport check_candidate(const LyapunovCandidate& cand, std::span<const State> samples,
                                       std::span<const double> gamma_grid) {
  CandidateReport rep;
  for (const auto& x : samples)
    if (!(cand.W(x) > 0.0)) rep.positive_off_target = false;
  double prev = -std::numeric_limits<double>::infinity();
  for (double r : gamma_grid) {
    const double g = cand.gamma(r);
    if (!(g > 0.0)) rep.gamma_positive = false;
    if (!(g > prev)) rep.gamma_increasing = false;
    prev = g;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Control grids
// ---------------------------------------------------------------------------

/// Unit directions inside the cone of `sys`: +-1 for m = 1, evenly spaced angles for
/// m = 2, seeded Gaussian samples plus the coordinate axes for m > 2.
inline std::vector<Control> cone_directions(const ControlPolynomialSystem& sys, std::size_t count = 16,
                                            std::uint64_t seed = 7) {
  const int m = sys.control_dim();
  std::vector<Control> candidates;
  if (m == 1) {
    candidates.push_back(Control::Constant(1, 1.0));
    candidates.push_back(Control::Constant(1, -1.0));
  } else if (m == 2) {
    // Includes the axes whenever count is a multiple of 4.
    for (std::size_t i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
      Control e(2);
      e << std::cos(a), std::sin(a);
      candidates.push_back(e);
    }
  } else {
    for (int i = 0; i < m; ++i) {
      candidates.push_back(Control::Unit(m, i));
      candidates.push_back(-Control::Unit(m, i));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (std::size_t i = 0; i < count; ++i) {
      Control e(m);
      for (int j = 0; j < m; ++j) e[j] = gauss(rng);
      candidates.push_back(e.normalized());
    }
  }
  std::vector<Control> out;
  for (auto& e : candidates)
    if (sys.in_cone(e)) out.push_back(std::move(e));
  return out;
}

/// Discretization of U (radial magnitudes up to r_max) and of the closed simplex (w0 levels).
struct ControlGrid {
  std::vector<Control> directions;
  /// Ascending levels in [0,1] including 0 and 1.
  std::vector<double> w0_levels;
  /// Ascending magnitudes including 0 and r_max.
  std::vector<double> magnitudes;

  /// Simplex mesh with spacing h in w0.
  static ControlGrid extended(const ControlPolynomialSystem& sys, double h = 1e-3, std::size_t direction_count = 16) {
    if (!(h > 0.0 && h <= 1.0)) throw PreconditionError("mesh h must lie in (0,1]");
    ControlGrid g;
    g.dim = sys.control_dim();
    g.directions = cone_directions(sys, direction_count);
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / h - 1e-9));
    for (std::size_t i = 0; i <= steps; ++i)
      g.w0_levels.push_back(i == steps ? 1.0 : static_cast<double>(i) / static_cast<double>(steps));
    return g;
  }

  /// Log-spaced magnitudes from r_min to r_max plus 0.
  static ControlGrid original(const ControlPolynomialSystem& sys, double r_max = 1e6, std::size_t per_decade = 50,
                              double r_min = 1e-4, std::size_t direction_count = 16) {
    if (!(r_max > r_min && r_min > 0.0)) throw PreconditionError("need 0 < r_min < r_max");
    ControlGrid g;
    g.dim = sys.control_dim();
    g.directions = cone_directions(sys, direction_count);
    g.magnitudes.push_back(0.0);
    const double decades = std::log10(r_max / r_min);
    const auto count = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(decades * per_decade)) + 1);
    for (std::size_t i = 0; i < count; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(count - 1);
      g.magnitudes.push_back(i + 1 == count ? r_max : r_min * std::pow(10.0, decades * frac));
    }
    return g;
  }

  /// Single-control grid, e.g. {0} or {u}.
  static ControlGrid original_points(const std::vector<Control>& points) {
    ControlGrid g;
    if (!points.empty()) g.dim = points.front().size();
    for (const auto& u : points) {
      const double mag = u.norm();
      if (mag == 0.0) {
        g.magnitudes.push_back(0.0);
      } else {
        g.directions.push_back(u / mag);
        g.magnitudes.push_back(mag);
      }
    }
    return g;
  }

  template <class Fn>
  void for_each_extended(Fn&& fn) const {
    for (double w0 : w0_levels) {
      if (w0 == 1.0 || directions.empty()) {
        fn(ExtendedControl{1.0, Control::Zero(control_dim())});
        continue;
      }
      for (const auto& e : directions) fn(ExtendedControl{w0, e * (1.0 - w0)});
    }
  }

  template <class Fn>
  void for_each_original(Fn&& fn) const {
    bool zero_done = false;
    for (double r : magnitudes) {
      if (r == 0.0) {
        if (!zero_done) fn(Control(Control::Zero(control_dim())));
        zero_done = true;
        continue;
      }
      for (const auto& e : directions) fn(Control(e * r));
    }
  }

  [[nodiscard]] Eigen::Index control_dim() const { return dim; }
  Eigen::Index dim = 1;
};

/// min over the simplex grid of <p, F(x, w0, w)>.
inline double hamiltonian_extended(const ControlPolynomialSystem& sys, const State& x, const Eigen::VectorXd& p,
                                   const ControlGrid& grid) {
  if (grid.w0_levels.empty()) throw EmptyGridError("extended control grid has no points");
  double best = std::numeric_limits<double>::infinity();
  grid.for_each_extended([&](const ExtendedControl& wc) { best = std::min(best, p.dot(extended_dynamics(sys, x, wc))); });
  return best;
}

/// min over the truncated U grid of <p, f_bar(x, u)>.
inline double hamiltonian_original(const ControlPolynomialSystem& sys, const State& x, const Eigen::VectorXd& p,
                                   const ControlGrid& grid) {
  if (grid.magnitudes.empty()) throw EmptyGridError("original control grid has no points");
  double best = std::numeric_limits<double>::infinity();
  grid.for_each_original([&](const Control& u) { best = std::min(best, p.dot(rescaled_dynamics(sys, x, u))); });
  return best;
}

// ---------------------------------------------------------------------------
// Decrease condition
// ---------------------------------------------------------------------------

/// Points x with d(x) in [r_min, r_max]: radial_count log-spaced radii along every
/// direction (+-1 in one dimension, evenly spread otherwise).
inline std::vector<State> annulus_samples(const Target& target, int n, double r_min, double r_max,
                                          std::size_t radial_count, std::size_t direction_count = 8,
                                          std::uint64_t seed = 11) {
  if (!(r_min > 0.0) || r_max < r_min) throw PreconditionError("annulus needs 0 < r_min <= r_max");
  std::vector<State> dirs;
  if (n == 1) {
    dirs = {State::Constant(1, 1.0), State::Constant(1, -1.0)};
  } else if (n == 2) {
    for (std::size_t i = 0; i < direction_count; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(direction_count);
      State e(2);
      e << std::cos(a), std::sin(a);
      dirs.push_back(e);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (std::size_t i = 0; i < direction_count; ++i) {
      State e(n);
      for (int j = 0; j < n; ++j) e[j] = gauss(rng);
      dirs.push_back(e.normalized());
    }
  }
  std::vector<State> out;
  for (std::size_t i = 0; i < radial_count; ++i) {
    double r = r_min;
    if (radial_count > 1)
      r = r_min * std::pow(r_max / r_min, static_cast<double>(i) / static_cast<double>(radial_count - 1));
    for (const auto& e : dirs) out.push_back(e * (target.ball_radius + r));
  }
  return out;
}

struct DecreaseViolation {
  State x;
  Eigen::VectorXd p;
  double H;
  double gamma_W;
};

struct DecreaseReport {
  std::size_t samples = 0;
  /// max over samples of H(x,p) + gamma(W(x)); negative when certified.
  double worst_margin = -std::numeric_limits<double>::infinity();
  std::vector<DecreaseViolation> violations;
  [[nodiscard]] bool certified() const { return violations.empty(); }
};

/// Relative slack below which a margin counts as zero (rounding level).
inline constexpr double kDecreaseSlack = 1e-12;

/// Flags every (x, p) with H_{F,U}(x,p) >= -gamma(W(x)) on the grid.
inline DecreaseReport decrease_check(const ControlPolynomialSystem& sys, const LyapunovCandidate& cand,
                                     std::span<const State> region, const ControlGrid& grid, unsigned jobs = 1) {
  struct Local {
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<DecreaseViolation> violations;
  };
  std::vector<Local> per_sample(region.size());
  parallel_for(region.size(), jobs, [&](std::size_t i) {
    const State& x = region[i];
    const double gw = cand.gamma(cand.W(x));
    for (const auto& p : cand.subgradient(x)) {
      const double h = hamiltonian_extended(sys, x, p, grid);
      const double margin = h + gw;
      per_sample[i].worst = std::max(per_sample[i].worst, margin);
      if (margin >= -kDecreaseSlack * (1.0 + std::abs(gw))) per_sample[i].violations.push_back({x, p, h, gw});
    }
  });
  DecreaseReport rep;
  rep.samples = region.size();
  for (auto& l : per_sample) {
    rep.worst_margin = std::max(rep.worst_margin, l.worst);
    for (auto& v : l.violations) rep.violations.push_back(std::move(v));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// N(.) estimation
// ---------------------------------------------------------------------------

/// Samples of the level set {W = level}.
using LevelSampler = std::function<std::vector<State>(double level)>;

/// Level set of W along rays from the target, assuming W increases along each ray.
inline LevelSampler radial_level_sampler(std::function<double(const State&)> W, const Target& target, int n,
                                         std::size_t direction_count = 8) {
  auto dirs = annulus_samples(Target::origin(), n, 1.0, 1.0, 1, direction_count);
  const double offset = target.ball_radius;
  return [W = std::move(W), dirs = std::move(dirs), offset](double level) {
    std::vector<State> out;
    for (const auto& e : dirs) {
      double lo = 0.0, hi = 1.0;
      int guard = 0;
      while (W(e * (offset + hi)) < level && guard++ < 200) hi *= 2.0;
      if (guard >= 200) continue;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (W(e * (offset + mid)) < level ? lo : hi) = mid;
      }
      out.push_back(e * (offset + hi));
    }
    return out;
  };
}

/// sup{w0 : <p, F(x, w0, w)> < -gamma(W(x))} over the grid, refined by bisection
/// between the last feasible and first infeasible level along each direction.
/// Returns a negative value when nothing on the grid is feasible.
inline double sup_feasible_w0(const ControlPolynomialSystem& sys, const LyapunovCandidate& cand, const State& x,
                              const Eigen::VectorXd& p, const ControlGrid& grid) {
  const double threshold = -cand.gamma(cand.W(x));
  const Eigen::Index m = sys.control_dim();
  auto value = [&](double w0, const Control& e) {
    if (w0 >= 1.0) return p.dot(extended_dynamics(sys, x, ExtendedControl{1.0, Control::Zero(m)}));
    return p.dot(extended_dynamics(sys, x, ExtendedControl{w0, e * (1.0 - w0)}));
  };
  double best = -1.0;
  const auto& lv = grid.w0_levels;
  for (const auto& e : grid.directions) {
    for (std::size_t j = lv.size(); j-- > 0;) {
      if (value(lv[j], e) < threshold) {
        double lo = lv[j];
        if (j + 1 < lv.size()) {
          double hi = lv[j + 1];
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (value(mid, e) < threshold ? lo : hi) = mid;
          }
        }
        best = std::max(best, lo);
        break;
      }
    }
  }
  if (grid.directions.empty() && value(1.0, Control::Zero(m)) < threshold) best = 1.0;
  return best;
}

struct NEstimate {
  double r = 0.0;
  /// 0.9 * inf of w0(x,p) over the level set {W = r} only.
  double raw = 0.0;
  /// 0.9 * inf over the band W in [min(r,1), max(r,1)], clamped monotone in n_curve.
  double value = 0.0;
};

inline constexpr double kNSafety = 0.9;

/// Positive lower approximation of N_hat(r). Throws CertificationFailure if some sampled (x,p)
/// admits no decrease-feasible w0.
inline NEstimate compute_N(const ControlPolynomialSystem& sys, const LyapunovCandidate& cand, double r,
                           const ControlGrid& grid, const LevelSampler& level_mesh, std::size_t band_levels = 16) {
  if (!(r > 0.0)) throw PreconditionError("compute_N needs r > 0");
  auto inf_on_level = [&](double level) {
    double inf = std::numeric_limits<double>::infinity();
    for (const auto& x : level_mesh(level)) {
      for (const auto& p : cand.subgradient(x)) {
        const double w0 = sup_feasible_w0(sys, cand, x, p, grid);
        if (!(w0 > 0.0))
          throw CertificationFailure("no decrease-feasible w0 > 0 at level " + std::to_string(level));
        inf = std::min(inf, w0);
      }
    }
    return inf;
  };
  NEstimate est;
  est.r = r;
  const double raw = inf_on_level(r);
  const double lo = std::min(r, 1.0), hi = std::max(r, 1.0);
  double band = raw;
  const std::size_t count = lo == hi ? 1 : std::max<std::size_t>(band_levels, 2);
  for (std::size_t i = 0; i < count; ++i) {
    const double level = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
    band = std::min(band, inf_on_level(level));
  }
  if (!std::isfinite(raw) || !std::isfinite(band)) throw CertificationFailure("empty level mesh");
  est.raw = kNSafety * raw;
  est.value = kNSafety * band;
  return est;
}

/// compute_N over ascending radii, then clamped: increasing on (0,1], decreasing on [1,inf).
inline std::vector<NEstimate> n_curve(const ControlPolynomialSystem& sys, const LyapunovCandidate& cand,
                                      std::vector<double> radii, const ControlGrid& grid,
                                      const LevelSampler& level_mesh, unsigned jobs = 1) {
  std::sort(radii.begin(), radii.end());
  std::vector<NEstimate> out(radii.size());
  parallel_for(radii.size(), jobs, [&](std::size_t i) { out[i] = compute_N(sys, cand, radii[i], grid, level_mesh); });
  // running minimum moving away from r = 1 on both sides
  double run = std::numeric_limits<double>::infinity();
  for (std::size_t i = out.size(); i-- > 0;) {
    if (out[i].r > 1.0) continue;
    run = std::min(run, out[i].value);
    out[i].value = run;
  }
  run = std::numeric_limits<double>::infinity();
  for (auto& e : out) {
    if (e.r < 1.0) continue;
    run = std::min(run, e.value);
    e.value = run;
  }
  return out;
}

/// Piecewise-linear interpolation of a clamped N curve, constant beyond its ends.
inline std::function<double(double)> interpolate_n(const std::vector<NEstimate>& curve) {
  if (curve.empty()) throw EmptyGridError("empty N curve");
  return [curve](double r) {
    if (r <= curve.front().r) return curve.front().value;
    if (r >= curve.back().r) return curve.back().value;
    auto it = std::upper_bound(curve.begin(), curve.end(), r, [](double v, const NEstimate& e) { return v < e.r; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double lam = (r - a.r) / (b.r - a.r);
    return (1.0 - lam) * a.value + lam * b.value;
  };
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

struct SynthesisResult {
  ExtendedControl control;
  double value = 0.0;    // <p(x), F(x, K_hat(x))>
  double gamma_W = 0.0;  // gamma(W(x))
  [[nodiscard]] double margin() const { return value + gamma_W; }
  [[nodiscard]] bool decreasing() const { return margin() < -kDecreaseSlack * (1.0 + std::abs(gamma_W)); }
};

/// Grid argmin of <p(x), F(x,w0,w)> over {w0 >= rho}, the level rho itself included
/// along every direction. Uses the first subgradient selection. Never throws on lack of decrease.
inline SynthesisResult restricted_argmin(const ControlPolynomialSystem& sys, const LyapunovCandidate& cand,
                                         double rho, const State& x, const ControlGrid& grid) {
  if (!(rho > 0.0 && rho <= 1.0)) throw PreconditionError("restriction level must lie in (0,1]");
  const auto ps = cand.subgradient(x);
  if (ps.empty()) throw PreconditionError("candidate supplied no subgradient");
  const Eigen::VectorXd& p = ps.front();
  const Eigen::Index m = sys.control_dim();
  SynthesisResult best{ExtendedControl{1.0, Control::Zero(m)}, std::numeric_limits<double>::infinity(),
                       cand.gamma(cand.W(x))};
  auto consider = [&](const ExtendedControl& wc) {
    const double v = p.dot(extended_dynamics(sys, x, wc));
    if (v < best.value) {
      best.value = v;
      best.control = wc;
    }
  };
  consider(ExtendedControl{1.0, Control::Zero(m)});
  for (const auto& e : grid.directions) {
    if (rho < 1.0) consider(ExtendedControl{rho, e * (1.0 - rho)});
    for (double w0 : grid.w0_levels)
      if (w0 > rho && w0 < 1.0) consider(ExtendedControl{w0, e * (1.0 - w0)});
  }
  return best;
}

/// K_hat(x) in argmin over U_{N(W(x))}; throws CertificationFailure unless it decreases W at rate gamma.
inline SynthesisResult synthesize_feedback_extended(const ControlPolynomialSystem& sys, const LyapunovCandidate& cand,
                                                    const std::function<double(double)>& n_func, const State& x,
                                                    const ControlGrid& grid) {
  const double rho = n_func(cand.W(x));
  auto res = restricted_argmin(sys, cand, rho, x, grid);
  if (!res.decreasing())
    throw CertificationFailure("no grid control in U_rho achieves decrease (margin " + std::to_string(res.margin()) + ")");
  return res;
}

/// K = (w/|w|) nu^{-1}(|w|/w0); defined for w0 > 0 and w != 0.
inline Control project_feedback(const GrowthRate& g, const ExtendedControl& wc) {
  if (wc.w0 <= 0.0) throw ProjectionDomainError("w0 = 0 cannot be projected");
  if (wc.w.norm() == 0.0) throw ProjectionDomainError("w = 0 is drift-only; use u = 0");
  return extended_to_control(g, wc);
}

/// K_hat(x) = control_to_extended(K(x)).
inline Feedback feedback_to_extended(const GrowthRate& g, const Feedback& k) {
  if (k.kind() != FeedbackKind::Original) throw PreconditionError("feedback is already extended");
  return Feedback::extended([g, k](const State& x) { return control_to_extended(g, k.original_value(x)); });
}

/// Original feedback x -> project(K_hat(x)), with u = 0 where K_hat is drift-only.
inline Feedback project_feedback(const GrowthRate& g, const Feedback& k_hat) {
  if (k_hat.kind() != FeedbackKind::Extended) throw PreconditionError("feedback is not extended");
  return Feedback::original([g, k_hat](const State& x) {
    ExtendedControl wc = k_hat.extended_value(x);
    if (wc.w.norm() == 0.0) return Control(Control::Zero(wc.w.size()));
    return project_feedback(g, wc);
  });
}

}  // namespace uctl
