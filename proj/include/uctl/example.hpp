#pragma once

// The cubic-damped system x' = x - x^3 u, u >= 0, with target {0}: bounded
// controls cannot stabilize it, unbounded ones can. Fixtures and closed-form
// solutions used as ground truth across the test suites.

#include <cmath>
#include <numbers>

#include "uctl/clf.hpp"
#include "uctl/core.hpp"
#include "uctl/sampling.hpp"
#include "uctl/transforms.hpp"

namespace uctl::example {

inline constexpr double kGoldenRatio = std::numbers::phi;

/// Largest sampling time for which the node contraction bound holds: ln(phi).
inline double max_sampling_time() { return std::log(kGoldenRatio); }

/// f(x,u) = x - x^3 u with f_0(x) = x, f_1(x,e) = -x^3 e, U = [0, inf), d = 1.
inline ControlPolynomialSystem cubic_damped() {
  std::vector<PolynomialTerm> terms;
  terms.push_back({0, [](const State& x, const Control&) { return State(x); }});
  terms.push_back({1, [](const State& x, const Control& e) {
                     State v(1);
                     v[0] = -x[0] * x[0] * x[0] * e[0];
                     return v;
                   }});
  return ControlPolynomialSystem(1, 1, 1, std::move(terms), cones::nonnegative(), "cubic-damped");
}

inline State scalar(double v) { return State::Constant(1, v); }

inline double fixture_gamma(double r) { return r * r * r / (2.0 * (2.0 + r * r)); }
inline double fixture_N(double r) { return r * r / (2.0 + r * r); }

inline ExtendedControl k_hat(double x) {
  const double x2 = x * x;
  return ExtendedControl{x2 / (2.0 + x2), Control::Constant(1, 2.0 / (2.0 + x2))};
}

inline double k_original(double x) { return 2.0 / (x * x); }

/// W(x) = |x|, p(x) = sign(x).
inline LyapunovCandidate abs_candidate(std::function<double(double)> gamma = fixture_gamma) {
  LyapunovCandidate c;
  c.W = [](const State& x) { return std::abs(x[0]); };
  c.subgradient = [](const State& x) {
    return std::vector<Eigen::VectorXd>{Eigen::VectorXd::Constant(1, x[0] > 0.0 ? 1.0 : -1.0)};
  };
  c.gamma = std::move(gamma);
  return c;
}

inline KLFunction fixture_beta() {
  return KLFunction([](double R, double t) { return R * std::exp(-t / 2.0); }, false);
}

struct Fixture {
  ControlPolynomialSystem system = cubic_damped();
  Target target = Target::origin();
  LyapunovCandidate clf = abs_candidate();
  std::function<double(double)> N = fixture_N;
  Feedback K_hat = Feedback::extended([](const State& x) { return k_hat(x[0]); });
  Feedback K = Feedback::original([](const State& x) {
    if (x[0] == 0.0) throw FeedbackDomainError("K undefined at the target");
    return Control(Control::Constant(1, k_original(x[0])));
  });
  KLFunction beta = fixture_beta();
  double delta_max = max_sampling_time();
};

/// Solution of x' = x - M x^3 from z.
inline double closed_form_constant_control(double z, double M, double t) {
  if (z == 0.0) throw DomainError("closed form needs z != 0");
  const double et = std::exp(t);
  return z * et / std::sqrt(z * z * M * (et * et - 1.0) + 1.0);
}

/// d(y(s)) under (w0, w) = (0, 1): 1/sqrt(2s + 1/z^2).
inline double closed_form_jump(double z, double s) {
  if (z == 0.0) throw DomainError("closed form needs z != 0");
  if (s < 0.0) throw DomainError("closed form needs s >= 0");
  return 1.0 / std::sqrt(2.0 * s + 1.0 / (z * z));
}

struct ContractionRatio {
  double value;
  /// False when delta > ln(phi): the e^{-delta/2} bound is then no longer implied.
  bool bound_implied;
};

/// |x(t_{n+1})| / |x(t_n)| = e^delta / sqrt(2 e^{2 delta} - 1) under K(x) = 2/x^2.
inline ContractionRatio node_contraction_ratio(double delta) {
  if (!(delta > 0.0)) throw DomainError("delta must be > 0");
  const double e = std::exp(delta);
  return {e / std::sqrt(2.0 * e * e - 1.0), delta <= max_sampling_time() * (1.0 + 1e-15)};
}

}  // namespace uctl::example
