#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "uctl/example.hpp"
#include "uctl/sampling.hpp"
#include "uctl/transforms.hpp"

#include <cmath>
#include <random>

using namespace uctl;
using Catch::Approx;

namespace {

// d = 2 scalar system with a nonnegative cone: x' = -x + x|u| - x^3|u|^2.
ControlPolynomialSystem quadratic_scalar() {
  std::vector<PolynomialTerm> terms;
  terms.push_back({0, [](const State& x, const Control&) { return State(-x); }});
  terms.push_back({1, [](const State& x, const Control& e) { return State(x * e[0]); }});
  terms.push_back({2, [](const State& x, const Control& e) { return State(-x * x[0] * x[0] * e[0] * e[0]); }});
  return ControlPolynomialSystem(1, 1, 2, std::move(terms), cones::nonnegative(), "quadratic-scalar");
}

SimOptions tight(double horizon) {
  SimOptions o;
  o.horizon = horizon;
  o.target_tol = 1e-14;
  o.integrator_abs_tol = 1e-13;
  o.integrator_rel_tol = 1e-12;
  return o;
}

}  // namespace

TEST_CASE("rescaled dynamics divides by 1 + nu", "[transforms]") {
  const auto sys = example::cubic_damped();
  CHECK(rescaled_dynamics(sys, example::scalar(2.0), Control::Constant(1, 1.0))[0] == -3.0);
  CHECK(rescaled_dynamics(sys, example::scalar(2.0), Control::Constant(1, 0.0))[0] == 2.0);
}

TEST_CASE("extended dynamics at the impulsive point keeps the top-degree term", "[transforms]") {
  const auto sys = example::cubic_damped();
  const auto wc = ExtendedControl::make(0.0, Control::Constant(1, 1.0));
  CHECK(wc.impulsive());
  CHECK(extended_dynamics(sys, example::scalar(2.0), wc)[0] == -8.0);
  const auto drift = ExtendedControl::make(1.0, Control::Zero(1));
  CHECK(extended_dynamics(sys, example::scalar(2.0), drift)[0] == 2.0);

  const auto q = quadratic_scalar();
  // only the |w|^2 term survives at w0 = 0
  CHECK(extended_dynamics(q, example::scalar(2.0), wc)[0] == -8.0);
  // w0 = |w| = 1/2: weights 1/2, 1/2, 1/2
  const auto mid = ExtendedControl::make(0.5, Control::Constant(1, 0.5));
  CHECK(extended_dynamics(q, example::scalar(2.0), mid)[0] == Approx(0.5 * (-2.0 + 2.0 - 8.0)));
}

TEST_CASE("extended controls validate the simplex and the cone", "[transforms]") {
  const auto sys = example::cubic_damped();
  CHECK_THROWS_AS(ExtendedControl::make(0.5, Control::Constant(1, 0.6)), InvariantError);
  CHECK_THROWS_AS(ExtendedControl::make(-0.1, Control::Constant(1, 1.1)), InvariantError);
  CHECK_THROWS_AS(ExtendedControl::make(NAN, Control::Constant(1, 1.0)), InvariantError);
  const ExtendedControl outside{0.5, Control::Constant(1, -0.5)};
  CHECK_THROWS_AS(extended_dynamics(sys, example::scalar(1.0), outside), ControlSetViolation);
  CHECK_FALSE(RestrictedControlSet(0.3).contains(ExtendedControl::make(0.2, Control::Constant(1, 0.8))));
  CHECK(RestrictedControlSet(0.3).contains(ExtendedControl::make(0.3, Control::Constant(1, 0.7))));
  CHECK_THROWS_AS(RestrictedControlSet(0.0), InvariantError);
  const auto packed = ExtendedControl::make(0.25, Control::Constant(1, 0.75)).pack();
  CHECK(ExtendedControl::unpack(packed).w0 == 0.25);
}

TEST_CASE("control maps", "[transforms]") {
  const auto g = GrowthRate::power(1);
  const auto wc = control_to_extended(g, Control::Constant(1, 3.0));
  CHECK(wc.w0 == Approx(0.25));
  CHECK(wc.w[0] == Approx(0.75));
  CHECK(extended_to_control(g, wc)[0] == Approx(3.0));
  const auto zero = control_to_extended(g, Control::Zero(1));
  CHECK(zero.w0 == 1.0);
  CHECK(zero.w.norm() == 0.0);
  CHECK_THROWS_AS(extended_to_control(g, ExtendedControl::make(0.0, Control::Constant(1, 1.0))), ImpulsivePointError);
}

TEST_CASE("control maps are mutually inverse and intertwine the dynamics", "[transforms][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> log_mag(-4.0, 4.0);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const auto cubic = example::cubic_damped();
  const auto q = quadratic_scalar();
  for (int trial = 0; trial < 1000; ++trial) {
    const double mag = std::pow(10.0, log_mag(rng));
    const Control u = Control::Constant(1, mag);
    const State x = example::scalar(unif(rng));
    for (const auto* sys : {&cubic, &q}) {
      const auto wc = control_to_extended(sys->growth(), u);
      CHECK_NOTHROW(wc.validate());
      CHECK(extended_to_control(sys->growth(), wc)[0] == Approx(mag).epsilon(1e-12));
      const double lhs = extended_dynamics(*sys, x, wc)[0];
      const double rhs = rescaled_dynamics(*sys, x, u)[0];
      CHECK(lhs == Approx(rhs).epsilon(1e-12).margin(1e-14));
    }
    // and the other direction on the open simplex
    const double w0 = std::uniform_real_distribution<double>(1e-6, 1.0)(rng);
    const auto wc = ExtendedControl::make(w0, Control::Constant(1, 1.0 - w0));
    const auto back = control_to_extended(q.growth(), extended_to_control(q.growth(), wc));
    CHECK(back.w0 == Approx(w0).epsilon(1e-10));
  }
}

TEST_CASE("jump along the impulsive direction matches the closed form", "[transforms][sampling]") {
  const auto sys = example::cubic_damped();
  const auto signal = PiecewiseConstantSignal::constant(ExtendedControl::make(0.0, Control::Constant(1, 1.0)).pack());
  const auto rec = simulate_open_loop(sys, DynamicsMode::Extended, Target::origin(), signal, example::scalar(1.0), tight(1.0));
  CHECK(rec.states.back()[0] == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-10));
  CHECK(example::closed_form_jump(1.0, 1.0) == Approx(0.5773502691896258).epsilon(1e-15));
  // no original time passes during a jump
  const auto t = original_time_of_extended(rec);
  CHECK(t.back() == 0.0);
}

TEST_CASE("forward time change maps original runs onto rescaled runs", "[transforms][property]") {
  const auto sys = example::cubic_damped();
  const std::vector<double> levels{0.5, 3.0, 0.0, 10.0, 1.5};
  PiecewiseConstantSignal signal;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    signal.breakpoints.push_back(0.2 * static_cast<double>(k));
    signal.values.push_back(Control::Constant(1, levels[k]));
  }
  const auto orig = simulate_open_loop(sys, DynamicsMode::Original, Target::origin(), signal, example::scalar(0.8), tight(1.0));
  REQUIRE(orig.status == TrajectoryStatus::HorizonEnd);
  const auto fwd = time_change_forward(orig, sys.growth());

  // rescaled run with the same values on the stretched breakpoints
  PiecewiseConstantSignal stretched = signal;
  for (std::size_t k = 0; k < levels.size(); ++k) stretched.breakpoints[k] = fwd.times[orig.node_indices[k]];
  const auto res = simulate_open_loop(sys, DynamicsMode::Rescaled, Target::origin(), stretched, example::scalar(0.8),
                                      tight(fwd.times.back()));
  REQUIRE(res.states.size() == fwd.states.size());
  for (std::size_t k = 0; k < res.states.size(); ++k) {
    CHECK(res.times[k] == Approx(fwd.times[k]).epsilon(1e-12));
    CHECK(res.states[k][0] == Approx(fwd.states[k][0]).epsilon(1e-8));
  }
  // s(t) = t + int |u|: 0.2 * (1.5 + 4 + 1 + 11 + 2.5)
  CHECK(fwd.times.back() == Approx(0.2 * 20.0));

  const auto back = time_change_backward(fwd, sys.growth());
  for (std::size_t k = 0; k < back.times.size(); ++k) CHECK(back.times[k] == Approx(orig.times[k]).margin(1e-14));
}

TEST_CASE("time change rejects extended records", "[transforms]") {
  TrajectoryRecord rec;
  rec.control_kind = ControlKind::Extended;
  CHECK_THROWS_AS(time_change_forward(rec, GrowthRate::power(1)), PreconditionError);
  rec.control_kind = ControlKind::Original;
  CHECK_THROWS_AS(original_time_of_extended(rec), PreconditionError);
}

TEST_CASE("extended run with w0 > 0 agrees with an independent RK4", "[transforms][property]") {
  const auto q = quadratic_scalar();
  const auto wc = ExtendedControl::make(0.3, Control::Constant(1, 0.7));
  const auto rec = simulate_open_loop(q, DynamicsMode::Extended, Target::origin(),
                                      PiecewiseConstantSignal::constant(wc.pack()), example::scalar(1.3), tight(2.0));
  // weights w0^{1-k/2} |w|^{k/2} for k = 0, 1, 2
  const double w_mid = std::sqrt(0.3 * 0.7);
  const auto f = [&](double x) { return 0.3 * (-x) + w_mid * x - 0.7 * x * x * x; };
  const double ref = oracle::rk4(f, 1.3, 2.0, 20000);
  CHECK(rec.states.back()[0] == Approx(ref).epsilon(1e-9));
}
