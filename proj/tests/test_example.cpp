#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "uctl/example.hpp"

#include <cmath>

using namespace uctl;
using Catch::Approx;

TEST_CASE("sampling-time bound is ln(phi)", "[example]") {
  CHECK(example::max_sampling_time() == Approx(0.48121182505960347).epsilon(1e-15));
  CHECK(2.0 * example::max_sampling_time() == Approx(0.9624236501192069).epsilon(1e-15));
}

TEST_CASE("node contraction ratio", "[example]") {
  const auto at_bound = example::node_contraction_ratio(example::max_sampling_time());
  CHECK(at_bound.value == Approx(0.7861513777574233).epsilon(1e-14));
  CHECK(at_bound.value == Approx(1.0 / std::sqrt(example::kGoldenRatio)).epsilon(1e-14));
  CHECK(at_bound.bound_implied);
  // at the bound the ratio equals e^{-delta/2}
  CHECK(at_bound.value == Approx(std::exp(-example::max_sampling_time() / 2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(example::node_contraction_ratio(0.0), DomainError);
}

TEST_CASE("ratio stays below e^{-delta/2} exactly up to ln(phi)", "[example][property]") {
  const double cap = example::max_sampling_time();
  for (int i = 1; i <= 200; ++i) {
    const double delta = 1.2 * cap * i / 200.0;
    const auto r = example::node_contraction_ratio(delta);
    const double envelope = std::exp(-delta / 2.0);
    if (delta < cap * (1.0 - 1e-9)) CHECK(r.value < envelope);
    if (delta > cap * (1.0 + 1e-9)) {
      CHECK(r.value > envelope);
      CHECK_FALSE(r.bound_implied);
    }
  }
}

TEST_CASE("closed-form constant-control solution", "[example]") {
  CHECK(example::closed_form_constant_control(1.0, 2.0, 1.0) == Approx(0.7323178556800843).epsilon(1e-14));
  CHECK(example::closed_form_constant_control(1.0, 0.0, 1.0) == Approx(std::exp(1.0)).epsilon(1e-14));
  CHECK(example::closed_form_constant_control(-0.5, 3.0, 0.0) == -0.5);
  CHECK_THROWS_AS(example::closed_form_constant_control(0.0, 1.0, 1.0), DomainError);
  for (double z : {0.3, 1.5}) {
    for (double t : {0.2, 1.0, 3.0}) {
      const double ref = oracle::rk4([](double x) { return x - 2.0 * x * x * x; }, z, t, 20000);
      CHECK(example::closed_form_constant_control(z, 2.0, t) == Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("bounded controls stall at 1/sqrt(M)", "[example]") {
  for (double M : {1.0, 4.0, 25.0}) {
    CHECK(example::closed_form_constant_control(3.0, M, 40.0) == Approx(1.0 / std::sqrt(M)).epsilon(1e-12));
    CHECK(example::closed_form_constant_control(0.01, M, 40.0) == Approx(1.0 / std::sqrt(M)).epsilon(1e-12));
  }
}

TEST_CASE("closed-form jump", "[example]") {
  CHECK(example::closed_form_jump(1.0, 1.0) == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(example::closed_form_jump(-2.0, 0.0) == 2.0);
  CHECK_THROWS_AS(example::closed_form_jump(1.0, -1.0), DomainError);
  const double ref = oracle::rk4([](double y) { return -y * y * y; }, 2.0, 0.7, 20000);
  CHECK(example::closed_form_jump(2.0, 0.7) == Approx(ref).epsilon(1e-10));
}

TEST_CASE("fixture feedback, N and gamma", "[example]") {
  example::Fixture fx;
  for (double x : {0.1, 1.0, 3.0, -2.0}) {
    const auto wc = example::k_hat(x);
    CHECK_NOTHROW(wc.validate());
    CHECK(wc.w0 == Approx(example::fixture_N(std::abs(x))));
    CHECK(extended_to_control(fx.system.growth(), wc)[0] == Approx(example::k_original(x)).epsilon(1e-13));
    CHECK(control_to_extended(fx.system.growth(), Control::Constant(1, example::k_original(x))).w0 ==
          Approx(wc.w0).epsilon(1e-13));
    // <sign(x), F(x, K_hat(x))> = -|x|^3 / (2 + x^2) = -2 gamma(|x|)
    const double flow = extended_dynamics(fx.system, example::scalar(x), wc)[0] * (x > 0 ? 1.0 : -1.0);
    CHECK(flow == Approx(-2.0 * example::fixture_gamma(std::abs(x))).epsilon(1e-13));
  }
  CHECK(example::fixture_N(1.0) == Approx(1.0 / 3.0));
  CHECK(example::fixture_gamma(1.0) == Approx(1.0 / 6.0));
  CHECK(fx.delta_max == example::max_sampling_time());
  CHECK(fx.system.name() == "cubic-damped");
  CHECK_FALSE(fx.beta.strict_at_zero());
}

TEST_CASE("N is increasing below one and bounded by one", "[example][property]") {
  double prev = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double r = 0.01 * i;
    const double n = example::fixture_N(r);
    CHECK(n > prev);
    CHECK(n < 1.0);
    prev = n;
  }
}
