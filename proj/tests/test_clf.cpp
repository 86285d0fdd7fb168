#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "uctl/clf.hpp"
#include "uctl/example.hpp"

#include <cmath>
#include <random>

using namespace uctl;
using Catch::Approx;

namespace {

/// w0 sup for the cubic-damped system with W = |x| and the fixture gamma.
double exact_w0_sup(double r) { return r * r * (3.0 + 2.0 * r * r) / (2.0 * (2.0 + r * r) * (1.0 + r * r)); }

std::vector<State> level_points(double r) { return {example::scalar(r), example::scalar(-r)}; }

}  // namespace

TEST_CASE("candidate invariants", "[clf]") {
  const auto cand = example::abs_candidate();
  const auto samples = annulus_samples(Target::origin(), 1, 0.01, 10.0, 20);
  std::vector<double> grid;
  for (int i = 1; i <= 50; ++i) grid.push_back(0.1 * i);
  CHECK(check_candidate(cand, samples, grid).ok());
  const auto bad = example::abs_candidate([](double r) { return -r; });
  CHECK_FALSE(check_candidate(bad, samples, grid).gamma_positive);
  const auto flat = example::abs_candidate([](double) { return 1.0; });
  CHECK_FALSE(check_candidate(flat, samples, grid).gamma_increasing);
}

TEST_CASE("cone directions and grids", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto dirs = cone_directions(sys);
  REQUIRE(dirs.size() == 1);
  CHECK(dirs[0][0] == 1.0);
  const auto g = ControlGrid::extended(sys, 0.25);
  CHECK(g.w0_levels == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  const auto o = ControlGrid::original(sys, 1e3, 10, 1e-2);
  CHECK(o.magnitudes.front() == 0.0);
  CHECK(o.magnitudes.back() == 1e3);
  CHECK_THROWS_AS(ControlGrid::extended(sys, 0.0), PreconditionError);
  ControlGrid empty;
  CHECK_THROWS_AS(hamiltonian_extended(sys, example::scalar(1.0), Eigen::VectorXd::Ones(1), empty), EmptyGridError);
  CHECK_THROWS_AS(hamiltonian_original(sys, example::scalar(1.0), Eigen::VectorXd::Ones(1), empty), EmptyGridError);
}

TEST_CASE("extended Hamiltonian of the cubic-damped system is -|x|^3", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto grid = ControlGrid::extended(sys, 1e-3);
  for (double x : {-3.0, -0.5, 0.2, 1.0, 2.5}) {
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, x > 0 ? 1.0 : -1.0);
    CHECK(hamiltonian_extended(sys, example::scalar(x), p, grid) == Approx(-std::abs(x * x * x)).epsilon(1e-14));
  }
}

TEST_CASE("extended Hamiltonian agrees with a brute-force simplex minimum", "[clf][property]") {
  const auto sys = example::cubic_damped();
  const auto grid = ControlGrid::extended(sys, 1e-3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = unif(rng);
    const double p = unif(rng);
    const double ref = oracle::simplex_min_1d(
        [&](double w0, double w) { return p * (w0 * x - x * x * x * w); }, 1001);
    CHECK(hamiltonian_extended(sys, example::scalar(x), Eigen::VectorXd::Constant(1, p), grid) ==
          Approx(ref).epsilon(1e-12).margin(1e-14));
  }
}

TEST_CASE("truncated original Hamiltonian converges to the extended one", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto ext = ControlGrid::extended(sys, 1e-3);
  const Eigen::VectorXd p = Eigen::VectorXd::Ones(1);
  for (double r_max : {1e2, 1e4, 1e6}) {
    const auto grid = ControlGrid::original(sys, r_max);
    const double gap = hamiltonian_original(sys, example::scalar(1.0), p, grid) -
                       hamiltonian_extended(sys, example::scalar(1.0), p, ext);
    CHECK(gap == Approx(2.0 / (1.0 + r_max)).epsilon(1e-9));
  }
}

TEST_CASE("decrease check certifies the fixture gamma", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto region = annulus_samples(Target::origin(), 1, 0.05, 20.0, 60);
  const auto grid = ControlGrid::extended(sys, 1e-3);
  const auto rep = decrease_check(sys, example::abs_candidate(), region, grid);
  CHECK(rep.certified());
  CHECK(rep.samples == 120);
  CHECK(rep.worst_margin < 0.0);
  // worst margin is -gamma_gap at the smallest radius: -r^3 + r^3/(2(2+r^2))
  const double r = 0.05;
  CHECK(rep.worst_margin == Approx(-r * r * r + example::fixture_gamma(r)).epsilon(1e-9));
}

TEST_CASE("decrease check flags gamma(r) = r^3 everywhere", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto region = annulus_samples(Target::origin(), 1, 0.05, 20.0, 30);
  const auto rep = decrease_check(sys, example::abs_candidate([](double r) { return r * r * r; }), region,
                                  ControlGrid::extended(sys, 1e-2));
  CHECK_FALSE(rep.certified());
  CHECK(rep.violations.size() == region.size());
  for (const auto& v : rep.violations) CHECK(v.H + v.gamma_W == Approx(0.0).margin(1e-9 * (1.0 + v.gamma_W)));
}

TEST_CASE("decrease check is independent of the job count", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto region = annulus_samples(Target::origin(), 1, 0.1, 5.0, 40);
  const auto grid = ControlGrid::extended(sys, 1e-2);
  const auto cand = example::abs_candidate([](double r) { return 0.99 * r * r * r; });
  const auto a = decrease_check(sys, cand, region, grid, 1);
  const auto b = decrease_check(sys, cand, region, grid, 4);
  CHECK(a.worst_margin == b.worst_margin);
  CHECK(a.violations.size() == b.violations.size());
}

TEST_CASE("sup of feasible w0 matches the closed form", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto cand = example::abs_candidate();
  const auto grid = ControlGrid::extended(sys, 1e-3);
  for (double x : {0.1, 0.5, 1.0, 2.0, -1.5}) {
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, x > 0 ? 1.0 : -1.0);
    CHECK(sup_feasible_w0(sys, cand, example::scalar(x), p, grid) == Approx(exact_w0_sup(std::abs(x))).epsilon(1e-12));
  }
  CHECK(exact_w0_sup(1.0) == Approx(5.0 / 12.0));
}

TEST_CASE("compute_N reports raw and band values", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto cand = example::abs_candidate();
  const auto grid = ControlGrid::extended(sys, 1e-3);
  const auto at1 = compute_N(sys, cand, 1.0, grid, level_points);
  CHECK(at1.raw == Approx(0.375).epsilon(1e-10));
  CHECK(at1.value == Approx(0.375).epsilon(1e-10));
  const auto at2 = compute_N(sys, cand, 2.0, grid, level_points);
  CHECK(at2.raw == Approx(0.66).epsilon(1e-10));
  CHECK(at2.value == Approx(0.375).epsilon(1e-10));
  const auto small = compute_N(sys, cand, 0.1, grid, level_points);
  CHECK(small.raw == Approx(0.9 * exact_w0_sup(0.1)).epsilon(1e-10));
  CHECK(small.value == Approx(0.006694).epsilon(1e-3));
  // the fixture N lies below the unscaled feasible sup
  for (const auto& e : {at1, at2, small}) CHECK(example::fixture_N(e.r) < e.raw / kNSafety);
  CHECK_THROWS_AS(compute_N(sys, example::abs_candidate([](double r) { return 2.0 * r * r * r; }), 1.0, grid, level_points),
                  CertificationFailure);
}

TEST_CASE("N curve is clamped monotone around r = 1", "[clf][property]") {
  const auto sys = example::cubic_damped();
  const auto cand = example::abs_candidate();
  const auto grid = ControlGrid::extended(sys, 1e-2);
  std::vector<double> radii;
  for (int i = -8; i <= 8; ++i) radii.push_back(std::pow(2.0, 0.5 * i));
  const auto curve = n_curve(sys, cand, radii, grid, radial_level_sampler(cand.W, Target::origin(), 1), 2);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].value > 0.0);
    if (curve[i].r <= 1.0) CHECK(curve[i].value >= curve[i - 1].value);
    if (curve[i - 1].r >= 1.0) CHECK(curve[i].value <= curve[i - 1].value);
  }
  const auto n = interpolate_n(curve);
  CHECK(n(1e-6) == curve.front().value);
  CHECK(n(curve[3].r) == Approx(curve[3].value));
}

TEST_CASE("restricted argmin lands on the fixture feedback", "[clf]") {
  const auto sys = example::cubic_damped();
  const auto cand = example::abs_candidate();
  const auto grid = ControlGrid::extended(sys, 1e-3);
  for (double x : {0.3, 1.0, 2.0, -1.7}) {
    const auto res = synthesize_feedback_extended(sys, cand, example::fixture_N, example::scalar(x), grid);
    const auto want = example::k_hat(x);
    CHECK(res.control.w0 == Approx(want.w0).epsilon(1e-14));
    CHECK(res.control.w[0] == Approx(want.w[0]).epsilon(1e-14));
    CHECK(res.margin() == Approx(-std::abs(x * x * x) / (2.0 * (2.0 + x * x))).epsilon(1e-10));
    const auto u = project_feedback(sys.growth(), res.control);
    CHECK(u[0] == Approx(2.0 / (x * x)).epsilon(1e-12));
  }
  // rho = 1 leaves only the drift, which never decreases |x|
  CHECK_THROWS_AS(synthesize_feedback_extended(sys, cand, [](double) { return 1.0; }, example::scalar(1.0), grid),
                  CertificationFailure);
  CHECK_FALSE(restricted_argmin(sys, cand, 1.0, example::scalar(1.0), grid).decreasing());
}

TEST_CASE("projection between feedbacks", "[clf]") {
  const auto g = GrowthRate::power(1);
  CHECK_THROWS_AS(project_feedback(g, ExtendedControl::make(0.0, Control::Constant(1, 1.0))), ProjectionDomainError);
  CHECK_THROWS_AS(project_feedback(g, ExtendedControl::make(1.0, Control::Zero(1))), ProjectionDomainError);
  example::Fixture fx;
  const auto k = project_feedback(g, fx.K_hat);
  const auto k_hat = feedback_to_extended(g, fx.K);
  for (double x : {0.2, 1.0, 3.0}) {
    CHECK(k.original_value(example::scalar(x))[0] == Approx(2.0 / (x * x)).epsilon(1e-12));
    CHECK(k_hat.extended_value(example::scalar(x)).w0 == Approx(example::k_hat(x).w0).epsilon(1e-12));
  }
  const auto drift = project_feedback(g, Feedback::constant(ExtendedControl::make(1.0, Control::Zero(1))));
  CHECK(drift.original_value(example::scalar(1.0))[0] == 0.0);
}
