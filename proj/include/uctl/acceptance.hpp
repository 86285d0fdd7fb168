#pragma once

// The end-to-end acceptance suite on the cubic-damped example. Each criterion
// returns a pass/fail verdict with a short numeric detail line; `run_example`
// renders the whole suite as a report.

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uctl/clf.hpp"
#include "uctl/commands.hpp"
#include "uctl/config.hpp"
#include "uctl/example.hpp"
#include "uctl/gac.hpp"
#include "uctl/io.hpp"
#include "uctl/sampling.hpp"
#include "uctl/transforms.hpp"

namespace uctl::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::string kv(const std::string& k, double v) { return k + "=" + io::fmt(v); }

inline config::RunConfig fixture_config(const std::vector<std::string>& sets, unsigned jobs = 1) {
  return config::load(std::nullopt, sets, jobs);
}

/// Column `col` of a CSV body (header skipped, comment lines ignored).
inline std::vector<double> csv_column(const std::string& csv, std::size_t col) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string cell;
    for (std::size_t c = 0; c <= col && std::getline(row, cell, ','); ++c)
      if (c == col) out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace detail

/// Constant control u = 2 stalls at 1/sqrt(2) and matches the closed-form solution.
inline CriterionResult bounded_control_floor() {
  CriterionResult r{1, "bounded-control floor", false, {}};
  const auto start = std::chrono::steady_clock::now();
  const auto sys = example::cubic_damped();
  SimOptions o;
  o.horizon = 20.0;
  o.output_step = 0.2;
  const auto rec = simulate_open_loop(sys, DynamicsMode::Original, Target::origin(),
                                      PiecewiseConstantSignal::constant(Control::Constant(1, 2.0)),
                                      example::scalar(1.0), o);
  const double elapsed = detail::seconds_since(start);
  double worst = 0.0;
  for (std::size_t k = 1; k < rec.size(); ++k)
    worst = std::max(worst, std::abs(rec.states[k][0] - example::closed_form_constant_control(1.0, 2.0, rec.times[k])));
  const double floor_err = std::abs(rec.states.back()[0] - 1.0 / std::sqrt(2.0));
  const std::size_t checkpoints = rec.size() - 1;
  r.passed = rec.status == TrajectoryStatus::HorizonEnd && checkpoints >= 100 && worst <= 1e-6 && floor_err <= 1e-4 &&
             elapsed < 1.0;
  r.detail = detail::kv("floor_err", floor_err) + " " + detail::kv("max_dev", worst) + " checkpoints=" +
             std::to_string(checkpoints) + " " + detail::kv("seconds", elapsed);
  return r;
}

/// K(x) = 2/x^2 under uniform sampling at delta = ln(phi) obeys |x(t_k)| <= |z| e^{-t_k/2}.
inline CriterionResult stabilization() {
  CriterionResult r{2, "sample-and-hold stabilization", false, {}};
  example::Fixture fx;
  const double delta = fx.delta_max;
  const double ratio_cap = std::exp(-delta / 2.0) + 1e-6;
  double worst_excess = -1.0, worst_ratio = 0.0, slowest = 0.0;
  bool ok = true;
  for (double z : {-5.0, -1.0, -0.1, 0.1, 1.0, 5.0}) {
    const auto start = std::chrono::steady_clock::now();
    SimOptions o;
    o.horizon = 20.0 * delta;
    const auto rec = simulate_sample_hold(fx.system, DynamicsMode::Original, fx.target, fx.K,
                                          uniform_partition(delta, o.horizon), example::scalar(z), o);
    slowest = std::max(slowest, detail::seconds_since(start));
    for (std::size_t n = 0; n < rec.node_indices.size(); ++n) {
      const std::size_t k = rec.node_indices[n];
      const double excess = std::abs(rec.states[k][0]) - std::abs(z) * std::exp(-rec.times[k] / 2.0);
      worst_excess = std::max(worst_excess, excess);
      if (n > 0) {
        const double ratio = std::abs(rec.states[k][0]) / std::abs(rec.states[rec.node_indices[n - 1]][0]);
        worst_ratio = std::max(worst_ratio, ratio);
      }
    }
    ok = ok && rec.node_indices.size() > 10;
  }
  r.passed = ok && worst_excess <= 1e-6 && worst_ratio <= ratio_cap && slowest < 1.0;
  r.detail = detail::kv("worst_excess", worst_excess) + " " + detail::kv("worst_ratio", worst_ratio) + " " +
             detail::kv("ratio_cap", ratio_cap) + " " + detail::kv("slowest_run_s", slowest);
  return r;
}

/// Extended dynamics under (w0, w) = (0, 1) follow 1/sqrt(2s + 1) from z = 1.
inline CriterionResult impulsive_jump() {
  CriterionResult r{3, "impulsive jump", false, {}};
  const auto sys = example::cubic_damped();
  SimOptions o;
  o.horizon = 10.0;
  o.output_step = 0.05;
  const auto signal = PiecewiseConstantSignal::constant(ExtendedControl::make(0.0, Control::Constant(1, 1.0)).pack());
  const auto rec = simulate_open_loop(sys, DynamicsMode::Extended, Target::origin(), signal, example::scalar(1.0), o);
  double worst = 0.0;
  for (std::size_t k = 0; k < rec.size(); ++k)
    worst = std::max(worst, std::abs(rec.states[k][0] - example::closed_form_jump(1.0, rec.times[k])));
  r.passed = rec.status == TrajectoryStatus::HorizonEnd && rec.times.back() == 10.0 && worst <= 1e-6;
  r.detail = detail::kv("max_dev", worst) + " points=" + std::to_string(rec.size());
  return r;
}

/// W = |x| certifies with the fixture gamma and fails everywhere with gamma = r^3.
inline CriterionResult clf_certification(unsigned jobs = 1) {
  CriterionResult r{4, "CLF certification", false, {}};
  const auto good = commands::run_verify_clf(detail::fixture_config({}, jobs));
  const auto bad_cfg = detail::fixture_config({"clf.gamma=r^3"}, jobs);
  const auto bad = commands::run_verify_clf(bad_cfg);
  const auto report = config::json::parse(bad.files.begin()->second);
  const std::size_t samples = report["region"]["samples"].get<std::size_t>();
  const std::size_t violations = report["violations"].size();
  const auto good_report = config::json::parse(good.files.begin()->second);
  r.passed = good.exit_code == commands::kExitOk && good_report["violations"].empty() &&
             bad.exit_code == commands::kExitViolations && violations == samples && samples > 0;
  r.detail = "exit_good=" + std::to_string(good.exit_code) + " exit_bad=" + std::to_string(bad.exit_code) +
             " bad_violations=" + std::to_string(violations) + "/" + std::to_string(samples) + " " +
             detail::kv("worst_margin_good", good_report["worst_margin"].get<double>());
  return r;
}

/// Truncated original Hamiltonian approaches the extended one at rate 2/(1+R_max).
inline CriterionResult hamiltonian_equivalence() {
  CriterionResult r{5, "Hamiltonian equivalence", false, {}};
  const auto sys = example::cubic_damped();
  const State x = example::scalar(1.0);
  const Eigen::VectorXd p = Eigen::VectorXd::Ones(1);
  const double h_ext = hamiltonian_extended(sys, x, p, ControlGrid::extended(sys, 1e-3));
  bool ok = std::abs(h_ext + 1.0) <= 1e-3;
  std::string text = detail::kv("H_ext", h_ext);
  for (double r_max : {10.0, 100.0, 1000.0}) {
    const double h_orig = hamiltonian_original(sys, x, p, ControlGrid::original(sys, r_max));
    const double gap = std::abs(h_orig - h_ext);
    ok = ok && gap <= 2.0 / (1.0 + r_max) + 1e-3;
    text += " gap(" + io::fmt(r_max) + ")=" + io::fmt(gap);
  }
  r.passed = ok;
  r.detail = text;
  return r;
}

/// Synthesized K on [0.1, 10] is 2/x^2 within 5%, and lifting then projecting is exact.
inline CriterionResult synthesis_pipeline() {
  CriterionResult r{6, "synthesis pipeline", false, {}};
  const auto cfg = detail::fixture_config({});
  const auto res = commands::run_synthesize(cfg);
  const std::string& csv = res.files.begin()->second;
  const auto xs = detail::csv_column(csv, 0);
  const auto ks = detail::csv_column(csv, 3);
  double worst_rel = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    worst_rel = std::max(worst_rel, std::abs(ks[i] - 2.0 / (xs[i] * xs[i])) / (2.0 / (xs[i] * xs[i])));
  const auto g = cfg.sys.system.growth();
  double worst_trip = 0.0;
  for (double x : xs) {
    const auto wc = example::k_hat(x);
    const auto back = control_to_extended(g, project_feedback(g, wc));
    worst_trip = std::max({worst_trip, std::abs(back.w0 - wc.w0), std::abs(back.w[0] - wc.w[0])});
    const double k = example::k_original(x);
    const double k_back = project_feedback(g, control_to_extended(g, Control::Constant(1, k)))[0];
    worst_trip = std::max(worst_trip, std::abs(k_back - k) / k);
  }
  r.passed = res.exit_code == commands::kExitOk && xs.size() == 100 && xs.front() == 0.1 && xs.back() == 10.0 &&
             worst_rel <= 0.05 && worst_trip <= 1e-10;
  r.detail = "rows=" + std::to_string(xs.size()) + " " + detail::kv("worst_rel_err", worst_rel) + " " +
             detail::kv("round_trip_err", worst_trip);
  return r;
}

/// Time changes, control maps and the rescaled/extended conjugacy on random samples.
inline CriterionResult transform_round_trips() {
  CriterionResult r{7, "transform round trips", false, {}};
  const auto sys = example::cubic_damped();
  const auto g = sys.growth();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> log_mag(-3.0, 3.0);

  double time_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    TrajectoryRecord rec;
    rec.control_kind = ControlKind::Original;
    const int pieces = 1 + static_cast<int>(unit(rng) * 20);
    rec.times.push_back(0.0);
    for (int k = 0; k < pieces; ++k) {
      rec.times.push_back(rec.times.back() + 0.01 + unit(rng));
      rec.controls.push_back(Control::Constant(1, std::pow(10.0, log_mag(rng))));
      rec.states.push_back(example::scalar(0.0));
    }
    rec.states.push_back(example::scalar(0.0));
    const auto back = time_change_backward(time_change_forward(rec, g), g);
    for (std::size_t k = 0; k < rec.times.size(); ++k)
      time_err = std::max(time_err, std::abs(back.times[k] - rec.times[k]) / std::max(1.0, rec.times[k]));
  }

  double map_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double w0 = 1e-6 + (1.0 - 1e-6) * unit(rng);
    const auto wc = ExtendedControl::make(w0, Control::Constant(1, 1.0 - w0));
    const auto back = control_to_extended(g, extended_to_control(g, wc));
    map_err = std::max({map_err, std::abs(back.w0 - wc.w0), std::abs(back.w[0] - wc.w[0])});
    const double u = std::pow(10.0, log_mag(rng));
    map_err = std::max(map_err, std::abs(extended_to_control(g, control_to_extended(g, Control::Constant(1, u)))[0] - u) / u);
  }

  double conj_err = 0.0;
  std::uniform_real_distribution<double> xs(-5.0, 5.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const State x = example::scalar(xs(rng));
    const Control u = Control::Constant(1, std::pow(10.0, log_mag(rng)));
    const double lhs = extended_dynamics(sys, x, control_to_extended(g, u))[0];
    const double rhs = rescaled_dynamics(sys, x, u)[0];
    conj_err = std::max(conj_err, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  r.passed = time_err <= 1e-10 && map_err <= 1e-10 && conj_err <= 1e-10;
  r.detail = detail::kv("time_change_err", time_err) + " " + detail::kv("control_map_err", map_err) + " " +
             detail::kv("conjugacy_err", conj_err);
  return r;
}

/// Strips, dwell times and the KL majorant for beta = 2R e^{-t/2}; kl_check on two references.
inline CriterionResult kl_machinery() {
  CriterionResult r{8, "KL machinery", false, {}};
  const KLFunction beta([](double R, double t) { return 2.0 * R * std::exp(-t / 2.0); }, true);
  const auto strips = strip_radii(beta, -4, 40);
  bool exact = true;
  for (int i = strips.i_min(); i <= strips.i_max(); ++i) exact = exact && strips.radius(i) == std::ldexp(1.0, -i);
  const auto dwell = descent_times(beta, strips);
  double dwell_err = 0.0;
  for (double t : dwell.times) dwell_err = std::max(dwell_err, std::abs(t - 2.0 * std::log(4.0)));
  const PiecewiseB b(strips, dwell, 20.0);
  const auto maj = kl_majorant(b);
  std::size_t points = 0, dominated = 0;
  for (int i = 0; i < 25; ++i) {
    const double R = std::pow(2.0, 0.9 - 10.0 * i / 24.0);
    for (int j = 0; j < 40; ++j) {
      const double t = 0.5 * j;
      ++points;
      if (maj(R, t) >= b(R, t)) ++dominated;
    }
  }
  std::vector<double> r_grid, t_grid;
  for (int i = 1; i <= 20; ++i) r_grid.push_back(0.25 * i);
  for (int j = 0; j <= 40; ++j) t_grid.push_back(0.5 * j);
  const bool ref_clean = kl_check(example::fixture_beta(), r_grid, t_grid).clean();
  const KLFunction flat([](double R, double) { return R; }, false);
  const bool flat_flagged = kl_check(flat, r_grid, t_grid).has(KLViolation::Kind::NotDecreasingInT);
  r.passed = exact && dwell_err <= 1e-8 && dominated == points && points >= 1000 && ref_clean && flat_flagged;
  r.detail = std::string("doubling_exact=") + (exact ? "yes" : "no") + " " + detail::kv("dwell_err", dwell_err) +
             " dominated=" + std::to_string(dominated) + "/" + std::to_string(points) +
             " reference_clean=" + (ref_clean ? "yes" : "no") + " constant_flagged=" + (flat_flagged ? "yes" : "no");
  return r;
}

/// Bounded feedback K = 2 cannot push trajectories below 1/sqrt(2): violations for (R, r) = (2, 0.1).
inline CriterionResult negative_certification(unsigned jobs = 1) {
  CriterionResult r{9, "negative certification", false, {}};
  const auto cfg = detail::fixture_config(
      {R"(feedback={"type":"constant","u":[2]})", R"(certify_stab.pairs=[{"R":2,"r":0.1}])"}, jobs);
  const auto res = commands::run_certify_stab(cfg);
  const auto report = config::json::parse(res.files.begin()->second);
  const std::size_t violations = report["pairs"][0]["violations"].size();
  r.passed = res.exit_code == commands::kExitViolations && report["verdict"] == "fail" && violations > 0;
  r.detail = "exit=" + std::to_string(res.exit_code) + " violations=" + std::to_string(violations);
  return r;
}

/// Every command run twice with the same configuration yields byte-identical files.
inline CriterionResult determinism(unsigned jobs = 1) {
  CriterionResult r{10, "determinism", false, {}};
  using Runner = commands::CommandResult (*)(const config::RunConfig&);
  const std::vector<std::pair<std::string, Runner>> runs{{"simulate", commands::run_simulate},
                                                         {"verify-clf", commands::run_verify_clf},
                                                         {"synthesize", commands::run_synthesize},
                                                         {"certify-stab", commands::run_certify_stab}};
  const std::vector<std::string> sets{"simulate.svg=true", "simulate.output_step=0.05",
                                      R"(simulate.partition={"type":"random","delta":0.4})",
                                      "verify_clf.radial=40", "synthesize.count=20"};
  bool ok = true;
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& [name, run] : runs) {
    const auto a = run(detail::fixture_config(sets, jobs));
    const auto b = run(detail::fixture_config(sets, jobs == 1 ? 2 : 1));
    if (a.files != b.files || a.exit_code != b.exit_code) {
      ok = false;
      mismatch += " " + name;
    }
    files += a.files.size();
  }
  r.passed = ok && files >= 5;
  r.detail = "files_compared=" + std::to_string(files) + (mismatch.empty() ? "" : " mismatch:" + mismatch);
  return r;
}

inline std::vector<CriterionResult> run_all(unsigned jobs = 1) {
  std::vector<std::function<CriterionResult()>> all{
      bounded_control_floor,
      stabilization,
      impulsive_jump,
      [jobs] { return clf_certification(jobs); },
      hamiltonian_equivalence,
      synthesis_pipeline,
      transform_round_trips,
      kl_machinery,
      [jobs] { return negative_certification(jobs); },
      [jobs] { return determinism(jobs); },
  };
  std::vector<CriterionResult> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      out.push_back(all[i]());
    } catch (const std::exception& e) {
      out.push_back({static_cast<int>(i + 1), "criterion " + std::to_string(i + 1), false,
                     std::string("exception: ") + e.what()});
    }
  }
  return out;
}

inline std::string format_line(const CriterionResult& r) {
  return std::string(r.passed ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail;
}

/// `example` command: the full suite as a text report.
inline commands::CommandResult run_example(const config::RunConfig& cfg) {
  commands::CommandResult res;
  std::string text;
  std::size_t passed = 0;
  const auto results = run_all(cfg.jobs);
  for (const auto& r : results) {
    text += format_line(r) + "\n";
    if (r.passed) ++passed;
  }
  res.files[config::string_at(cfg.doc, "output.example_report")] = text;
  res.exit_code = passed == results.size() ? commands::kExitOk : commands::kExitViolations;
  res.summary = "example: " + std::to_string(passed) + "/" + std::to_string(results.size()) + " criteria passed";
  return res;
}

}  // namespace uctl::acceptance
