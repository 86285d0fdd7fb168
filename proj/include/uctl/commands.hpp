#pragma once

// Subcommand bodies. Each takes a loaded RunConfig and returns an exit code,
// the files to write (name -> content) and a one-line summary; the CLI only
// handles argument parsing and file output.

#include <map>
#include <string>
#include <vector>

#include "uctl/clf.hpp"
#include "uctl/config.hpp"
#include "uctl/gac.hpp"
#include "uctl/io.hpp"
#include "uctl/sampling.hpp"

namespace uctl::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitViolations = 2;
inline constexpr int kExitRuntime = 3;

struct CommandResult {
  int exit_code = kExitOk;
  std::map<std::string, std::string> files;
  std::string summary;
};

using config::json;

namespace detail {

inline json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  std::vector<double> out;
  if (count == 1) return {lo};
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(i + 1 == count ? hi : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1)));
  return out;
}

}  // namespace detail

inline CommandResult run_simulate(const config::RunConfig& cfg) {
  using namespace config;
  const auto& doc = cfg.doc;
  const Feedback k = feedback(cfg, at(doc, "feedback"), "feedback");
  const double horizon = positive_at(doc, "simulate.horizon");
  const Partition pi = partition(cfg, horizon);
  const State z = initial_state(cfg);
  SimOptions opts = cfg.sim;
  opts.horizon = horizon;
  opts.output_step = number_at(doc, "simulate.output_step");
  if (opts.output_step < 0.0) throw ConfigError("'simulate.output_step' must be >= 0");
  const bool fail_on_blowup = flag_at(doc, "simulate.fail_on_blowup");
  const bool svg = flag_at(doc, "simulate.svg");
  std::optional<KLFunction> env;
  if (svg) env = beta(cfg);
  if (cfg.sys.target(z) <= opts.target_tol) throw ConfigError("'simulate.z' already lies in the target");

  const auto rec = simulate_sample_hold(cfg.sys.system, cfg.mode, cfg.sys.target, k, pi, z, opts);
  CommandResult res;
  res.files[string_at(doc, "output.trajectory")] = io::trajectory_csv(rec, cfg.sys.target, cfg.n(), cfg.m());
  if (env) {
    const std::function<double(double, double)> b = [&env](double R, double t) { return (*env)(R, t); };
    res.files[string_at(doc, "output.svg")] = io::trajectory_svg(rec, cfg.sys.target, &b);
  }
  res.summary = std::string("simulate: status=") + to_string(rec.status) + " time=" + io::fmt(rec.status_time) +
                " final_d=" + io::fmt(cfg.sys.target(rec.states.back()));
  if (rec.status == TrajectoryStatus::BlowUp && fail_on_blowup) res.exit_code = kExitRuntime;
  return res;
}

inline CommandResult run_verify_clf(const config::RunConfig& cfg) {
  using namespace config;
  const auto& doc = cfg.doc;
  const auto cand = candidate(cfg);
  const double r_min = positive_at(doc, "verify_clf.r_min");
  const double r_max = positive_at(doc, "verify_clf.r_max");
  if (r_max < r_min) throw ConfigError("'verify_clf.r_max' must be >= r_min");
  const auto radial = count_at(doc, "verify_clf.radial");
  const auto directions = count_at(doc, "verify_clf.directions");
  const double mesh = positive_at(doc, "verify_clf.mesh");
  if (mesh > 1.0) throw ConfigError("'verify_clf.mesh' must be <= 1");
  const auto control_dirs = count_at(doc, "verify_clf.control_directions");
  const auto n_radii = count_at(doc, "verify_clf.n_radii");

  const auto& sys = cfg.sys.system;
  const auto region = annulus_samples(cfg.sys.target, cfg.n(), r_min, r_max, radial, directions, cfg.seed);
  const auto grid = ControlGrid::extended(sys, mesh, control_dirs);
  const auto rep = decrease_check(sys, cand, region, grid, cfg.jobs);

  json out;
  out["command"] = "verify-clf";
  out["system"] = sys.name();
  out["region"] = {{"r_min", r_min}, {"r_max", r_max}, {"samples", rep.samples}};
  out["mesh"] = mesh;
  out["worst_margin"] = rep.worst_margin;
  out["certified"] = rep.certified();
  json viol = json::array();
  for (const auto& v : rep.violations)
    viol.push_back({{"x", detail::vec(v.x)}, {"p", detail::vec(v.p)}, {"H", v.H}, {"gamma_W", v.gamma_W}});
  out["violations"] = viol;
  json curve = json::array(), raw = json::array();
  if (rep.certified()) {
    try {
      const auto est = n_curve(sys, cand, detail::log_spaced(r_min, r_max, n_radii), grid,
                               radial_level_sampler(cand.W, cfg.sys.target, cfg.n(), directions), cfg.jobs);
      for (const auto& e : est) {
        curve.push_back(json::array({e.r, e.value}));
        raw.push_back(json::array({e.r, e.raw}));
      }
    } catch (const CertificationFailure& e) {
      out["N_error"] = e.what();
    }
  }
  out["N_curve"] = curve;
  out["N_raw"] = raw;

  CommandResult res;
  res.files[string_at(doc, "output.clf_report")] = out.dump(2) + "\n";
  res.exit_code = rep.certified() ? kExitOk : kExitViolations;
  res.summary = "verify-clf: samples=" + std::to_string(rep.samples) + " violations=" +
                std::to_string(rep.violations.size()) + " worst_margin=" + io::fmt(rep.worst_margin);
  return res;
}

inline CommandResult run_synthesize(const config::RunConfig& cfg) {
  using namespace config;
  const auto& doc = cfg.doc;
  const auto& sys = cfg.sys.system;
  const auto cand = candidate(cfg);
  const double from = number_at(doc, "synthesize.from");
  const double to = number_at(doc, "synthesize.to");
  const auto count = count_at(doc, "synthesize.count");
  const double mesh = positive_at(doc, "synthesize.mesh");
  if (mesh > 1.0) throw ConfigError("'synthesize.mesh' must be <= 1");
  const auto grid = ControlGrid::extended(sys, mesh, count_at(doc, "synthesize.control_directions"));
  std::function<double(double)> n_fn;
  const json& nj = at(doc, "synthesize.N");
  if (nj.is_string() && nj.get<std::string>() == "auto") {
    const double lo = std::max(1e-3, std::min(std::abs(from), std::abs(to)));
    const double hi = std::max({std::abs(from), std::abs(to), 1.0});
    try {
      n_fn = interpolate_n(n_curve(sys, cand, detail::log_spaced(lo, hi, 12), grid,
                                   radial_level_sampler(cand.W, cfg.sys.target, cfg.n()), cfg.jobs));
    } catch (const CertificationFailure& e) {
      CommandResult res;
      res.exit_code = kExitViolations;
      res.summary = std::string("synthesize: N estimation failed: ") + e.what();
      return res;
    }
  } else {
    n_fn = scalar_function(nj, "synthesize.N", "r");
  }

  const int n = cfg.n(), m = cfg.m();
  std::string csv;
  for (int i = 1; i <= n; ++i) csv += (i > 1 ? "," : "") + std::string("x_") + std::to_string(i);
  csv += ",w0";
  for (int i = 1; i <= m; ++i) csv += ",w_" + std::to_string(i);
  for (int i = 1; i <= m; ++i) csv += ",K_" + std::to_string(i);
  csv += ",margin,decreasing\n";
  std::size_t failures = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < count; ++j) {
    const double s = count == 1 ? from : from + (to - from) * static_cast<double>(j) / static_cast<double>(count - 1);
    State x = State::Zero(n);
    x[0] = s;
    if (cfg.sys.target(x) <= 0.0) throw ConfigError("synthesis grid point lies in the target");
    const double rho = n_fn(cand.W(x));
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("'synthesize.N' must map into (0, 1], got " + io::fmt(rho));
    const auto r = restricted_argmin(sys, cand, rho, x, grid);
    Control k = Control::Zero(m);
    if (r.control.w0 > 0.0 && r.control.w.norm() > 0.0) k = project_feedback(sys.growth(), r.control);
    const bool ok = r.decreasing();
    if (!ok) ++failures;
    worst = std::max(worst, r.margin());
    for (int i = 0; i < n; ++i) csv += (i > 0 ? "," : "") + io::fmt(x[i]);
    csv += "," + io::fmt(r.control.w0);
    for (int i = 0; i < m; ++i) csv += "," + io::fmt(r.control.w[i]);
    for (int i = 0; i < m; ++i) csv += "," + io::fmt(k[i]);
    csv += "," + io::fmt(r.margin()) + "," + (ok ? "1" : "0") + "\n";
  }
  CommandResult res;
  res.files[string_at(doc, "output.feedback_table")] = csv;
  res.exit_code = failures == 0 ? kExitOk : kExitViolations;
  res.summary = "synthesize: rows=" + std::to_string(count) + " failures=" + std::to_string(failures) +
                " worst_margin=" + io::fmt(worst);
  return res;
}

inline CommandResult run_certify_stab(const config::RunConfig& cfg) {
  using namespace config;
  const auto& doc = cfg.doc;
  const Feedback k = feedback(cfg, at(doc, "feedback"), "feedback");
  const KLFunction b = beta(cfg);
  std::vector<RadiusPair> pairs;
  const json& pj = at(doc, "certify_stab.pairs");
  if (!pj.is_array() || pj.empty()) throw ConfigError("'certify_stab.pairs' must be a non-empty array");
  for (const auto& p : pj) {
    const double R = positive_at(p, "R");
    const double r = positive_at(p, "r");
    if (!(r < R)) throw ConfigError("certify_stab pair needs r < R, got R=" + io::fmt(R) + " r=" + io::fmt(r));
    pairs.push_back({R, r});
  }
  const auto delta_expr = compile_at(at(doc, "certify_stab.delta"), "certify_stab.delta", {"R", "r"});
  const auto delta = [delta_expr](double R, double r) { return delta_expr({R, r}); };
  StabSettings st;
  st.seeds_per_pair = count_at(doc, "certify_stab.seeds_per_pair");
  st.random_partitions = count_at(doc, "certify_stab.random_partitions", 0);
  st.extra_time = number_at(doc, "certify_stab.extra_time");
  if (st.extra_time < 0.0) throw ConfigError("'certify_stab.extra_time' must be >= 0");
  st.tol = number_at(doc, "certify_stab.tol");
  if (st.tol < 0.0) throw ConfigError("'certify_stab.tol' must be >= 0");
  st.seed = cfg.seed;
  st.jobs = cfg.jobs;

  const auto rep = certify_sample_stabilizability(cfg.sys.system, cfg.mode, cfg.sys.target, k, b, pairs, delta,
                                                  shell_sampler(cfg.sys.target, cfg.n()), st, cfg.sim);
  json out;
  out["command"] = "certify-stab";
  out["system"] = cfg.sys.system.name();
  json arr = json::array();
  std::size_t total = 0;
  for (const auto& p : rep.pairs) {
    json v = json::array();
    for (const auto& e : p.violations)
      v.push_back({{"z", detail::vec(e.z)}, {"partition", e.partition}, {"t", e.t}, {"d", e.d}, {"bound", e.bound},
                   {"reason", e.reason}});
    total += p.violations.size();
    arr.push_back({{"R", p.R}, {"r", p.r}, {"delta", p.delta}, {"seeds_tested", p.seeds_tested},
                   {"partitions_tested", p.partitions_tested}, {"worst_node_ratio", p.worst_node_ratio},
                   {"violations", v}});
  }
  out["pairs"] = arr;
  out["verdict"] = rep.pass() ? "pass" : "fail";
  CommandResult res;
  res.files[string_at(doc, "output.stab_report")] = out.dump(2) + "\n";
  res.exit_code = rep.pass() ? kExitOk : kExitViolations;
  res.summary = std::string("certify-stab: verdict=") + (rep.pass() ? "pass" : "fail") +
                " violations=" + std::to_string(total);
  return res;
}

}  // namespace uctl::commands
