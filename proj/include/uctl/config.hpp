#pragma once

// Run configuration: a JSON document merged over built-in defaults, patched by
// --set overrides, checked against a closed key schema, then read into typed
// values. Formulas are strings in the expression language; numeric fields
// accept either numbers or constant expressions such as "log(phi)".

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uctl/clf.hpp"
#include "uctl/core.hpp"
#include "uctl/example.hpp"
#include "uctl/expression.hpp"
#include "uctl/gac.hpp"
#include "uctl/sampling.hpp"

namespace uctl::config {

using json = nlohmann::ordered_json;

/// Defaults reproduce the cubic-damped fixture: W = |x|, K = 2/x^2, beta = R e^{-t/2}, delta = ln(phi).
inline json default_document() {
  return json::parse(R"json({
    "system": "cubic-damped",
    "mode": "original",
    "seed": 1,
    "tolerances": {"target_tol": 1e-8, "blowup_norm": 1e9, "min_step": 1e-12,
                   "abs_tol": 1e-12, "rel_tol": 1e-10, "initial_step": 1e-3},
    "clf": {"W": "abs(x)", "grad": ["sign(x)"], "gamma": "r^3/(2*(2+r^2))"},
    "feedback": {"type": "expression", "u": ["2/x^2"]},
    "beta": "R*exp(-t/2)",
    "simulate": {"z": [1.0], "horizon": 10.0, "partition": {"type": "uniform", "delta": "log(phi)"},
                 "output_step": 0.0, "fail_on_blowup": false, "svg": false},
    "verify_clf": {"r_min": 1e-2, "r_max": 1e2, "radial": 200, "directions": 8, "mesh": 1e-3,
                   "control_directions": 16, "n_radii": 9},
    "synthesize": {"N": "r^2/(2+r^2)", "from": 0.1, "to": 10.0, "count": 100, "mesh": 1e-3,
                   "control_directions": 16},
    "certify_stab": {"pairs": [{"R": 2.0, "r": 0.1}], "delta": "log(phi)", "seeds_per_pair": 8,
                     "random_partitions": 2, "extra_time": 10.0, "tol": 1e-6},
    "output": {"trajectory": "trajectory.csv", "svg": "trajectory.svg", "clf_report": "clf_report.json",
               "feedback_table": "feedback.csv", "stab_report": "stab_report.json",
               "example_report": "example_report.txt"}
  })json");
}

namespace detail {

// Objects at these paths are replaced wholesale rather than merged key by key.
inline const std::set<std::string>& replaced_paths() {
  static const std::set<std::string> paths{"system", "feedback", "simulate.partition"};
  return paths;
}

inline void merge(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object() || !base.is_object() || replaced_paths().contains(path)) {
    base = overlay;
    return;
  }
  for (const auto& [key, value] : overlay.items()) {
    const std::string sub = path.empty() ? key : path + "." + key;
    if (base.contains(key)) merge(base[key], value, sub);
    else base[key] = value;
  }
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
  }
}

}  // namespace detail

/// Applies one KEY=VALUE override; VALUE is parsed as JSON, falling back to a plain string.
inline void apply_set(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("empty segment in --set key '" + key + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("--set path '" + key + "' crosses a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("--set path '" + key + "' crosses a non-object");
  (*node)[parts.back()] = value;
}

/// Rejects unknown keys anywhere in the document.
inline void validate_keys(const json& doc) {
  using detail::check_keys;
  check_keys(doc, "", {"system", "mode", "seed", "tolerances", "clf", "feedback", "beta", "simulate", "verify_clf",
                       "synthesize", "certify_stab", "output"});
  if (doc.contains("system") && doc["system"].is_object()) {
    const auto& s = doc["system"];
    check_keys(s, "system", {"name", "n", "m", "d", "cone", "terms", "target"});
    if (s.contains("terms")) {
      if (!s["terms"].is_array()) throw ConfigError("'system.terms' must be an array");
      for (const auto& t : s["terms"]) check_keys(t, "system.terms[]", {"k", "f"});
    }
    if (s.contains("target")) check_keys(s["target"], "system.target", {"type", "radius"});
  }
  auto sub = [&](const char* name, std::initializer_list<const char*> allowed) {
    if (doc.contains(name)) check_keys(doc[name], name, allowed);
  };
  sub("tolerances", {"target_tol", "blowup_norm", "min_step", "abs_tol", "rel_tol", "initial_step"});
  sub("clf", {"W", "grad", "gamma"});
  sub("feedback", {"type", "u", "w0", "w", "N", "mesh"});
  sub("simulate", {"z", "horizon", "partition", "output_step", "fail_on_blowup", "svg"});
  if (doc.contains("simulate") && doc["simulate"].contains("partition"))
    check_keys(doc["simulate"]["partition"], "simulate.partition", {"type", "delta", "seed"});
  sub("verify_clf", {"r_min", "r_max", "radial", "directions", "mesh", "control_directions", "n_radii"});
  sub("synthesize", {"N", "from", "to", "count", "mesh", "control_directions"});
  sub("certify_stab", {"pairs", "delta", "seeds_per_pair", "random_partitions", "extra_time", "tol"});
  if (doc.contains("certify_stab") && doc["certify_stab"].contains("pairs")) {
    if (!doc["certify_stab"]["pairs"].is_array()) throw ConfigError("'certify_stab.pairs' must be an array");
    for (const auto& p : doc["certify_stab"]["pairs"]) check_keys(p, "certify_stab.pairs[]", {"R", "r"});
  }
  sub("output", {"trajectory", "svg", "clf_report", "feedback_table", "stab_report", "example_report"});
}

// ---------------------------------------------------------------------------
// Typed access
// ---------------------------------------------------------------------------

inline const json& at(const json& doc, const std::string& dotted) {
  const json* node = &doc;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("missing key '" + dotted + "'");
    node = &(*node)[part];
  }
  return *node;
}

/// Number or constant expression.
inline double number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const double v = Expression::compile(j.get<std::string>(), {})(std::span<const double>{});
    if (!std::isfinite(v)) throw ConfigError("'" + path + "' evaluates to a non-finite value");
    return v;
  }
  throw ConfigError("'" + path + "' must be a number or a constant expression");
}

inline double number_at(const json& doc, const std::string& path) { return number(at(doc, path), path); }

inline double positive_at(const json& doc, const std::string& path) {
  const double v = number_at(doc, path);
  if (!(v > 0.0)) throw ConfigError("'" + path + "' must be > 0");
  return v;
}

inline std::size_t count_at(const json& doc, const std::string& path, std::size_t min = 1) {
  const json& j = at(doc, path);
  if (!j.is_number_integer() || j.get<long long>() < static_cast<long long>(min))
    throw ConfigError("'" + path + "' must be an integer >= " + std::to_string(min));
  return j.get<std::size_t>();
}

inline bool flag_at(const json& doc, const std::string& path) {
  const json& j = at(doc, path);
  if (!j.is_boolean()) throw ConfigError("'" + path + "' must be a boolean");
  return j.get<bool>();
}

inline std::string string_at(const json& doc, const std::string& path) {
  const json& j = at(doc, path);
  if (!j.is_string()) throw ConfigError("'" + path + "' must be a string");
  return j.get<std::string>();
}

inline std::string expression_text(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << j.get<double>();
    return os.str();
  }
  throw ConfigError("'" + path + "' must be an expression string");
}

/// Variable names for formulas in x (and optionally the control direction e).
/// In one dimension both x and x1 (e and e1) refer to the single coordinate.
inline std::vector<std::string> variable_names(int n, int m = 0) {
  std::vector<std::string> names;
  if (n == 1) names = {"x", "x1"};
  else
    for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  if (m == 1) {
    names.push_back("e");
    names.push_back("e1");
  } else {
    for (int i = 1; i <= m; ++i) names.push_back("e" + std::to_string(i));
  }
  return names;
}

inline std::vector<double> variable_values(const State& x, const Control* e = nullptr) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(x.size() + 2 + (e ? e->size() + 1 : 0)));
  if (x.size() == 1) v = {x[0], x[0]};
  else v.assign(x.data(), x.data() + x.size());
  if (e) {
    if (e->size() == 1) {
      v.push_back((*e)[0]);
      v.push_back((*e)[0]);
    } else {
      v.insert(v.end(), e->data(), e->data() + e->size());
    }
  }
  return v;
}

inline Expression compile_at(const json& j, const std::string& path, const std::vector<std::string>& names) {
  return Expression::compile(expression_text(j, path), names);
}

/// Scalar function of the state.
inline std::function<double(const State&)> state_function(const json& j, const std::string& path, int n) {
  auto e = compile_at(j, path, variable_names(n));
  return [e](const State& x) { return e(variable_values(x)); };
}

/// Scalar function of one named variable.
inline std::function<double(double)> scalar_function(const json& j, const std::string& path, const std::string& var) {
  auto e = compile_at(j, path, {var});
  return [e](double r) { return e({r}); };
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError("'" + path + "' must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// ---------------------------------------------------------------------------
// System
// ---------------------------------------------------------------------------

struct SystemBundle {
  ControlPolynomialSystem system;
  Target target;
};

inline Target build_target(const json& t) {
  const std::string type = t.contains("type") ? string_at(t, "type") : "origin";
  if (type == "origin") return Target::origin();
  if (type == "ball") return Target::ball(positive_at(t, "radius"));
  throw ConfigError("unknown target type '" + type + "'");
}

inline SystemBundle build_system(const json& doc) {
  const json& s = at(doc, "system");
  if (s.is_string()) {
    if (s.get<std::string>() == "cubic-damped") return {example::cubic_damped(), Target::origin()};
    throw ConfigError("unknown catalog system '" + s.get<std::string>() + "'");
  }
  if (!s.is_object()) throw ConfigError("'system' must be a catalog name or an object");
  const auto n = static_cast<int>(count_at(s, "n"));
  const auto m = static_cast<int>(count_at(s, "m"));
  const auto d = static_cast<int>(count_at(s, "d"));
  const std::string cone = s.contains("cone") ? string_at(s, "cone") : "whole";
  ConeTest cone_test;
  if (cone == "whole") cone_test = cones::whole_space();
  else if (cone == "nonnegative") cone_test = cones::nonnegative();
  else throw ConfigError("unknown cone '" + cone + "'");
  const json& terms = at(s, "terms");
  if (!terms.is_array() || terms.empty()) throw ConfigError("'system.terms' must be a non-empty array");
  const auto names = variable_names(n, m);
  std::vector<PolynomialTerm> out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string path = "system.terms[" + std::to_string(i) + "]";
    const json& t = terms[i];
    const json& kj = at(t, "k");
    if (!kj.is_number_integer() || kj.get<int>() < 0 || kj.get<int>() > d)
      throw ConfigError("'" + path + ".k' must be an integer in [0, d]");
    const json& f = at(t, "f");
    if (!f.is_array() || static_cast<int>(f.size()) != n) throw ConfigError("'" + path + ".f' needs n expressions");
    std::vector<Expression> comps;
    for (std::size_t c = 0; c < f.size(); ++c) comps.push_back(compile_at(f[c], path + ".f", names));
    out.push_back({kj.get<int>(), [comps, n](const State& x, const Control& e) {
                     const auto vals = variable_values(x, &e);
                     State v(n);
                     for (int c = 0; c < n; ++c) v[c] = comps[static_cast<std::size_t>(c)](vals);
                     return v;
                   }});
  }
  const std::string name = s.contains("name") ? string_at(s, "name") : "inline";
  Target target = s.contains("target") ? build_target(s["target"]) : Target::origin();
  try {
    return {ControlPolynomialSystem(n, m, d, std::move(out), std::move(cone_test), name), std::move(target)};
  } catch (const InvariantError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Loaded configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  json doc;
  SystemBundle sys;
  DynamicsMode mode = DynamicsMode::Original;
  std::uint64_t seed = 1;
  SimOptions sim;
  unsigned jobs = 1;

  [[nodiscard]] int n() const { return sys.system.state_dim(); }
  [[nodiscard]] int m() const { return sys.system.control_dim(); }
};

inline DynamicsMode parse_mode(const std::string& s) {
  if (s == "original") return DynamicsMode::Original;
  if (s == "rescaled") return DynamicsMode::Rescaled;
  if (s == "extended") return DynamicsMode::Extended;
  throw ConfigError("mode must be original, rescaled or extended, got '" + s + "'");
}

/// Builds the configuration from an already merged document.
inline RunConfig from_document(json doc, unsigned jobs = 1) {
  validate_keys(doc);
  RunConfig cfg{json{}, build_system(doc), DynamicsMode::Original, 1, SimOptions{}, 1};
  cfg.mode = parse_mode(string_at(doc, "mode"));
  const json& seed = at(doc, "seed");
  if (!seed.is_number_integer() || seed.get<long long>() < 0) throw ConfigError("'seed' must be a non-negative integer");
  cfg.seed = seed.get<std::uint64_t>();
  cfg.sim.target_tol = positive_at(doc, "tolerances.target_tol");
  cfg.sim.blowup_norm = positive_at(doc, "tolerances.blowup_norm");
  cfg.sim.min_step = positive_at(doc, "tolerances.min_step");
  cfg.sim.integrator_abs_tol = positive_at(doc, "tolerances.abs_tol");
  cfg.sim.integrator_rel_tol = positive_at(doc, "tolerances.rel_tol");
  cfg.sim.initial_step = positive_at(doc, "tolerances.initial_step");
  cfg.jobs = std::max(1u, jobs);
  cfg.doc = std::move(doc);
  return cfg;
}

inline json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Defaults, then the file (if any), then each --set override, then validation.
inline RunConfig load(const std::optional<json>& user, const std::vector<std::string>& sets, unsigned jobs = 1) {
  json doc = default_document();
  if (user) {
    if (!user->is_object()) throw ConfigError("config root must be an object");
    validate_keys(*user);
    detail::merge(doc, *user, "");
  }
  for (const auto& s : sets) apply_set(doc, s);
  return from_document(std::move(doc), jobs);
}

// ---------------------------------------------------------------------------
// Block readers
// ---------------------------------------------------------------------------

inline LyapunovCandidate candidate(const RunConfig& cfg) {
  const json& c = at(cfg.doc, "clf");
  const int n = cfg.n();
  LyapunovCandidate cand;
  cand.W = state_function(at(c, "W"), "clf.W", n);
  const json& grad = at(c, "grad");
  if (!grad.is_array() || static_cast<int>(grad.size()) != n) throw ConfigError("'clf.grad' needs n expressions");
  std::vector<Expression> comps;
  for (const auto& g : grad) comps.push_back(compile_at(g, "clf.grad", variable_names(n)));
  cand.subgradient = [comps, n](const State& x) {
    const auto vals = variable_values(x);
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p[i] = comps[static_cast<std::size_t>(i)](vals);
    return std::vector<Eigen::VectorXd>{p};
  };
  cand.gamma = scalar_function(at(c, "gamma"), "clf.gamma", "r");
  return cand;
}

inline KLFunction beta(const RunConfig& cfg) {
  auto e = compile_at(at(cfg.doc, "beta"), "beta", {"R", "t"});
  // strictness is probed numerically at a few radii
  bool strict = true;
  for (double r : {1e-3, 1e-1, 1.0, 10.0}) strict = strict && e({r, 0.0}) > r;
  return KLFunction([e](double R, double t) { return e({R, t}); }, strict);
}

/// Feedback described by a `feedback` node, matched to the run mode: original feedbacks are
/// lifted in extended mode and extended ones projected otherwise.
inline Feedback feedback(const RunConfig& cfg, const json& node, const std::string& path) {
  const auto& sys = cfg.sys.system;
  const int n = cfg.n(), m = cfg.m();
  const std::string type = string_at(node, "type");
  std::optional<Feedback> fb;
  if (type == "expression" || type == "constant") {
    const json& u = at(node, "u");
    if (!u.is_array() || static_cast<int>(u.size()) != m) throw ConfigError("'" + path + ".u' needs m entries");
    if (type == "constant") {
      Control c(m);
      for (int i = 0; i < m; ++i) c[i] = number(u[static_cast<std::size_t>(i)], path + ".u");
      fb = Feedback::constant(c);
    } else {
      std::vector<Expression> comps;
      for (const auto& e : u) comps.push_back(compile_at(e, path + ".u", variable_names(n)));
      fb = Feedback::original([comps, m](const State& x) {
        const auto vals = variable_values(x);
        Control c(m);
        for (int i = 0; i < m; ++i) c[i] = comps[static_cast<std::size_t>(i)](vals);
        return c;
      });
    }
  } else if (type == "extended") {
    auto w0 = compile_at(at(node, "w0"), path + ".w0", variable_names(n));
    const json& w = at(node, "w");
    if (!w.is_array() || static_cast<int>(w.size()) != m) throw ConfigError("'" + path + ".w' needs m entries");
    std::vector<Expression> comps;
    for (const auto& e : w) comps.push_back(compile_at(e, path + ".w", variable_names(n)));
    fb = Feedback::extended([w0, comps, m](const State& x) {
      const auto vals = variable_values(x);
      Control c(m);
      for (int i = 0; i < m; ++i) c[i] = comps[static_cast<std::size_t>(i)](vals);
      return ExtendedControl::make(w0(vals), c, 1e-9);
    });
  } else if (type == "synthesized") {
    const auto cand = candidate(cfg);
    const json& nj = node.contains("N") ? node["N"] : at(cfg.doc, "synthesize.N");
    const auto n_fn = scalar_function(nj, path + ".N", "r");
    const double mesh = node.contains("mesh") ? positive_at(node, "mesh") : number_at(cfg.doc, "synthesize.mesh");
    const auto grid = ControlGrid::extended(sys, mesh);
    fb = Feedback::extended([&sys, cand, n_fn, grid](const State& x) {
      return synthesize_feedback_extended(sys, cand, n_fn, x, grid).control;
    });
  } else {
    throw ConfigError("unknown feedback type '" + type + "'");
  }
  const bool want_extended = cfg.mode == DynamicsMode::Extended;
  if (want_extended && fb->kind() == FeedbackKind::Original) return feedback_to_extended(sys.growth(), *fb);
  if (!want_extended && fb->kind() == FeedbackKind::Extended) return project_feedback(sys.growth(), *fb);
  return *fb;
}

inline State initial_state(const RunConfig& cfg) {
  const auto z = number_list(at(cfg.doc, "simulate.z"), "simulate.z");
  if (static_cast<int>(z.size()) != cfg.n()) throw ConfigError("'simulate.z' needs n entries");
  return Eigen::Map<const State>(z.data(), static_cast<Eigen::Index>(z.size()));
}

inline Partition partition(const RunConfig& cfg, double horizon) {
  const json& p = at(cfg.doc, "simulate.partition");
  const std::string type = string_at(p, "type");
  const double delta = positive_at(p, "delta");
  if (delta > horizon) throw ConfigError("'simulate.partition.delta' exceeds the horizon");
  if (type == "uniform") return uniform_partition(delta, horizon);
  if (type == "random") {
    std::uint64_t seed = cfg.seed;
    if (p.contains("seed")) {
      if (!p["seed"].is_number_integer()) throw ConfigError("'simulate.partition.seed' must be an integer");
      seed = p["seed"].get<std::uint64_t>();
    }
    return random_partition(delta, horizon, seed);
  }
  throw ConfigError("unknown partition type '" + type + "'");
}

}  // namespace uctl::config
