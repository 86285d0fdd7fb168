#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "uctl/acceptance.hpp"
#include "uctl/commands.hpp"
#include "uctl/config.hpp"

using namespace uctl;
using config::json;

namespace {

config::RunConfig load(const std::vector<std::string>& sets, std::optional<json> user = std::nullopt) {
  return config::load(user, sets, 1);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("defaults describe the cubic-damped fixture", "[config]") {
  const auto cfg = load({});
  CHECK(cfg.n() == 1);
  CHECK(cfg.m() == 1);
  CHECK(cfg.mode == DynamicsMode::Original);
  CHECK(config::number_at(cfg.doc, "simulate.partition.delta") == std::log(std::numbers::phi));
  const auto cand = config::candidate(cfg);
  CHECK(cand.W(example::scalar(-3.0)) == 3.0);
  CHECK(cand.gamma(1.0) == 1.0 / 6.0);
  const auto fb = config::feedback(cfg, config::at(cfg.doc, "feedback"), "feedback");
  CHECK(fb.kind() == FeedbackKind::Original);
  CHECK(fb.original_value(example::scalar(0.5))[0] == 8.0);
  CHECK_FALSE(config::beta(cfg).strict_at_zero());
  CHECK(config::beta(load({"beta=2*R*exp(-t/2)"})).strict_at_zero());
}

TEST_CASE("file overlay merges objects and replaces tagged blocks", "[config]") {
  const auto user = json::parse(R"({"simulate": {"horizon": 3, "partition": {"type": "random", "delta": 0.2}},
                                    "feedback": {"type": "constant", "u": [2]}})");
  const auto cfg = load({}, user);
  CHECK(config::number_at(cfg.doc, "simulate.horizon") == 3.0);
  CHECK(config::at(cfg.doc, "simulate.z").size() == 1);
  CHECK(config::string_at(cfg.doc, "simulate.partition.type") == "random");
  CHECK_FALSE(config::at(cfg.doc, "feedback").contains("w0"));
  const auto p = config::partition(cfg, 3.0);
  CHECK(p.end() == 3.0);
  CHECK(p.diameter() <= 0.2);
}

TEST_CASE("--set parses JSON values and falls back to strings", "[config]") {
  const auto cfg = load({"simulate.horizon=4", "clf.gamma=r^3", "mode=extended", "simulate.z=[2]"});
  CHECK(config::number_at(cfg.doc, "simulate.horizon") == 4.0);
  CHECK(config::string_at(cfg.doc, "clf.gamma") == "r^3");
  CHECK(cfg.mode == DynamicsMode::Extended);
  CHECK(config::initial_state(cfg)[0] == 2.0);
  const auto fb = config::feedback(cfg, config::at(cfg.doc, "feedback"), "feedback");
  CHECK(fb.kind() == FeedbackKind::Extended);
}

TEST_CASE("unknown keys and malformed values are rejected", "[config]") {
  CHECK_THROWS_AS(load({"simulate.horizn=4"}), ConfigError);
  CHECK_THROWS_AS(load({}, json::parse(R"({"bogus": 1})")), ConfigError);
  CHECK_THROWS_AS(load({}, json::parse(R"({"verify_clf": {"radius": 1}})")), ConfigError);
  CHECK_THROWS_AS(load({"no-equals-sign"}), ConfigError);
  CHECK_THROWS_AS(load({"system=lorenz"}), ConfigError);
  CHECK_THROWS_AS(load({"mode=sideways"}), ConfigError);
  CHECK_THROWS_AS(load({"seed=-1"}), ConfigError);
  CHECK_THROWS_AS(load({"tolerances.rel_tol=0"}), ConfigError);
  const auto cfg = load({"clf.W=abs(y)"});
  CHECK_THROWS_AS(config::candidate(cfg), ConfigError);
  CHECK_THROWS_AS(config::read_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("inline systems compile from expressions", "[config]") {
  const auto user = json::parse(R"({"system": {"n": 1, "m": 1, "d": 1, "name": "inline-cubic",
      "cone": "nonnegative", "terms": [{"k": 0, "f": ["x"]}, {"k": 1, "f": ["-x^3*e"]}]}})");
  const auto cfg = load({}, user);
  const auto ref = example::cubic_damped();
  for (double x : {-2.0, 0.3, 1.5})
    for (double u : {0.0, 0.5, 2.0, 30.0}) {
      const double a = eval_dynamics(cfg.sys.system, example::scalar(x), Control::Constant(1, u))[0];
      const double b = eval_dynamics(ref, example::scalar(x), Control::Constant(1, u))[0];
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
    }
  CHECK_THROWS_AS(load({}, json::parse(R"({"system": {"n": 1, "m": 1, "d": 1, "terms": [{"k": 2, "f": ["x"]}]}})")),
                  ConfigError);
}

TEST_CASE("simulate writes the trajectory CSV", "[commands]") {
  const auto res = commands::run_simulate(load({"simulate.horizon=2", "simulate.svg=true"}));
  CHECK(res.exit_code == commands::kExitOk);
  REQUIRE(res.files.count("trajectory.csv") == 1);
  REQUIRE(res.files.count("trajectory.svg") == 1);
  const auto rows = lines(res.files.at("trajectory.csv"));
  CHECK(rows.front() == "t,x_1,u_1,d_to_target");
  CHECK(rows.back().rfind("# status=HorizonEnd", 0) == 0);
  CHECK(rows[1].rfind("0,1,2,1", 0) == 0);
  CHECK(res.files.at("trajectory.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("extended-mode simulate labels w columns", "[commands]") {
  const auto res = commands::run_simulate(load({"mode=extended", "simulate.horizon=1"}));
  CHECK(lines(res.files.at("trajectory.csv")).front() == "t,x_1,w0,w_1,d_to_target");
}

TEST_CASE("simulate maps blow-up to the runtime exit code", "[commands]") {
  const auto blowup = json::parse(R"({"system": {"n": 1, "m": 1, "d": 1, "terms": [{"k": 0, "f": ["x^2"]}]},
      "feedback": {"type": "constant", "u": [0]},
      "simulate": {"horizon": 3, "fail_on_blowup": true}})");
  const auto res = commands::run_simulate(load({}, blowup));
  CHECK(res.exit_code == commands::kExitRuntime);
  CHECK(lines(res.files.at("trajectory.csv")).back().rfind("# status=BlowUp", 0) == 0);
}

TEST_CASE("verify-clf report shape", "[commands]") {
  const auto res = commands::run_verify_clf(load({"verify_clf.radial=20"}));
  CHECK(res.exit_code == commands::kExitOk);
  const auto report = json::parse(res.files.at("clf_report.json"));
  for (const char* key : {"region", "mesh", "worst_margin", "violations", "N_curve"}) CHECK(report.contains(key));
  CHECK(report["N_curve"].size() == 9);
  CHECK(report["worst_margin"].get<double>() < 0.0);
  const auto bad = commands::run_verify_clf(load({"verify_clf.radial=20", "clf.gamma=r^3"}));
  CHECK(bad.exit_code == commands::kExitViolations);
  const auto v = json::parse(bad.files.at("clf_report.json"))["violations"][0];
  for (const char* key : {"x", "p", "H", "gamma_W"}) CHECK(v.contains(key));
}

TEST_CASE("synthesize table and exit codes", "[commands]") {
  const auto res = commands::run_synthesize(load({"synthesize.count=5"}));
  CHECK(res.exit_code == commands::kExitOk);
  const auto rows = lines(res.files.at("feedback.csv"));
  CHECK(rows.front() == "x_1,w0,w_1,K_1,margin,decreasing");
  CHECK(rows.size() == 6);
  const auto bad = commands::run_synthesize(load({"synthesize.count=5", "synthesize.N=1"}));
  CHECK(bad.exit_code == commands::kExitViolations);
}

TEST_CASE("certify-stab verdicts and pair validation", "[commands]") {
  const auto good = commands::run_certify_stab(load({"certify_stab.seeds_per_pair=2", "certify_stab.random_partitions=1"}));
  CHECK(good.exit_code == commands::kExitOk);
  const auto report = json::parse(good.files.at("stab_report.json"));
  CHECK(report["verdict"] == "pass");
  for (const char* key : {"R", "r", "delta", "seeds_tested", "partitions_tested", "violations"})
    CHECK(report["pairs"][0].contains(key));
  CHECK_THROWS_AS(commands::run_certify_stab(load({R"(certify_stab.pairs=[{"R":1,"r":2}])"})), ConfigError);
}

TEST_CASE("example command reports every criterion", "[commands]") {
  const auto res = acceptance::run_example(load({}));
  const auto rows = lines(res.files.at("example_report.txt"));
  CHECK(rows.size() == 10);
  CHECK(res.exit_code == commands::kExitOk);
}
