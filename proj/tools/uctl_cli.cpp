// Command-line front end: simulate, verify-clf, synthesize, certify-stab, example.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uctl/uctl.hpp"

namespace {

using uctl::commands::CommandResult;
using Runner = CommandResult (*)(const uctl::config::RunConfig&);

void write_files(const CommandResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : res.files) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    if (!out) throw uctl::Error("cannot write " + (dir / name).string());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-and-hold and impulsive-control toolkit for control-polynomial systems"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  unsigned jobs = 1;
  std::string output = ".";
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override KEY=VALUE (dotted key, JSON or string value)")->take_all();
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--output", output, "Output directory");
  app.fallthrough();

  const std::vector<std::pair<std::string, std::pair<std::string, Runner>>> commands{
      {"simulate", {"Simulate a trajectory and write CSV (and optional SVG)", uctl::commands::run_simulate}},
      {"verify-clf", {"Check a control-Lyapunov candidate on an annulus", uctl::commands::run_verify_clf}},
      {"synthesize", {"Synthesize a stabilizing feedback on a grid", uctl::commands::run_synthesize}},
      {"certify-stab", {"Certify sample-and-hold stabilizability for (R, r) pairs", uctl::commands::run_certify_stab}},
      {"example", {"Run the cubic-damped acceptance suite", uctl::acceptance::run_example}},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, entry] : commands) subs.push_back(app.add_subcommand(name, entry.first));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : uctl::commands::kExitConfig;
  }

  try {
    std::optional<uctl::config::json> user;
    if (!config_path.empty()) user = uctl::config::read_file(config_path);
    const auto cfg = uctl::config::load(user, sets, jobs);
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const auto res = commands[i].second.second(cfg);
      write_files(res, output);
      std::cout << res.summary << "\n";
      return res.exit_code;
    }
  } catch (const uctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return uctl::commands::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return uctl::commands::kExitRuntime;
  }
  return uctl::commands::kExitConfig;
}
