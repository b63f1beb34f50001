// Command line front end: run experiment configs, validate them, or list the
// built-in catalogs.  Exit codes: 0 all checks pass, 1 config or IO problem,
// 2 the run finished but a declared bound failed.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ppde/errors.hpp"
#include "ppde/experiment.hpp"
#include "ppde/version.hpp"

namespace {

void print_summary(const ppde::RunReport& rep) {
  std::cout << rep.kind << " '" << rep.name << "': " << rep.rows.size() << " rows";
  for (const auto& [key, value] : rep.scalars) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    std::cout << "\n  " << key << " = " << buf;
  }
  std::cout << "\n";
  for (const auto& c : rep.checks) {
    char obs[32], bnd[32];
    std::snprintf(obs, sizeof obs, "%.12g", c.observed);
    std::snprintf(bnd, sizeof bnd, "%.12g", c.bound);
    std::cout << (c.pass ? "  [ok]   " : "  [FAIL] ") << c.name << ": " << obs << " "
              << (c.at_most ? "<=" : ">=") << " " << bnd << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"path-dependent PDE experiment runner"};
  app.set_version_flag("--version", std::string(ppde::version_string));
  app.require_subcommand(1);

  std::string run_path, out_dir;
  bool has_seed = false;
  std::uint64_t seed = 0;
  CLI::App* run = app.add_subcommand("run", "run a config and write its report");
  run->add_option("config", run_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "report directory (default: the config's 'out')");
  run->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    has_seed = true;
  });

  std::string check_path;
  CLI::App* validate = app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config", check_path, "experiment config (JSON)")->required();

  app.add_subcommand("list", "print the functional, generator, and kind catalogs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("list")) {
      std::cout << ppde::catalog_text();
      return 0;
    }
    if (app.got_subcommand("validate")) {
      ppde::ExperimentConfig cfg = ppde::load_experiment(check_path);
      ppde::validate_experiment(cfg);
      std::cout << "ok: " << cfg.kind << " '" << cfg.name << "'\n";
      return 0;
    }
    ppde::ExperimentConfig cfg = ppde::load_experiment(run_path);
    if (has_seed) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    ppde::RunReport rep = ppde::run_experiment(cfg);
    std::string written = ppde::write_report_files(rep, cfg.out_dir);
    print_summary(rep);
    std::cout << "report: " << written << "\n";
    std::cout << (rep.passed ? "PASS" : "FAIL") << "\n";
    std::cerr << "wall time " << rep.wall_ms << " ms\n";
    return rep.passed ? 0 : 2;
  } catch (const ppde::input_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
