#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ppde/functionals.hpp"
#include "ppde/smooth.hpp"
#include "ppde/viscosity.hpp"

namespace ppde {

// Catalog references with their parameters, as read from a config document.
// `scale` and `offset` decorate any base functional (offset moves terminal
// data for ordered pairs, scale = -1 flips obstacles).
struct FunctionalSpec {
  std::string name = "terminal";
  int coord = 0;
  double time = 0.0;    // fixed-time sample
  double strike = 0.0;  // put payoff
  double scale = 1.0;
  double offset = 0.0;
};

struct GeneratorSpec {
  std::string name = "heat";
  double shift = 0.0;  // constant added to the dynamics
};

// One experiment as described by a JSON document.  `expect` carries named
// numeric acceptance bounds, interpreted per kind by run_experiment; a run
// with a failed bound reports passed = false and the tool exits nonzero.
struct ExperimentConfig {
  std::string kind;
  std::string name;
  double horizon = 1.0;
  std::vector<int> steps{8};
  double bound = 0.0;           // drift allowance L
  std::string side = "upper";   // expectation side when L > 0
  std::string backend = "auto";  // tree | lattice | auto (by step count)
  std::string mode;              // scheme: certify; check-viscosity: equivalence
  std::string solve = "bsde";    // converge: which solver is refined
  std::uint64_t seed = 0;
  int trials = 0;
  double tolerance = 0.0;  // 0 keeps the module defaults
  double reference = 0.0;
  bool has_reference = false;
  double delta = 1.0;  // tilt size of the candidate family
  std::vector<double> epsilons;
  FunctionalSpec functional;
  FunctionalSpec functional_b;
  bool has_functional_b = false;
  GeneratorSpec generator;
  std::vector<std::pair<int, std::uint64_t>> points;  // tree nodes (level, id)
  Localization window{0.0, 0};  // max_steps 0: module defaults at run time
  JetSearch search;             // empty axes: default jet grid
  std::map<std::string, std::vector<double>> expect;
  std::string out_dir = "reports";
};

// Parsing rejects unknown keys and malformed fields with the offending field
// named; validation checks catalog references and numeric constraints
// (step counts, point ids, L sqrt(h) <= 1 where expectations are taken).
ExperimentConfig parse_experiment(const std::string& text);
ExperimentConfig load_experiment(const std::string& path);
void validate_experiment(const ExperimentConfig& config);

// Catalog lookups shared by the runner, the tests, and the tool.
PathFunctional functional_from_spec(const FunctionalSpec& spec);
Generator generator_from_spec(const GeneratorSpec& spec, double bound);
std::string catalog_text();

struct CheckOutcome {
  std::string name;
  double observed = 0.0;
  double bound = 0.0;
  bool at_most = true;  // observed <= bound, else observed >= bound
  bool pass = false;
};

// Everything a run produces.  All numeric content is deterministic for a
// fixed (config, seed) and thread budget independent; the wall time is the
// one nondeterministic field and stays out of report_body_json.
struct RunReport {
  std::string kind;
  std::string name;
  std::string config_echo;  // canonical serialized config
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<std::string> row_labels;  // optional, parallel to rows
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> scalars;
  std::vector<std::map<std::string, double>> witnesses;
  std::vector<CheckOutcome> checks;
  bool passed = true;
  std::string version;
  double wall_ms = 0.0;
};

RunReport run_experiment(const ExperimentConfig& config);

std::string report_body_json(const RunReport& report);
std::string report_json(const RunReport& report);  // body plus wall_time_ms
void write_table_csv(std::ostream& os, const RunReport& report);

// <name>.json and <name>.csv under dir (created if missing); returns the
// path of the JSON report.
std::string write_report_files(const RunReport& report, const std::string& dir);

}  // namespace ppde
