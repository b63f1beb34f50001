#include "ppde/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ppde/errors.hpp"
#include "ppde/snell.hpp"
#include "ppde/solvers.hpp"
#include "ppde/tree.hpp"
#include "ppde/version.hpp"

namespace ppde {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw input_error("config field '" + field + "': " + what);
}

double as_number(const json& j, const std::string& field) {
  if (!j.is_number()) bad_field(field, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) bad_field(field, "expected an integer");
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& field) {
  if (!j.is_string()) bad_field(field, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_number_list(const json& j, const std::string& field) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
    return out;
  }
  if (!j.is_array()) bad_field(field, "expected a number or an array of numbers");
  for (const auto& v : j) {
    if (!v.is_number()) bad_field(field, "expected numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

FunctionalSpec parse_functional(const json& j, const std::string& field) {
  FunctionalSpec spec;
  if (j.is_string()) {
    spec.name = j.get<std::string>();
    return spec;
  }
  if (!j.is_object()) bad_field(field, "expected a catalog name or an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "name")
      spec.name = as_string(it.value(), field + ".name");
    else if (key == "coord")
      spec.coord = as_int(it.value(), field + ".coord");
    else if (key == "time")
      spec.time = as_number(it.value(), field + ".time");
    else if (key == "strike")
      spec.strike = as_number(it.value(), field + ".strike");
    else if (key == "scale")
      spec.scale = as_number(it.value(), field + ".scale");
    else if (key == "offset")
      spec.offset = as_number(it.value(), field + ".offset");
    else
      bad_field(field + "." + key, "unknown key");
  }
  return spec;
}

GeneratorSpec parse_generator(const json& j, const std::string& field) {
  GeneratorSpec spec;
  if (j.is_string()) {
    spec.name = j.get<std::string>();
    return spec;
  }
  if (!j.is_object()) bad_field(field, "expected a catalog name or an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "name")
      spec.name = as_string(it.value(), field + ".name");
    else if (key == "shift")
      spec.shift = as_number(it.value(), field + ".shift");
    else
      bad_field(field + "." + key, "unknown key");
  }
  return spec;
}

json spec_json(const FunctionalSpec& s) {
  json j;
  j["name"] = s.name;
  j["coord"] = s.coord;
  j["time"] = s.time;
  j["strike"] = s.strike;
  j["scale"] = s.scale;
  j["offset"] = s.offset;
  return j;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["name"] = c.name;
  j["horizon"] = c.horizon;
  j["steps"] = c.steps;
  j["L"] = c.bound;
  j["side"] = c.side;
  j["backend"] = c.backend;
  if (!c.mode.empty()) j["mode"] = c.mode;
  if (c.kind == "converge") j["solve"] = c.solve;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["tolerance"] = c.tolerance;
  if (c.has_reference) j["reference"] = c.reference;
  j["delta"] = c.delta;
  if (!c.epsilons.empty()) j["epsilons"] = c.epsilons;
  j["functional"] = spec_json(c.functional);
  if (c.has_functional_b) j["functional_b"] = spec_json(c.functional_b);
  json g;
  g["name"] = c.generator.name;
  g["shift"] = c.generator.shift;
  j["generator"] = g;
  if (!c.points.empty()) {
    json pts = json::array();
    for (const auto& [level, id] : c.points) pts.push_back(json::array({level, id}));
    j["points"] = pts;
  }
  if (c.window.max_steps > 0) {
    json w;
    w["radius"] = c.window.radius;
    w["max_steps"] = c.window.max_steps;
    j["window"] = w;
  }
  if (!c.search.time_slopes.empty() || !c.search.slopes.empty() ||
      !c.search.curvatures.empty()) {
    json s;
    s["time_slopes"] = c.search.time_slopes;
    s["slopes"] = c.search.slopes;
    s["curvatures"] = c.search.curvatures;
    s["seed_from_candidate"] = c.search.seed_from_candidate;
    j["search"] = s;
  }
  json e;
  for (const auto& [key, vals] : c.expect) e[key] = vals;
  j["expect"] = e;
  // The report directory is where results land, not what was computed; keep
  // it out of the echo so reruns compare byte for byte.
  return j;
}

// ---------------------------------------------------------------------------
// Catalogs.

const std::set<std::string>& functional_names() {
  static const std::set<std::string> names = {
      "terminal",    "terminal-square", "fixed-time", "running-max", "running-min",
      "average",     "pathwise-integral", "put",      "zero"};
  return names;
}

const std::set<std::string>& generator_names() {
  static const std::set<std::string> names = {"heat", "decay", "drift-hjb"};
  return names;
}

PathFunctional base_functional(const FunctionalSpec& s) {
  if (s.name == "terminal") return terminal_value(s.coord);
  if (s.name == "terminal-square") return terminal_square(s.coord);
  if (s.name == "fixed-time") return value_at_time(s.time, s.coord);
  if (s.name == "running-max") return running_max(s.coord);
  if (s.name == "running-min") return running_min(s.coord);
  if (s.name == "average") return time_average(s.coord);
  if (s.name == "pathwise-integral") return pathwise_integral();
  if (s.name == "zero") return zero_functional();
  if (s.name == "put") {
    PathFunctional put("put", 1, [k = s.strike](const PathView& w) {
      return std::max(k - w.at(w.last_index()), 0.0);
    });
    put.with_lipschitz(1.0).with_terminal_profile(
        [k = s.strike](double x) { return std::max(k - x, 0.0); });
    return put;
  }
  throw input_error("unknown functional '" + s.name + "'");
}

// ---------------------------------------------------------------------------
// Check bookkeeping.

void add_check(RunReport& rep, const std::string& name, double observed, bool at_most,
               double bound) {
  CheckOutcome c;
  c.name = name;
  c.observed = observed;
  c.bound = bound;
  c.at_most = at_most;
  c.pass = at_most ? observed <= bound : observed >= bound;
  if (!c.pass) rep.passed = false;
  rep.checks.push_back(std::move(c));
}

const std::vector<double>* find_expect(const ExperimentConfig& cfg, const std::string& key) {
  auto it = cfg.expect.find(key);
  return it == cfg.expect.end() ? nullptr : &it->second;
}

double verdict_code(Verdict v) {
  return v == Verdict::pass ? 0.0 : (v == Verdict::inconclusive ? 1.0 : 2.0);
}

// ---------------------------------------------------------------------------
// Shared value computations.

bool wants_tree(const ExperimentConfig& cfg, int n) {
  if (cfg.backend == "tree") return true;
  if (cfg.backend == "lattice") return false;
  return n <= max_tree_depth;
}

void require_tree_depth(int n) {
  if (n > max_tree_depth)
    throw input_error("the path tree stops at " + std::to_string(max_tree_depth) +
                      " steps; use the lattice backend");
}

bool is_running_extremum(const FunctionalSpec& s) {
  return s.name == "running-max" || s.name == "running-min";
}

double lookback_value(const TimeGrid& grid, const FunctionalSpec& spec) {
  const double a = spec.scale;
  const double b = spec.offset;
  if (spec.name == "running-max")
    return lookback_lattice(grid, [a, b](double, double m) { return a * m + b; });
  // The walk is symmetric, so min w and -max w share their law.
  return lookback_lattice(grid, [a, b](double, double m) { return a * (-m) + b; });
}

double heat_value(const ExperimentConfig& cfg, const PathFunctional& xi, int n) {
  TimeGrid grid(cfg.horizon, n);
  if (wants_tree(cfg, n)) {
    require_tree_depth(n);
    if (cfg.bound == 0.0) return solve_heat(xi, grid);
    ScenarioTree tree(grid);
    DriftBound bound(cfg.bound);
    return cfg.side == "upper" ? upper_expectation(tree, xi, bound).root
                               : lower_expectation(tree, xi, bound).root;
  }
  if (is_running_extremum(cfg.functional)) {
    if (cfg.bound != 0.0)
      throw input_error("a drift-bounded running extremum needs the tree backend");
    return lookback_value(grid, cfg.functional);
  }
  if (cfg.bound == 0.0) return solve_bsde_lattice(grid, xi, Generator::heat());
  if (cfg.side == "upper") return upper_expectation_lattice(grid, xi, DriftBound(cfg.bound));
  FunctionalSpec flipped = cfg.functional;
  flipped.scale = -flipped.scale;
  flipped.offset = -flipped.offset;
  return -upper_expectation_lattice(grid, functional_from_spec(flipped), DriftBound(cfg.bound));
}

double bsde_value(const ExperimentConfig& cfg, const PathFunctional& xi, const Generator& gen,
                  int n) {
  TimeGrid grid(cfg.horizon, n);
  if (wants_tree(cfg, n)) {
    require_tree_depth(n);
    ScenarioTree tree(grid);
    return solve_bsde(tree, xi, gen).root;
  }
  return solve_bsde_lattice(grid, xi, gen);
}

double scheme_value(const ExperimentConfig& cfg, const PathFunctional& xi, const Generator& gen,
                    int n) {
  TimeGrid grid(cfg.horizon, n);
  SchemeOperator op = scheme_for(gen);
  if (wants_tree(cfg, n)) {
    require_tree_depth(n);
    ScenarioTree tree(grid);
    return monotone_scheme(tree, xi, op).root;
  }
  if (!xi.has_terminal_profile())
    throw input_error("the lattice backend needs terminal data with a state profile");
  return lattice_scheme(grid, xi.terminal_profile(), op);
}

CandidateProcess candidate_for(const ExperimentConfig& cfg, const FunctionalSpec& which) {
  PathFunctional xi = functional_from_spec(which);
  if (cfg.generator.name == "heat" && cfg.generator.shift == 0.0)
    return candidate_martingale(xi.name(), xi);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  return candidate_semilinear(xi.name(), xi, gen);
}

std::vector<PathPoint> config_points(const ExperimentConfig& cfg, const ScenarioTree& tree) {
  std::vector<PathPoint> pts;
  if (cfg.points.empty()) {
    pts.push_back(PathPoint::origin(tree.grid()));
    return pts;
  }
  pts.reserve(cfg.points.size());
  for (const auto& [level, id] : cfg.points) pts.push_back(node_point(tree, level, id));
  return pts;
}

// ---------------------------------------------------------------------------
// Kind runners.

void run_heat_kind(const ExperimentConfig& cfg, RunReport& rep) {
  PathFunctional xi = functional_from_spec(cfg.functional);
  rep.columns = {"n", "h", "value"};
  for (int n : cfg.steps) {
    TimeGrid grid(cfg.horizon, n);
    rep.rows.push_back({static_cast<double>(n), grid.step(), heat_value(cfg, xi, n)});
  }
  rep.scalars["value"] = rep.rows.back()[2];

  if (const auto* e = find_expect(cfg, "value")) {
    double worst = 0.0;
    for (const auto& row : rep.rows) worst = std::max(worst, std::abs(row[2] - (*e)[0]));
    add_check(rep, "value_abs_error", worst, true, (*e)[1]);
  }
  if (const auto* e = find_expect(cfg, "below")) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& row : rep.rows) top = std::max(top, row[2]);
    add_check(rep, "largest_value", top, true, (*e)[0]);
  }
  if (const auto* e = find_expect(cfg, "increasing")) {
    double min_gain = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
      min_gain = std::min(min_gain, rep.rows[i][2] - rep.rows[i - 1][2]);
    add_check(rep, "smallest_refinement_gain", min_gain, false, e->empty() ? 0.0 : (*e)[0]);
  }
  if (const auto* e = find_expect(cfg, "gap_ratio")) {
    const auto* lim = find_expect(cfg, "below");
    double limit = (*lim)[0];
    double first_gap = 0.0, second_gap = 0.0;
    for (const auto& row : rep.rows) {
      if (row[0] == (*e)[0]) first_gap = limit - row[2];
      if (row[0] == (*e)[1]) second_gap = limit - row[2];
    }
    if (first_gap == 0.0 || second_gap == 0.0)
      throw input_error("expect.gap_ratio: the named step counts are not in 'steps'");
    double ratio = first_gap / second_gap;
    rep.scalars["gap_ratio"] = ratio;
    add_check(rep, "gap_ratio_low", ratio, false, (*e)[2]);
    add_check(rep, "gap_ratio_high", ratio, true, (*e)[3]);
  }
  if (const auto* e = find_expect(cfg, "frozen_after")) {
    double worst = 0.0;
    for (int n : cfg.steps) {
      require_tree_depth(n);
      TimeGrid grid(cfg.horizon, n);
      ScenarioTree tree(grid);
      const int cut = grid.index_of((*e)[0]);
      NodeTable<double> table = heat_sweep(tree, xi);
      tree.for_each_node([&](int level, std::uint64_t id, const PathView& w) {
        if (level < cut) return;
        worst = std::max(worst, std::abs(table.at(level, id) - w.at(cut)));
      });
    }
    add_check(rep, "frozen_tail_error", worst, true, (*e)[1]);
  }
}

void run_bsde_kind(const ExperimentConfig& cfg, RunReport& rep) {
  PathFunctional xi = functional_from_spec(cfg.functional);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  rep.columns = {"n", "h", "value"};
  for (int n : cfg.steps) {
    TimeGrid grid(cfg.horizon, n);
    rep.rows.push_back({static_cast<double>(n), grid.step(), bsde_value(cfg, xi, gen, n)});
  }
  rep.scalars["value"] = rep.rows.back()[2];

  if (const auto* e = find_expect(cfg, "value")) {
    double worst = 0.0;
    for (const auto& row : rep.rows) worst = std::max(worst, std::abs(row[2] - (*e)[0]));
    add_check(rep, "value_abs_error", worst, true, (*e)[1]);
  }
  if (const auto* e = find_expect(cfg, "error_coeff")) {
    double worst = 0.0;
    for (const auto& row : rep.rows)
      worst = std::max(worst, row[0] * std::abs(row[2] - cfg.reference));
    add_check(rep, "step_scaled_error", worst, true, (*e)[0]);
  }
  if (const auto* e = find_expect(cfg, "ratio_range")) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      double prev = std::abs(rep.rows[i - 1][2] - cfg.reference);
      double cur = std::abs(rep.rows[i][2] - cfg.reference);
      if (cur == 0.0) continue;
      double r = prev / cur;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    add_check(rep, "error_ratio_low", lo, false, (*e)[0]);
    add_check(rep, "error_ratio_high", hi, true, (*e)[1]);
  }
}

void run_converge_kind(const ExperimentConfig& cfg, RunReport& rep) {
  PathFunctional xi = functional_from_spec(cfg.functional);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  auto value_at = [&](int n) {
    if (cfg.solve == "heat") return heat_value(cfg, xi, n);
    if (cfg.solve == "scheme") return scheme_value(cfg, xi, gen, n);
    return bsde_value(cfg, xi, gen, n);
  };
  auto rows = convergence_study(value_at, cfg.reference, cfg.steps, cfg.horizon);
  rep.columns = {"n", "h", "value", "error", "ratio", "order"};
  for (const auto& r : rows)
    rep.rows.push_back({static_cast<double>(r.n), r.h, r.value, r.error, r.ratio, r.order});
  rep.scalars["value"] = rows.back().value;
  rep.scalars["error"] = rows.back().error;
  rep.scalars["order"] = rows.back().order;

  if (const auto* e = find_expect(cfg, "error_coeff")) {
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.n * r.error);
    add_check(rep, "step_scaled_error", worst, true, (*e)[0]);
  }
  if (const auto* e = find_expect(cfg, "ratio_range")) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      lo = std::min(lo, rows[i].ratio);
      hi = std::max(hi, rows[i].ratio);
    }
    add_check(rep, "error_ratio_low", lo, false, (*e)[0]);
    add_check(rep, "error_ratio_high", hi, true, (*e)[1]);
  }
  if (const auto* e = find_expect(cfg, "order_range")) {
    add_check(rep, "order_low", rows.back().order, false, (*e)[0]);
    add_check(rep, "order_high", rows.back().order, true, (*e)[1]);
  }
}

ObstacleProcess random_obstacle(const ScenarioTree& tree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ObstacleProcess obs;
  obs.values = NodeTable<double>(tree.depth());
  for (int l = 0; l <= tree.depth(); ++l)
    for (auto& v : obs.values.level(l)) v = u(rng);
  return obs;
}

void run_snell_kind(const ExperimentConfig& cfg, RunReport& rep) {
  DriftBound bound(cfg.bound);
  rep.columns = {"n",        "trial",       "root",        "skorokhod", "defect",
                 "min_dk",   "dominates",   "rule_gap",    "resolve_gap", "conservation"};
  double worst_skorokhod = 0.0, worst_defect = 0.0, worst_rule = 0.0, worst_resolve = 0.0;
  double worst_conservation = 0.0;
  bool all_dominate = true;

  for (int n : cfg.steps) {
    require_tree_depth(n);
    TimeGrid grid(cfg.horizon, n);
    ScenarioTree tree(grid);
    const int count = std::max(1, cfg.trials);
    for (int trial = 0; trial < count; ++trial) {
      ObstacleProcess obs =
          cfg.trials > 0
              ? random_obstacle(tree, cfg.seed + static_cast<std::uint64_t>(trial))
              : ObstacleProcess::from_functional(tree, functional_from_spec(cfg.functional));
      SnellEnvelope env = snell(tree, obs, bound);
      DoobMeyerCheck diag = doob_meyer(tree, env);
      StoppingTime rule = optimal_rule(tree, env);
      double rule_gap = std::abs(env.root - value_of_rule(tree, obs, rule, bound));
      double resolve_gap = std::abs(env.root - linear_snell_under(tree, obs, extremal_measure(env)));
      double conservation = 0.0;
      for (int level = 0; level <= n; ++level)
        conservation = std::max(
            conservation, std::abs(stopped_recursion_at(tree, env, rule, level) - env.root));

      rep.rows.push_back({static_cast<double>(n), static_cast<double>(trial), env.root,
                          diag.skorokhod_sum, diag.max_martingale_defect,
                          diag.min_compensator_increment, diag.envelope_dominates ? 1.0 : 0.0,
                          rule_gap, resolve_gap, conservation});
      worst_skorokhod = std::max(worst_skorokhod, std::abs(diag.skorokhod_sum));
      worst_defect = std::max(worst_defect, diag.max_martingale_defect);
      worst_rule = std::max(worst_rule, rule_gap);
      worst_resolve = std::max(worst_resolve, resolve_gap);
      worst_conservation = std::max(worst_conservation, conservation);
      all_dominate = all_dominate && diag.envelope_dominates;
    }
  }
  rep.scalars["root"] = rep.rows.front()[2];
  rep.scalars["worst_skorokhod"] = worst_skorokhod;
  rep.scalars["worst_defect"] = worst_defect;
  rep.scalars["worst_rule_gap"] = worst_rule;
  rep.scalars["worst_resolve_gap"] = worst_resolve;
  rep.scalars["worst_conservation"] = worst_conservation;
  rep.scalars["all_dominate"] = all_dominate ? 1.0 : 0.0;

  if (const auto* e = find_expect(cfg, "root"))
    add_check(rep, "root_abs_error", std::abs(rep.rows.front()[2] - (*e)[0]), true, (*e)[1]);
  if (const auto* e = find_expect(cfg, "skorokhod_tol"))
    add_check(rep, "worst_skorokhod", worst_skorokhod, true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "defect_tol"))
    add_check(rep, "worst_defect", worst_defect, true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "rule_tol"))
    add_check(rep, "worst_rule_gap", worst_rule, true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "resolve_tol"))
    add_check(rep, "worst_resolve_gap", worst_resolve, true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "conservation_tol"))
    add_check(rep, "worst_conservation", worst_conservation, true, (*e)[0]);
  if (find_expect(cfg, "dominates"))
    add_check(rep, "all_dominate", all_dominate ? 1.0 : 0.0, false, 1.0);
}

void run_scheme_solve(const ExperimentConfig& cfg, RunReport& rep) {
  PathFunctional xi = functional_from_spec(cfg.functional);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  rep.columns = {"n", "h", "root"};
  for (int n : cfg.steps) {
    TimeGrid grid(cfg.horizon, n);
    rep.rows.push_back({static_cast<double>(n), grid.step(), scheme_value(cfg, xi, gen, n)});
  }
  rep.scalars["root"] = rep.rows.back()[2];

  if (const auto* e = find_expect(cfg, "value")) {
    double worst = 0.0;
    for (const auto& row : rep.rows) worst = std::max(worst, std::abs(row[2] - (*e)[0]));
    add_check(rep, "root_abs_error", worst, true, (*e)[1]);
  }
  if (const auto* e = find_expect(cfg, "fd")) {
    if (!xi.has_terminal_profile())
      throw input_error("expect.fd: the reference needs terminal data with a state profile");
    FdConfig fd;
    fd.horizon = cfg.horizon;
    fd.space_cells = e->size() > 1 ? static_cast<int>((*e)[1]) : 300;
    double fd_value = cfg.generator.name == "drift-hjb"
                          ? markovian_fd_hjb(xi.terminal_profile(), cfg.bound, fd)
                          : markovian_fd_heat(xi.terminal_profile(), fd);
    rep.scalars["fd_value"] = fd_value;
    add_check(rep, "fd_abs_error", std::abs(rep.rows.back()[2] - fd_value), true, (*e)[0]);
  }
}

PathPoint walk_point(const TimeGrid& grid, const std::vector<int>& moves) {
  std::vector<double> prefix{0.0};
  const double s = std::sqrt(grid.step());
  double x = 0.0;
  for (int m : moves) {
    x += m ? s : -s;
    prefix.push_back(x);
  }
  return PathPoint(grid, 1, static_cast<int>(moves.size()), std::move(prefix));
}

void run_scheme_certify(const ExperimentConfig& cfg, RunReport& rep) {
  const int n = cfg.steps.front();
  TimeGrid grid(cfg.horizon, n);
  TimeGrid half(cfg.horizon, 2 * n);

  // Every jet in the default search grid, with and without a value shift.
  std::vector<Paraboloid> battery;
  for (const Jet& jet : JetSearch::defaults().enumerate())
    for (double c : {0.0, 0.7})
      battery.push_back(Paraboloid::quadratic1d(c, jet.time_slope, jet.slope, jet.curvature));

  // The same three anchor walks, each step split in two on the halved grid.
  std::vector<PathPoint> points = {walk_point(grid, {1}), walk_point(grid, {0, 1}),
                                   walk_point(grid, {1, 0, 1})};
  std::vector<PathPoint> half_points = {walk_point(half, {1, 1}),
                                        walk_point(half, {0, 0, 1, 1}),
                                        walk_point(half, {1, 1, 0, 0, 1, 1})};

  struct Entry {
    std::string label;
    Generator gen;
  };
  std::vector<Entry> entries;
  entries.push_back({"heat", Generator::heat()});
  entries.push_back({"drift-hjb", Generator::drift_hjb(cfg.bound)});
  entries.push_back({"semilinear-decay", Generator::decay()});

  rep.columns = {"op", "consistency", "consistency_half", "monotone_margin"};
  const int trials = cfg.trials > 0 ? cfg.trials : 10000;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    SchemeOperator op = scheme_for(entries[k].gen);
    double dev = 0.0, dev_half = 0.0;
    for (const Paraboloid& phi : battery) {
      for (const PathPoint& at : points)
        dev = std::max(dev, std::abs(consistency_deviation(entries[k].gen, op, phi, at, 0.3)));
      for (const PathPoint& at : half_points)
        dev_half =
            std::max(dev_half, std::abs(consistency_deviation(entries[k].gen, op, phi, at, 0.3)));
    }
    double margin =
        monotonicity_margin(op, grid, trials, static_cast<unsigned>(cfg.seed + 17 * k));
    rep.row_labels.push_back(entries[k].label);
    rep.rows.push_back({static_cast<double>(k), dev, dev_half, margin});
  }
  rep.scalars["exact_consistency"] = std::max(rep.rows[0][1], rep.rows[1][1]);
  rep.scalars["semilinear_consistency"] = rep.rows[2][1];
  rep.scalars["worst_monotone_margin"] =
      std::max({rep.rows[0][3], rep.rows[1][3], rep.rows[2][3]});

  if (const auto* e = find_expect(cfg, "exact_tol"))
    add_check(rep, "exact_operator_consistency", rep.scalars["exact_consistency"], true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "monotone_tol"))
    add_check(rep, "worst_monotone_margin", rep.scalars["worst_monotone_margin"], true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "semilinear_coeff"))
    add_check(rep, "semilinear_consistency", rep.rows[2][1], true, (*e)[0] * grid.step());
  if (const auto* e = find_expect(cfg, "halving_range")) {
    double ratio = rep.rows[2][1] / rep.rows[2][2];
    rep.scalars["semilinear_halving"] = ratio;
    add_check(rep, "semilinear_halving_low", ratio, false, (*e)[0]);
    add_check(rep, "semilinear_halving_high", ratio, true, (*e)[1]);
  }
}

std::map<std::string, double> jet_witness_row(const PathPoint& at, double side,
                                              const JetWitness& w) {
  std::map<std::string, double> out;
  out["level"] = static_cast<double>(at.index());
  out["time"] = at.t();
  out["side"] = side;
  out["q"] = w.jet.time_slope;
  out["p"] = w.jet.slope;
  out["gamma"] = w.jet.curvature;
  out["gap"] = w.gap;
  out["generator_value"] = w.generator_value;
  out["margin"] = w.margin;
  out["tolerance"] = w.tolerance;
  return out;
}

void run_check_viscosity(const ExperimentConfig& cfg, RunReport& rep) {
  const int n = cfg.steps.front();
  require_tree_depth(n);
  TimeGrid grid(cfg.horizon, n);
  ScenarioTree tree(grid);
  DriftBound bound(cfg.bound);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  Localization window =
      cfg.window.max_steps > 0 ? cfg.window : Localization::defaults(grid);
  JetSearch search = cfg.search;
  if (search.time_slopes.empty() && search.slopes.empty() && search.curvatures.empty()) {
    bool keep_seeds = cfg.search.seed_from_candidate;
    search = JetSearch::defaults();
    search.seed_from_candidate = keep_seeds;
  }
  std::vector<PathPoint> points = config_points(cfg, tree);

  if (cfg.mode == "equivalence") {
    std::vector<CandidateProcess> family = standard_candidate_family(grid, cfg.delta);
    EquivalenceReport eq =
        equivalence_experiment(family, grid, points, gen, bound, window, search);
    rep.columns = {"candidate", "martingale_sub", "martingale_super", "viscosity_sub",
                   "viscosity_super", "consistent"};
    for (std::size_t k = 0; k < eq.rows.size(); ++k) {
      const EquivalenceRow& row = eq.rows[k];
      rep.row_labels.push_back(row.name);
      rep.rows.push_back({static_cast<double>(k), verdict_code(row.martingale_sub),
                          verdict_code(row.martingale_super), verdict_code(row.viscosity_sub),
                          verdict_code(row.viscosity_super), row.consistent ? 1.0 : 0.0});
    }
    rep.scalars["all_consistent"] = eq.all_consistent ? 1.0 : 0.0;
    if (find_expect(cfg, "all_consistent"))
      add_check(rep, "all_consistent", rep.scalars["all_consistent"], false, 1.0);
    return;
  }

  CandidateProcess cand = candidate_for(cfg, cfg.functional);
  rep.columns = {"level", "id", "side", "verdict", "tested", "tangent", "worst_margin"};
  double worst_code = 0.0;
  int mismatches = 0;
  const auto* want = find_expect(cfg, "verdicts");
  for (const auto& [level, id] : cfg.points.empty()
                                     ? std::vector<std::pair<int, std::uint64_t>>{{0, 0}}
                                     : cfg.points) {
    PathPoint at = node_point(tree, level, id);
    CheckReport sub = subsolution_check(cand, gen, at, search, window, bound, cfg.tolerance);
    CheckReport super = supersolution_check(cand, gen, at, search, window, bound, cfg.tolerance);
    for (const CheckReport* r : {&sub, &super}) {
      double side = r->side == Side::sub ? 0.0 : 1.0;
      rep.rows.push_back({static_cast<double>(level), static_cast<double>(id), side,
                          verdict_code(r->verdict), static_cast<double>(r->tested),
                          static_cast<double>(r->tangent), r->worst_margin});
      worst_code = std::max(worst_code, verdict_code(r->verdict));
      for (const JetWitness& w : r->witnesses) {
        auto row = jet_witness_row(at, side, w);
        row["id"] = static_cast<double>(id);
        rep.witnesses.push_back(std::move(row));
      }
    }
    if (want) {
      if (verdict_code(sub.verdict) != (*want)[0]) ++mismatches;
      if (verdict_code(super.verdict) != (*want)[1]) ++mismatches;
    }
  }
  rep.scalars["worst_verdict"] = worst_code;
  if (find_expect(cfg, "all_pass"))
    add_check(rep, "worst_verdict", worst_code, true, 0.0);
  if (want) add_check(rep, "verdict_mismatches", static_cast<double>(mismatches), true, 0.0);
}

void run_check_submartingale(const ExperimentConfig& cfg, RunReport& rep) {
  const int n = cfg.steps.front();
  require_tree_depth(n);
  TimeGrid grid(cfg.horizon, n);
  ScenarioTree tree(grid);
  DriftBound bound(cfg.bound);
  CandidateProcess cand = candidate_for(cfg, cfg.functional);

  rep.columns = {"level", "id", "side", "verdict", "value", "envelope", "gap", "tolerance"};
  double worst_code = 0.0;
  int mismatches = 0;
  const auto* want = find_expect(cfg, "verdicts");
  for (const PathPoint& at : config_points(cfg, tree)) {
    MartingaleReport sub = regular_submartingale_check(cand, at, bound, cfg.tolerance);
    MartingaleReport super = regular_supermartingale_check(cand, at, bound, cfg.tolerance);
    for (const MartingaleReport* r : {&sub, &super}) {
      double side = r->side == Side::sub ? 0.0 : 1.0;
      rep.rows.push_back({static_cast<double>(at.index()), 0.0, side, verdict_code(r->verdict),
                          r->value, r->envelope, r->gap, r->tolerance});
      worst_code = std::max(worst_code, verdict_code(r->verdict));
      if (r->verdict != Verdict::pass) {
        std::map<std::string, double> w;
        w["level"] = static_cast<double>(at.index());
        w["side"] = side;
        w["value"] = r->value;
        w["envelope"] = r->envelope;
        w["gap"] = r->gap;
        w["tolerance"] = r->tolerance;
        rep.witnesses.push_back(std::move(w));
      }
    }
    if (want) {
      if (verdict_code(sub.verdict) != (*want)[0]) ++mismatches;
      if (verdict_code(super.verdict) != (*want)[1]) ++mismatches;
    }
  }
  // Node ids are known here, re-fill the second column in point order.
  std::size_t row = 0;
  for (const auto& [level, id] : cfg.points.empty()
                                     ? std::vector<std::pair<int, std::uint64_t>>{{0, 0}}
                                     : cfg.points) {
    (void)level;
    if (row + 1 < rep.rows.size()) {
      rep.rows[row][1] = static_cast<double>(id);
      rep.rows[row + 1][1] = static_cast<double>(id);
    }
    row += 2;
  }
  rep.scalars["worst_verdict"] = worst_code;
  if (find_expect(cfg, "all_pass"))
    add_check(rep, "worst_verdict", worst_code, true, 0.0);
  if (want) add_check(rep, "verdict_mismatches", static_cast<double>(mismatches), true, 0.0);
}

void run_compare_kind(const ExperimentConfig& cfg, RunReport& rep) {
  const int n = cfg.steps.front();
  require_tree_depth(n);
  TimeGrid grid(cfg.horizon, n);

  if (cfg.trials == 0) {
    CandidateProcess u = candidate_for(cfg, cfg.functional);
    CandidateProcess v = candidate_for(cfg, cfg.functional_b);
    ComparisonReport cr = comparison_check(u, v, grid, cfg.tolerance);
    rep.columns = {"precondition", "ordered", "worst_terminal_gap", "worst_gap", "witness_level"};
    rep.rows.push_back({cr.precondition_ok ? 1.0 : 0.0, cr.ordered ? 1.0 : 0.0,
                        cr.worst_terminal_gap, cr.worst_gap,
                        static_cast<double>(cr.witness_level)});
    rep.scalars["worst_gap"] = cr.worst_gap;
    if (!cr.ordered) {
      std::map<std::string, double> w;
      w["level"] = static_cast<double>(cr.witness_level);
      w["id"] = static_cast<double>(cr.witness_id);
      w["gap"] = cr.witness_level == grid.steps() ? cr.worst_terminal_gap : cr.worst_gap;
      rep.witnesses.push_back(std::move(w));
    }
    if (find_expect(cfg, "ordered"))
      add_check(rep, "ordered", (cr.precondition_ok && cr.ordered) ? 1.0 : 0.0, false, 1.0);
    if (const auto* e = find_expect(cfg, "max_gap"))
      add_check(rep, "worst_gap", cr.worst_gap, true, (*e)[0]);
    return;
  }

  ScenarioTree tree(grid);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  const bool plain_mean = cfg.generator.name == "heat" && cfg.generator.shift == 0.0;
  SchemeOperator op = plain_mean ? SchemeOperator() : scheme_for(gen);
  rep.columns = {"trial", "worst_terminal_gap", "worst_gap"};
  double overall = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < cfg.trials; ++trial) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> base(-1.0, 1.0);
    std::uniform_real_distribution<double> lift(0.0, 1.0);
    std::vector<double> lu(tree.leaf_count()), lv(tree.leaf_count());
    for (auto& x : lu) x = base(rng);
    for (std::size_t i = 0; i < lv.size(); ++i) lv[i] = lu[i] + lift(rng);

    NodeTable<double> tu = plain_mean ? conditional_mean_sweep(tree, lu)
                                      : monotone_scheme(tree, lu, op).value;
    NodeTable<double> tv = plain_mean ? conditional_mean_sweep(tree, lv)
                                      : monotone_scheme(tree, lv, op).value;
    double worst_terminal = -std::numeric_limits<double>::infinity();
    double worst = worst_terminal;
    for (int level = 0; level <= n; ++level) {
      const auto& a = tu.level(level);
      const auto& b = tv.level(level);
      for (std::size_t i = 0; i < a.size(); ++i) {
        double gap = a[i] - b[i];
        if (level == n)
          worst_terminal = std::max(worst_terminal, gap);
        else
          worst = std::max(worst, gap);
      }
    }
    rep.rows.push_back({static_cast<double>(trial), worst_terminal, worst});
    overall = std::max(overall, std::max(worst, worst_terminal));
  }
  rep.scalars["worst_gap"] = overall;
  if (const auto* e = find_expect(cfg, "max_gap"))
    add_check(rep, "worst_gap", overall, true, (*e)[0]);
  if (const auto* e = find_expect(cfg, "gap_coeff_h"))
    add_check(rep, "worst_gap", overall, true, (*e)[0] * grid.step());
}

void run_stability_kind(const ExperimentConfig& cfg, RunReport& rep) {
  const int n = cfg.steps.front();
  TimeGrid grid(cfg.horizon, n);
  PathFunctional xi = functional_from_spec(cfg.functional);
  Generator gen = generator_from_spec(cfg.generator, cfg.bound);
  std::vector<double> eps = cfg.epsilons;
  if (eps.empty()) eps = {0.1, 0.01, 0.001};

  rep.columns = {"eps", "base", "shifted", "delta"};
  for (double e : eps) {
    StabilityReport sr = stability_experiment(grid, xi, gen, e);
    rep.rows.push_back({e, sr.base, sr.shifted, sr.delta});
  }
  rep.scalars["base"] = rep.rows.front()[1];

  if (const auto* e = find_expect(cfg, "delta_per_eps")) {
    double worst = 0.0;
    for (const auto& row : rep.rows) worst = std::max(worst, std::abs(row[3] - (*e)[0] * row[0]));
    add_check(rep, "shift_response_error", worst, true, (*e)[1]);
  }
  if (const auto* e = find_expect(cfg, "delta_bound")) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& row : rep.rows)
      worst = std::max(worst, std::abs(row[3]) - (*e)[0] * std::abs(row[0]));
    add_check(rep, "shift_response_excess", worst, true, (*e)[1] * grid.step());
  }
}

// ---------------------------------------------------------------------------
// Validation tables.

struct ExpectRule {
  std::size_t min_args;
  std::size_t max_args;
};

const std::map<std::string, std::map<std::string, ExpectRule>>& expect_rules() {
  static const std::map<std::string, std::map<std::string, ExpectRule>> rules = {
      {"heat",
       {{"value", {2, 2}},
        {"below", {1, 1}},
        {"increasing", {0, 1}},
        {"gap_ratio", {4, 4}},
        {"frozen_after", {2, 2}}}},
      {"bsde", {{"value", {2, 2}}, {"error_coeff", {1, 1}}, {"ratio_range", {2, 2}}}},
      {"converge",
       {{"error_coeff", {1, 1}}, {"ratio_range", {2, 2}}, {"order_range", {2, 2}}}},
      {"snell",
       {{"root", {2, 2}},
        {"skorokhod_tol", {1, 1}},
        {"defect_tol", {1, 1}},
        {"rule_tol", {1, 1}},
        {"resolve_tol", {1, 1}},
        {"conservation_tol", {1, 1}},
        {"dominates", {0, 0}}}},
      {"scheme",
       {{"value", {2, 2}},
        {"fd", {1, 2}},
        {"exact_tol", {1, 1}},
        {"monotone_tol", {1, 1}},
        {"semilinear_coeff", {1, 1}},
        {"halving_range", {2, 2}}}},
      {"check-viscosity",
       {{"all_pass", {0, 0}}, {"verdicts", {2, 2}}, {"all_consistent", {0, 0}}}},
      {"check-submartingale", {{"all_pass", {0, 0}}, {"verdicts", {2, 2}}}},
      {"compare", {{"ordered", {0, 0}}, {"max_gap", {1, 1}}, {"gap_coeff_h", {1, 1}}}},
      {"stability", {{"delta_per_eps", {2, 2}}, {"delta_bound", {2, 2}}}},
  };
  return rules;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface.

ExperimentConfig parse_experiment(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw input_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw input_error("config must be a JSON object");

  ExperimentConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "kind")
      cfg.kind = as_string(v, key);
    else if (key == "name")
      cfg.name = as_string(v, key);
    else if (key == "horizon")
      cfg.horizon = as_number(v, key);
    else if (key == "steps") {
      cfg.steps.clear();
      if (v.is_number_integer())
        cfg.steps.push_back(v.get<int>());
      else if (v.is_array())
        for (const auto& s : v) cfg.steps.push_back(as_int(s, key));
      else
        bad_field(key, "expected an integer or an array of integers");
    } else if (key == "L")
      cfg.bound = as_number(v, key);
    else if (key == "side")
      cfg.side = as_string(v, key);
    else if (key == "backend")
      cfg.backend = as_string(v, key);
    else if (key == "mode")
      cfg.mode = as_string(v, key);
    else if (key == "solve")
      cfg.solve = as_string(v, key);
    else if (key == "seed") {
      if (!v.is_number_integer()) bad_field(key, "expected an integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "trials")
      cfg.trials = as_int(v, key);
    else if (key == "tolerance")
      cfg.tolerance = as_number(v, key);
    else if (key == "reference") {
      cfg.reference = as_number(v, key);
      cfg.has_reference = true;
    } else if (key == "delta")
      cfg.delta = as_number(v, key);
    else if (key == "epsilons")
      cfg.epsilons = as_number_list(v, key);
    else if (key == "functional")
      cfg.functional = parse_functional(v, key);
    else if (key == "functional_b") {
      cfg.functional_b = parse_functional(v, key);
      cfg.has_functional_b = true;
    } else if (key == "generator")
      cfg.generator = parse_generator(v, key);
    else if (key == "points") {
      if (!v.is_array()) bad_field(key, "expected an array of [level, id] pairs");
      for (const auto& p : v) {
        if (!p.is_array() || p.size() != 2) bad_field(key, "each point is a [level, id] pair");
        int level = as_int(p[0], key);
        if (!p[1].is_number_integer() || p[1].get<std::int64_t>() < 0)
          bad_field(key, "node ids are nonnegative integers");
        cfg.points.emplace_back(level, p[1].get<std::uint64_t>());
      }
    } else if (key == "window") {
      if (!v.is_object()) bad_field(key, "expected {radius, max_steps}");
      for (auto w = v.begin(); w != v.end(); ++w) {
        if (w.key() == "radius")
          cfg.window.radius = as_number(w.value(), "window.radius");
        else if (w.key() == "max_steps")
          cfg.window.max_steps = as_int(w.value(), "window.max_steps");
        else
          bad_field(key + "." + w.key(), "unknown key");
      }
    } else if (key == "search") {
      if (!v.is_object()) bad_field(key, "expected jet grid axes");
      for (auto s = v.begin(); s != v.end(); ++s) {
        if (s.key() == "time_slopes")
          cfg.search.time_slopes = as_number_list(s.value(), "search.time_slopes");
        else if (s.key() == "slopes")
          cfg.search.slopes = as_number_list(s.value(), "search.slopes");
        else if (s.key() == "curvatures")
          cfg.search.curvatures = as_number_list(s.value(), "search.curvatures");
        else if (s.key() == "seed_from_candidate") {
          if (!s.value().is_boolean()) bad_field("search.seed_from_candidate", "expected a bool");
          cfg.search.seed_from_candidate = s.value().get<bool>();
        } else
          bad_field(key + "." + s.key(), "unknown key");
      }
    } else if (key == "expect") {
      if (!v.is_object()) bad_field(key, "expected an object of named bounds");
      for (auto e = v.begin(); e != v.end(); ++e)
        cfg.expect[e.key()] = e.value().is_array() || e.value().is_number()
                                  ? as_number_list(e.value(), key + "." + e.key())
                                  : (bad_field(key + "." + e.key(), "expected numbers"),
                                     std::vector<double>{});
    } else if (key == "out")
      cfg.out_dir = as_string(v, key);
    else
      bad_field(key, "unknown key");
  }
  if (cfg.name.empty()) cfg.name = "experiment";
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  ExperimentConfig cfg = parse_experiment(text);
  if (cfg.name == "experiment") {
    std::string stem = std::filesystem::path(path).stem().string();
    if (!stem.empty()) cfg.name = stem;
  }
  return cfg;
}

void validate_experiment(const ExperimentConfig& cfg) {
  static const std::set<std::string> kinds = {
      "heat",   "bsde",           "snell",
      "scheme", "converge",       "check-viscosity",
      "compare", "check-submartingale", "stability"};
  if (!kinds.count(cfg.kind))
    throw input_error("config field 'kind': unknown kind '" + cfg.kind + "'");
  if (cfg.name.empty()) bad_field("name", "must not be empty");
  if (!(cfg.horizon > 0.0)) bad_field("horizon", "must be positive");
  if (cfg.steps.empty()) bad_field("steps", "must name at least one step count");
  for (int n : cfg.steps)
    if (n < 1) bad_field("steps", "step counts must be positive");
  if (cfg.bound < 0.0) bad_field("L", "must be nonnegative");
  if (cfg.side != "upper" && cfg.side != "lower") bad_field("side", "expected upper or lower");
  if (cfg.backend != "auto" && cfg.backend != "tree" && cfg.backend != "lattice")
    bad_field("backend", "expected auto, tree, or lattice");
  if (cfg.trials < 0) bad_field("trials", "must be nonnegative");

  if (!functional_names().count(cfg.functional.name))
    bad_field("functional", "unknown functional '" + cfg.functional.name + "'");
  if (cfg.has_functional_b && !functional_names().count(cfg.functional_b.name))
    bad_field("functional_b", "unknown functional '" + cfg.functional_b.name + "'");
  if (!generator_names().count(cfg.generator.name))
    bad_field("generator", "unknown generator '" + cfg.generator.name + "'");
  if (cfg.functional.name == "fixed-time" &&
      (cfg.functional.time < 0.0 || cfg.functional.time > cfg.horizon))
    bad_field("functional.time", "must lie in [0, horizon]");
  if (cfg.functional.name == "pathwise-integral" ||
      (cfg.has_functional_b && cfg.functional_b.name == "pathwise-integral"))
    bad_field("functional", "pathwise-integral needs two-dimensional paths; "
                            "the experiment sweeps are one-dimensional");

  // One-step tilt probabilities must stay inside [0, 1] at every requested h.
  const double effective_bound =
      std::max(cfg.bound, cfg.generator.name == "drift-hjb" ? cfg.bound : 0.0);
  if (effective_bound > 0.0)
    for (int n : cfg.steps) DriftBound(effective_bound).validate_for_step(cfg.horizon / n);

  if (!cfg.mode.empty()) {
    if (cfg.kind == "scheme" && cfg.mode != "certify")
      bad_field("mode", "scheme understands mode 'certify' only");
    if (cfg.kind == "check-viscosity" && cfg.mode != "equivalence")
      bad_field("mode", "check-viscosity understands mode 'equivalence' only");
    if (cfg.kind != "scheme" && cfg.kind != "check-viscosity")
      bad_field("mode", "this kind has no modes");
  }
  if (cfg.kind == "converge") {
    if (!cfg.has_reference) bad_field("reference", "converge needs a target value");
    if (cfg.steps.size() < 2) bad_field("steps", "converge needs at least two step counts");
    if (cfg.solve != "bsde" && cfg.solve != "heat" && cfg.solve != "scheme")
      bad_field("solve", "expected bsde, heat, or scheme");
  }
  if (cfg.kind == "bsde" &&
      (cfg.expect.count("error_coeff") || cfg.expect.count("ratio_range")) &&
      !cfg.has_reference)
    bad_field("reference", "error bounds need a target value");

  const bool single_n = cfg.kind == "check-viscosity" || cfg.kind == "check-submartingale" ||
                        cfg.kind == "compare" || cfg.kind == "stability" ||
                        (cfg.kind == "scheme" && cfg.mode == "certify");
  if (single_n && cfg.steps.size() != 1)
    bad_field("steps", "this kind runs at a single step count");
  if (cfg.kind == "scheme" && cfg.mode == "certify") {
    if (cfg.steps.front() < 4) bad_field("steps", "certification needs at least 4 steps");
    if (!(cfg.bound > 0.0)) bad_field("L", "certification needs a positive drift allowance");
  }
  if (cfg.kind == "compare" && cfg.trials == 0 && !cfg.has_functional_b)
    bad_field("functional_b", "compare needs a second functional (or trials > 0)");
  if (cfg.kind == "check-viscosity" && cfg.mode == "equivalence" && !(cfg.delta > 0.0))
    bad_field("delta", "the family tilt must be positive");

  if (!cfg.points.empty()) {
    const int n = cfg.steps.front();
    for (const auto& [level, id] : cfg.points) {
      if (level < 0 || level >= n)
        bad_field("points", "levels must lie in [0, steps) so a suffix remains");
      if (level < 64 && id >= (std::uint64_t{1} << level))
        bad_field("points", "node id out of range for its level");
    }
  }
  if (cfg.window.max_steps != 0) cfg.window.validate();

  auto rules_it = expect_rules().find(cfg.kind);
  for (const auto& [key, vals] : cfg.expect) {
    const auto& table = rules_it->second;
    auto it = table.find(key);
    if (it == table.end()) bad_field("expect." + key, "unknown bound for kind " + cfg.kind);
    if (vals.size() < it->second.min_args || vals.size() > it->second.max_args)
      bad_field("expect." + key, "wrong number of values");
  }
  if (cfg.expect.count("gap_ratio") && !cfg.expect.count("below"))
    bad_field("expect.gap_ratio", "needs 'below' for the limiting value");
  if (cfg.kind == "scheme") {
    const bool certify = cfg.mode == "certify";
    for (const char* key : {"exact_tol", "monotone_tol", "semilinear_coeff", "halving_range"})
      if (!certify && cfg.expect.count(key))
        bad_field(std::string("expect.") + key, "only meaningful with mode certify");
    for (const char* key : {"value", "fd"})
      if (certify && cfg.expect.count(key))
        bad_field(std::string("expect.") + key, "not meaningful with mode certify");
    if (cfg.expect.count("fd") && cfg.generator.name == "decay")
      bad_field("expect.fd", "no finite difference reference for the decay driver");
  }
  if (cfg.kind == "check-viscosity") {
    const bool eq = cfg.mode == "equivalence";
    if (eq && (cfg.expect.count("all_pass") || cfg.expect.count("verdicts")))
      bad_field("expect", "equivalence mode reports consistency, not verdicts");
    if (!eq && cfg.expect.count("all_consistent"))
      bad_field("expect.all_consistent", "only meaningful with mode equivalence");
  }
}

PathFunctional functional_from_spec(const FunctionalSpec& spec) {
  PathFunctional base = base_functional(spec);
  if (spec.scale == 1.0 && spec.offset == 0.0) return base;
  PathFunctional out(base.name() + "-affine", base.dim(),
                     [base, a = spec.scale, b = spec.offset](const PathView& w) {
                       return a * base(w) + b;
                     });
  if (base.horizon_time()) out.with_horizon(*base.horizon_time());
  if (base.lipschitz()) out.with_lipschitz(std::abs(spec.scale) * *base.lipschitz());
  if (base.has_terminal_profile())
    out.with_terminal_profile([p = base.terminal_profile(), a = spec.scale,
                               b = spec.offset](double x) { return a * p(x) + b; });
  return out;
}

Generator generator_from_spec(const GeneratorSpec& spec, double bound) {
  Generator gen;
  if (spec.name == "heat")
    gen = Generator::heat();
  else if (spec.name == "decay")
    gen = Generator::decay();
  else if (spec.name == "drift-hjb")
    gen = Generator::drift_hjb(bound);
  else
    throw input_error("unknown generator '" + spec.name + "'");
  if (spec.shift != 0.0) gen = gen.with_shift(spec.shift);
  return gen;
}

std::string catalog_text() {
  std::ostringstream os;
  os << "functionals (parameters beyond coord/scale/offset in brackets):\n"
     << "  terminal           last path value\n"
     << "  terminal-square    squared last path value\n"
     << "  fixed-time         value at the grid time nearest [time]\n"
     << "  running-max        largest value seen so far\n"
     << "  running-min        smallest value seen so far\n"
     << "  average            left Riemann time average\n"
     << "  pathwise-integral  left-endpoint integral of x1 against x2 (two-dimensional)\n"
     << "  put                ([strike] - terminal)^+\n"
     << "  zero               constant zero\n"
     << "generators (all accept a constant shift):\n"
     << "  heat               half the curvature\n"
     << "  decay              semilinear preset, driver 1 - y\n"
     << "  drift-hjb          half curvature plus L |slope| (L from the config)\n"
     << "scheme operators:\n"
     << "  one-step operators derived from each generator above: child mean plus\n"
     << "  h times the generator read at the children's difference quotient\n"
     << "kinds:\n"
     << "  heat bsde snell scheme converge check-viscosity check-submartingale\n"
     << "  compare stability\n";
  return os.str();
}

RunReport run_experiment(const ExperimentConfig& config) {
  validate_experiment(config);
  RunReport rep;
  rep.kind = config.kind;
  rep.name = config.name;
  rep.seed = config.seed;
  rep.version = version_string;
  rep.config_echo = config_json(config).dump(2);

  auto start = std::chrono::steady_clock::now();
  if (config.kind == "heat")
    run_heat_kind(config, rep);
  else if (config.kind == "bsde")
    run_bsde_kind(config, rep);
  else if (config.kind == "converge")
    run_converge_kind(config, rep);
  else if (config.kind == "snell")
    run_snell_kind(config, rep);
  else if (config.kind == "scheme" && config.mode == "certify")
    run_scheme_certify(config, rep);
  else if (config.kind == "scheme")
    run_scheme_solve(config, rep);
  else if (config.kind == "check-viscosity")
    run_check_viscosity(config, rep);
  else if (config.kind == "check-submartingale")
    run_check_submartingale(config, rep);
  else if (config.kind == "compare")
    run_compare_kind(config, rep);
  else
    run_stability_kind(config, rep);
  auto stop = std::chrono::steady_clock::now();
  rep.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return rep;
}

namespace {

json body_json(const RunReport& r) {
  json j;
  j["kind"] = r.kind;
  j["name"] = r.name;
  j["config"] = json::parse(r.config_echo);
  j["seed"] = r.seed;
  j["columns"] = r.columns;
  if (!r.row_labels.empty()) j["labels"] = r.row_labels;
  j["rows"] = r.rows;
  j["scalars"] = r.scalars;
  json checks = json::array();
  for (const CheckOutcome& c : r.checks) {
    json jc;
    jc["name"] = c.name;
    jc["observed"] = c.observed;
    jc["bound"] = c.bound;
    jc["relation"] = c.at_most ? "<=" : ">=";
    jc["pass"] = c.pass;
    checks.push_back(jc);
  }
  j["checks"] = checks;
  json wits = json::array();
  for (const auto& w : r.witnesses) {
    json jw;
    for (const auto& [k, v] : w) jw[k] = v;
    wits.push_back(jw);
  }
  j["witnesses"] = wits;
  j["passed"] = r.passed;
  j["version"] = r.version;
  return j;
}

void print_value(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

std::string report_body_json(const RunReport& report) { return body_json(report).dump(2); }

std::string report_json(const RunReport& report) {
  json j = body_json(report);
  j["wall_time_ms"] = report.wall_ms;
  return j.dump(2);
}

void write_table_csv(std::ostream& os, const RunReport& report) {
  const bool labeled = !report.row_labels.empty();
  if (labeled) os << "label,";
  for (std::size_t i = 0; i < report.columns.size(); ++i)
    os << report.columns[i] << (i + 1 < report.columns.size() ? "," : "");
  os << "\n";
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    if (labeled) os << report.row_labels[r] << ",";
    for (std::size_t i = 0; i < report.rows[r].size(); ++i) {
      print_value(os, report.rows[r][i]);
      os << (i + 1 < report.rows[r].size() ? "," : "");
    }
    os << "\n";
  }
}

std::string write_report_files(const RunReport& report, const std::string& dir) {
  std::filesystem::path out(dir.empty() ? "." : dir);
  std::filesystem::create_directories(out);
  std::filesystem::path json_path = out / (report.name + ".json");
  std::filesystem::path csv_path = out / (report.name + ".csv");
  {
    std::ofstream f(json_path);
    if (!f) throw input_error("cannot write '" + json_path.string() + "'");
    f << report_json(report) << "\n";
  }
  {
    std::ofstream f(csv_path);
    if (!f) throw input_error("cannot write '" + csv_path.string() + "'");
    write_table_csv(f, report);
  }
  return json_path.string();
}

}  // namespace ppde
