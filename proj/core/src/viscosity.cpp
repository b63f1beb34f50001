#include "ppde/viscosity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <utility>

#include "ppde/parallel.hpp"
#include "ppde/snell.hpp"
#include "ppde/solvers.hpp"

namespace ppde {

double Jet::magnitude() const {
  return 1.0 + std::abs(time_slope) + std::abs(slope) + std::abs(curvature);
}

Jet Jet::operator+(const Jet& other) const {
  return Jet{time_slope + other.time_slope, slope + other.slope, curvature + other.curvature};
}

Jet Jet::scaled(double c) const { return Jet{c * time_slope, c * slope, c * curvature}; }

Localization Localization::defaults(const TimeGrid& grid) {
  int m = std::max(1, grid.steps() / 4);
  return Localization{4.0 * std::sqrt(m * grid.step()), m};
}

Localization Localization::meet(const Localization& other) const {
  validate();
  other.validate();
  return Localization{std::min(radius, other.radius), std::min(max_steps, other.max_steps)};
}

Localization Localization::shrunk(double factor) const {
  validate();
  if (!(factor > 0.0) || factor > 1.0)
    throw input_error("Localization: shrink factor must lie in (0, 1]");
  return Localization{radius * factor, max_steps};
}

void Localization::validate() const {
  if (!(radius > 0.0)) throw input_error("Localization: radius must be positive");
  if (max_steps < 1) throw input_error("Localization: need at least one step");
}

int Localization::exit_index(const PathView& suffix) const {
  validate();
  if (suffix.length() < 2) throw input_error("Localization: suffix has no steps");
  const int last = std::min(suffix.last_index(), max_steps);
  for (int i = 1; i <= last; ++i)
    if (std::abs(suffix.at(i) - suffix.at(0)) >= radius) return i;
  return last;
}

const char* to_string(Tangency t) {
  switch (t) {
    case Tangency::from_above: return "tangent_from_above";
    case Tangency::from_below: return "tangent_from_below";
    default: return "neither";
  }
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

double default_jet_tolerance(double h, const Jet& jet) { return 5.0 * h * jet.magnitude(); }

// ---------------------------------------------------------------------------
// Candidates

namespace {

void require_anchor(const ScenarioTree& tree, const PathPoint& at) {
  if (at.dim() != 1) throw input_error("candidate: one-dimensional paths only");
  if (!tree.grid().same_step(at.grid())) throw input_error("candidate: grid step mismatch");
  if (tree.depth() > at.suffix_steps())
    throw input_error("candidate: tree is deeper than the remaining horizon");
}

NodeTable<double> truncated(NodeTable<double>&& full, int depth) {
  if (full.depth() == depth) return std::move(full);
  NodeTable<double> out(depth);
  for (int l = 0; l <= depth; ++l) out.level(l) = std::move(full.level(l));
  return out;
}

TimeGrid remaining_grid(const PathPoint& at) {
  const int r = at.suffix_steps();
  return TimeGrid(r * at.grid().step(), r);
}

}  // namespace

CandidateProcess candidate_from_field(std::string name, PathField u) {
  auto fn = [u = std::move(u)](const ScenarioTree& tree, const PathPoint& at) {
    require_anchor(tree, at);
    NodeTable<double> out(tree.depth());
    const int i = at.index();
    std::vector<double> joined(at.prefix());
    joined.resize(static_cast<std::size_t>(i + tree.depth()) + 1);
    tree.for_each_node([&](int level, std::uint64_t id, const PathView& w) {
      for (int s = 1; s <= level; ++s) joined[static_cast<std::size_t>(i + s)] = at.current() + w.at(s);
      std::vector<double> prefix(joined.begin(), joined.begin() + i + level + 1);
      out.at(level, id) = u(PathPoint(at.grid(), 1, i + level, std::move(prefix)));
    });
    return out;
  };
  return CandidateProcess{std::move(name), std::move(fn)};
}

CandidateProcess candidate_martingale(std::string name, const PathFunctional& xi) {
  auto fn = [xi](const ScenarioTree& tree, const PathPoint& at) {
    require_anchor(tree, at);
    PathFunctional shifted = shift_functional(xi, at);
    if (tree.depth() == at.suffix_steps()) return heat_sweep(tree, shifted);
    ScenarioTree full(remaining_grid(at));
    return truncated(heat_sweep(full, shifted), tree.depth());
  };
  return CandidateProcess{std::move(name), std::move(fn)};
}

CandidateProcess candidate_semilinear(std::string name, const PathFunctional& xi,
                                      const Generator& gen) {
  auto fn = [xi, gen](const ScenarioTree& tree, const PathPoint& at) {
    require_anchor(tree, at);
    PathFunctional shifted = shift_functional(xi, at);
    if (tree.depth() == at.suffix_steps()) return std::move(solve_bsde(tree, shifted, gen).y);
    ScenarioTree full(remaining_grid(at));
    return truncated(std::move(solve_bsde(full, shifted, gen).y), tree.depth());
  };
  return CandidateProcess{std::move(name), std::move(fn)};
}

CandidateProcess candidate_tilted(const CandidateProcess& base, double delta) {
  auto inner = base.table;
  auto fn = [inner, delta](const ScenarioTree& tree, const PathPoint& at) {
    NodeTable<double> out = inner(tree, at);
    for (int l = 0; l <= out.depth(); ++l) {
      const double t = at.t() + tree.grid().time(l);
      for (double& v : out.level(l)) v += delta * t;
    }
    return out;
  };
  char sign = delta < 0.0 ? '-' : '+';
  return CandidateProcess{base.name + sign + "tilt", std::move(fn)};
}

std::vector<CandidateProcess> standard_candidate_family(const TimeGrid& grid, double delta) {
  const double mid = grid.time(grid.steps() / 2);
  std::vector<CandidateProcess> base;
  base.push_back(candidate_martingale("terminal", terminal_value()));
  base.push_back(candidate_martingale("fixed_time", value_at_time(mid)));
  base.push_back(candidate_martingale("running_max", running_max()));

  std::vector<CandidateProcess> out;
  for (const auto& c : base) {
    out.push_back(c);
    out.push_back(candidate_tilted(c, delta));
    out.push_back(candidate_tilted(c, -delta));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tangency

namespace {

// The exit classification and the expected number of open steps depend only
// on the window, so they are shared across all jets tested at a point.
struct ExitMask {
  NodeTable<std::uint8_t> exited;
  double mean_steps = 0.0;  // E[exit index] under the symmetric walk, >= 1
};

ExitMask exit_mask(const ScenarioTree& tree, const Localization& window) {
  const int m = tree.depth();
  ExitMask mask;
  mask.exited = NodeTable<std::uint8_t>(m);
  tree.for_each_node([&](int level, std::uint64_t id, const PathView& w) {
    if (level == 0) {
      mask.exited.at(0, 0) = 0;
      return;
    }
    mask.exited.at(level, id) =
        (mask.exited.at(level - 1, id >> 1) || std::abs(w.at(level)) >= window.radius)
            ? std::uint8_t{1}
            : std::uint8_t{0};
  });

  NodeTable<double> open(m);
  std::fill(open.level(m).begin(), open.level(m).end(), 0.0);
  for (int level = m - 1; level >= 0; --level) {
    const auto& up = open.level(level + 1);
    auto& cur = open.level(level);
    for (std::uint64_t j = 0; j < cur.size(); ++j)
      cur[j] = mask.exited.at(level, j) ? 0.0 : 1.0 + 0.5 * (up[2 * j] + up[2 * j + 1]);
  }
  mask.mean_steps = open.at(0, 0);
  return mask;
}

// Obstacle phi - u on the localized tree, with values frozen along each path
// from its exit node on, so that a plain envelope sweep realizes stopping at
// the exit.
NodeTable<double> masked_obstacle(const ScenarioTree& tree, const NodeTable<double>& u,
                                  const Jet& jet, const ExitMask& mask) {
  const int m = tree.depth();
  NodeTable<double> x(m);
  tree.for_each_node([&](int level, std::uint64_t id, const PathView& w) {
    if (level > 0 && mask.exited.at(level - 1, id >> 1)) {
      x.at(level, id) = x.at(level - 1, id >> 1);
      return;
    }
    const double d = w.at(level);
    const double s = tree.grid().time(level);
    x.at(level, id) =
        jet.time_slope * s + jet.slope * d + 0.5 * jet.curvature * d * d - u.at(level, id);
  });
  return x;
}

NodeTable<double> negated(const NodeTable<double>& t) {
  NodeTable<double> out(t.depth());
  for (int l = 0; l <= t.depth(); ++l) {
    const auto& src = t.level(l);
    auto& dst = out.level(l);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = -src[j];
  }
  return out;
}

TangencyReport tangency_core(const ScenarioTree& tree, const NodeTable<double>& u,
                             const PathPoint& at, const Jet& jet, const Localization& window,
                             const ExitMask& mask, const DriftBound& bound, Side side,
                             const Generator& gen, double tolerance) {
  NodeTable<double> x = masked_obstacle(tree, u, jet, mask);
  const double x0 = x.at(0, 0);

  ObstacleProcess obs;
  obs.values = side == Side::sub ? negated(x) : std::move(x);
  SnellEnvelope env = snell(tree, obs, bound);
  const double w0 = side == Side::sub ? -env.root : env.root;

  TangencyReport rep;
  rep.jet = jet;
  rep.side = side;
  rep.window = window;
  rep.depth = tree.depth();
  rep.window_time = tree.grid().step() * mask.mean_steps;
  rep.obstacle_origin = x0;
  rep.envelope_origin = w0;
  rep.gap = w0 - x0;
  const double width = tolerance > 0.0 ? tolerance : default_jet_tolerance(at.grid().step(), jet);
  rep.tolerance = width * rep.window_time;
  if (side == Side::sub && rep.gap > 0.0)
    throw numeric_error("tangency_in_mean: positive gap in sub mode");
  if (side == Side::super && rep.gap < 0.0)
    throw numeric_error("tangency_in_mean: negative gap in super mode");

  const bool tangent = std::abs(rep.gap) <= rep.tolerance;
  rep.verdict = !tangent          ? Tangency::neither
                : side == Side::sub ? Tangency::from_above
                                    : Tangency::from_below;
  rep.generator_value =
      -jet.time_slope - gen(at.t(), at.view(), u.at(0, 0), jet.slope, jet.curvature);
  return rep;
}

ScenarioTree localized_tree(const PathPoint& at, const Localization& window) {
  window.validate();
  if (at.suffix_steps() < 1)
    throw input_error("tangency: the anchor point has no remaining steps");
  const int m = std::min(window.max_steps, at.suffix_steps());
  return ScenarioTree(TimeGrid(m * at.grid().step(), m));
}

}  // namespace

TangencyReport tangency_in_mean(const CandidateProcess& u, const PathPoint& at, const Jet& jet,
                                const Localization& window, const DriftBound& bound, Side side,
                                const Generator& gen, double tolerance) {
  ScenarioTree tree = localized_tree(at, window);
  NodeTable<double> table = u.table(tree, at);
  ExitMask mask = exit_mask(tree, window);
  return tangency_core(tree, table, at, jet, window, mask, bound, side, gen, tolerance);
}

// ---------------------------------------------------------------------------
// Jet search

JetSearch JetSearch::defaults() {
  JetSearch s;
  for (int i = -8; i <= 8; ++i) s.time_slopes.push_back(0.25 * i);
  s.slopes = s.time_slopes;
  for (int i = -8; i <= 8; ++i) s.curvatures.push_back(0.5 * i);
  return s;
}

std::vector<Jet> JetSearch::enumerate() const {
  std::vector<Jet> out;
  out.reserve(time_slopes.size() * slopes.size() * curvatures.size());
  for (double q : time_slopes)
    for (double p : slopes)
      for (double g : curvatures) out.push_back(Jet{q, p, g});
  return out;
}

namespace {

// Finite-difference jets read off the candidate's first two tree levels.
void append_seeds(std::vector<Jet>& jets, const NodeTable<double>& u, double h) {
  if (u.depth() < 1) return;
  const double inc = std::sqrt(h);
  const double u0 = u.at(0, 0);
  const double dn = u.at(1, 0), up = u.at(1, 1);
  const double p = (up - dn) / (2.0 * inc);
  const double q = (0.5 * (up + dn) - u0) / h;
  double g = 0.0;
  if (u.depth() >= 2)
    g = (u.at(2, 3) - u.at(2, 2) - u.at(2, 1) + u.at(2, 0)) / (4.0 * h);
  jets.push_back(Jet{q, p, g});
  jets.push_back(Jet{q, p, 0.0});
  jets.push_back(Jet{0.0, p, g});
  jets.push_back(Jet{0.0, p, 0.0});
}

CheckReport solution_check(const CandidateProcess& u, const Generator& gen, const PathPoint& at,
                           const JetSearch& search, const Localization& window,
                           const DriftBound& bound, double tolerance, Side side) {
  ScenarioTree tree = localized_tree(at, window);
  NodeTable<double> table = u.table(tree, at);
  ExitMask mask = exit_mask(tree, window);
  const double h = at.grid().step();

  std::vector<Jet> jets = search.enumerate();
  if (search.seed_from_candidate) append_seeds(jets, table, h);

  std::vector<TangencyReport> reports(jets.size());
  parallel_for(jets.size(), 8, [&](std::size_t a, std::size_t b) {
    for (std::size_t k = a; k < b; ++k)
      reports[k] =
          tangency_core(tree, table, at, jets[k], window, mask, bound, side, gen, tolerance);
  });

  CheckReport out;
  out.side = side;
  out.tested = static_cast<int>(jets.size());
  out.slack = h;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  for (const TangencyReport& rep : reports) {
    if (rep.verdict == Tangency::neither) continue;
    ++out.tangent;
    const double tol = tolerance > 0.0 ? tolerance : default_jet_tolerance(h, rep.jet);
    const double band = h * rep.jet.magnitude();
    const double violation =
        side == Side::sub ? rep.generator_value : -rep.generator_value;
    out.worst_margin = std::max(out.worst_margin, violation);
    if (violation > tol) {
      out.witnesses.push_back(JetWitness{rep.jet, rep.gap, rep.generator_value, violation, tol});
      if (violation > tol + band)
        out.verdict = Verdict::fail;
      else if (out.verdict != Verdict::fail)
        out.verdict = Verdict::inconclusive;
    }
  }
  if (out.tangent == 0) out.worst_margin = 0.0;
  return out;
}

}  // namespace

CheckReport subsolution_check(const CandidateProcess& u, const Generator& gen,
                              const PathPoint& at, const JetSearch& search,
                              const Localization& window, const DriftBound& bound,
                              double tolerance) {
  return solution_check(u, gen, at, search, window, bound, tolerance, Side::sub);
}

CheckReport supersolution_check(const CandidateProcess& u, const Generator& gen,
                                const PathPoint& at, const JetSearch& search,
                                const Localization& window, const DriftBound& bound,
                                double tolerance) {
  return solution_check(u, gen, at, search, window, bound, tolerance, Side::super);
}

// ---------------------------------------------------------------------------
// Optimal-stopping characterization

namespace {

MartingaleReport martingale_check(const CandidateProcess& u, const PathPoint& at,
                                  const DriftBound& bound, double tolerance, Side side) {
  if (at.suffix_steps() < 1)
    throw input_error("martingale check: the anchor point has no remaining steps");
  ScenarioTree tree(remaining_grid(at));
  NodeTable<double> table = u.table(tree, at);
  const double u0 = table.at(0, 0);

  ObstacleProcess obs;
  obs.values = side == Side::sub ? negated(table) : std::move(table);
  SnellEnvelope env = snell(tree, obs, bound);
  const double envelope = side == Side::sub ? -env.root : env.root;

  MartingaleReport rep;
  rep.side = side;
  rep.value = u0;
  rep.envelope = envelope;
  rep.gap = side == Side::sub ? u0 - envelope : envelope - u0;
  if (rep.gap < 0.0)
    throw numeric_error("martingale check: envelope lost to immediate stopping");
  const double h = at.grid().step();
  const double scale = 1.0 + std::abs(u0);
  rep.tolerance = tolerance > 0.0 ? tolerance : 5.0 * h * scale;
  rep.slack = h * scale;
  rep.verdict = rep.gap <= rep.tolerance               ? Verdict::pass
                : rep.gap <= rep.tolerance + rep.slack ? Verdict::inconclusive
                                                       : Verdict::fail;
  return rep;
}

Verdict worst(Verdict a, Verdict b) {
  if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
  if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
  return Verdict::pass;
}

bool agree(Verdict a, Verdict b) {
  return a == b || a == Verdict::inconclusive || b == Verdict::inconclusive;
}

}  // namespace

MartingaleReport regular_submartingale_check(const CandidateProcess& u, const PathPoint& at,
                                             const DriftBound& bound, double tolerance) {
  return martingale_check(u, at, bound, tolerance, Side::sub);
}

MartingaleReport regular_supermartingale_check(const CandidateProcess& u, const PathPoint& at,
                                               const DriftBound& bound, double tolerance) {
  return martingale_check(u, at, bound, tolerance, Side::super);
}

EquivalenceReport equivalence_experiment(const std::vector<CandidateProcess>& candidates,
                                         const TimeGrid& grid,
                                         const std::vector<PathPoint>& points,
                                         const Generator& gen, const DriftBound& bound,
                                         const Localization& window, const JetSearch& search) {
  if (points.empty()) throw input_error("equivalence_experiment: no sample points");
  for (const PathPoint& at : points)
    if (!at.grid().same_step(grid) || at.suffix_steps() < 1)
      throw input_error("equivalence_experiment: points must be interior to the grid");

  EquivalenceReport report;
  report.all_consistent = true;
  for (const CandidateProcess& c : candidates) {
    EquivalenceRow row;
    row.name = c.name;
    for (const PathPoint& at : points) {
      row.martingale_sub = worst(row.martingale_sub,
                                 regular_submartingale_check(c, at, bound).verdict);
      row.martingale_super = worst(row.martingale_super,
                                   regular_supermartingale_check(c, at, bound).verdict);
      row.viscosity_sub =
          worst(row.viscosity_sub, subsolution_check(c, gen, at, search, window, bound).verdict);
      row.viscosity_super =
          worst(row.viscosity_super,
                supersolution_check(c, gen, at, search, window, bound).verdict);
    }
    row.consistent = agree(row.martingale_sub, row.viscosity_sub) &&
                     agree(row.martingale_super, row.viscosity_super);
    report.all_consistent = report.all_consistent && row.consistent;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Comparison

ComparisonReport comparison_check(const CandidateProcess& u, const CandidateProcess& v,
                                  const TimeGrid& grid, double tolerance) {
  ScenarioTree tree(grid);
  PathPoint origin = PathPoint::origin(grid);
  NodeTable<double> ut = u.table(tree, origin);
  NodeTable<double> vt = v.table(tree, origin);
  const int n = tree.depth();

  ComparisonReport rep;
  rep.tolerance = tolerance > 0.0 ? tolerance : 5.0 * grid.step();

  rep.worst_terminal_gap = -std::numeric_limits<double>::infinity();
  const auto& ul = ut.level(n);
  const auto& vl = vt.level(n);
  for (std::size_t j = 0; j < ul.size(); ++j) {
    const double gap = ul[j] - vl[j];
    if (gap > rep.worst_terminal_gap) {
      rep.worst_terminal_gap = gap;
      rep.witness_level = n;
      rep.witness_id = j;
    }
  }
  rep.precondition_ok = rep.worst_terminal_gap <= 1e-12;
  if (!rep.precondition_ok) return rep;  // terminal order failed; interior not judged

  rep.worst_gap = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < n; ++l) {
    const auto& a = ut.level(l);
    const auto& b = vt.level(l);
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double gap = a[j] - b[j];
      if (gap > rep.worst_gap) {
        rep.worst_gap = gap;
        rep.witness_level = l;
        rep.witness_id = j;
      }
    }
  }
  rep.ordered = rep.worst_gap <= rep.tolerance;
  return rep;
}

}  // namespace ppde
