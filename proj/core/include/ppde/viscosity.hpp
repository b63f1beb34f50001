#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ppde/expectation.hpp"
#include "ppde/functionals.hpp"
#include "ppde/smooth.hpp"
#include "ppde/tree.hpp"

namespace ppde {

// Test paraboloid anchored at a point: phi(s, x) = q s + p x + (g/2) x^2 in
// time-since-anchor s and displacement x from the anchor value.
struct Jet {
  double time_slope = 0.0;  // q
  double slope = 0.0;       // p
  double curvature = 0.0;   // g

  double magnitude() const;  // 1 + |q| + |p| + |g|
  Jet operator+(const Jet& other) const;
  Jet scaled(double c) const;
};

// Exit window for localized tests: a path leaves at the first step index
// >= 1 whose displacement reaches `radius`, and no later than `max_steps`.
// The realized exit index is therefore always >= 1.
struct Localization {
  double radius = 0.0;
  int max_steps = 0;

  // radius = 4 sqrt(m h) with m = max(1, n/4).
  static Localization defaults(const TimeGrid& grid);

  Localization meet(const Localization& other) const;  // min radius, min steps
  Localization shrunk(double factor) const;            // radius scaled down

  // Realized exit index on a suffix path (row 0 = anchor).
  int exit_index(const PathView& suffix) const;
  void validate() const;
};

enum class Side { sub, super };
enum class Tangency { from_above, from_below, neither };
enum class Verdict { pass, inconclusive, fail };

const char* to_string(Tangency t);
const char* to_string(Verdict v);

// A value process that can be tabulated on the scenario tree hanging off any
// anchor point: table(tree, at)(level, id) = u(t + level h, at (x) node path).
// The tree may be shorter than the remaining horizon.
struct CandidateProcess {
  std::string name;
  std::function<NodeTable<double>(const ScenarioTree&, const PathPoint&)> table;
};

// Pointwise evaluation of a path field.
CandidateProcess candidate_from_field(std::string name, PathField u);
// u_t = E[xi | F_t] on the tree: one backward-averaging sweep of the shifted
// functional over the full remaining depth, truncated to the requested tree.
CandidateProcess candidate_martingale(std::string name, const PathFunctional& xi);
// Semilinear value process: the backward scheme for (xi, gen) on the suffix.
CandidateProcess candidate_semilinear(std::string name, const PathFunctional& xi,
                                      const Generator& gen);
// base + delta * (absolute time).
CandidateProcess candidate_tilted(const CandidateProcess& base, double delta);
// Three conditional-expectation candidates (terminal value, fixed-time value,
// running max), each also tilted by +delta t and -delta t: nine in total.
std::vector<CandidateProcess> standard_candidate_family(const TimeGrid& grid, double delta);

// 5 h (1 + |q| + |p| + |g|), the default acceptance width for jet tests.
double default_jet_tolerance(double h, const Jet& jet);

struct TangencyReport {
  Jet jet;
  Side side = Side::sub;
  Localization window;
  int depth = 0;               // localized tree depth actually used
  double window_time = 0.0;    // h times the expected number of steps to exit
  double obstacle_origin = 0.0;   // (phi - u) at the anchor
  double envelope_origin = 0.0;   // stopped envelope value at the anchor
  double gap = 0.0;               // envelope - obstacle; <= 0 sub, >= 0 super
  double tolerance = 0.0;         // raw gap threshold actually applied
  Tangency verdict = Tangency::neither;
  double generator_value = 0.0;   // -q - G(t, w, u_0, p, g)
};

// Mean tangency of the jet against u at a point.  Sub mode: the obstacle
// X = phi - u on the localized suffix tree is run through the lower-envelope
// recursion W = min(X, one-step lower expectation), stopping at the exit;
// computed as -snell(-X).  Immediate stopping is always admissible, so the
// gap W_0 - X_0 is <= 0 by construction (enforced); the jet is tangent from
// above when the gap vanishes within tolerance.  Super mode mirrors with the
// upper envelope and gap >= 0.
//
// The stopped gap of a near-miss jet grows like its generator excess times
// the time the window stays open, so the acceptance threshold is the jet
// tolerance scaled by the expected open time: |gap| <= tol * h E[exit steps].
// That keeps the set of accepted jets aligned with the generator inequality
// at every depth.  tolerance <= 0 selects the default jet width.
TangencyReport tangency_in_mean(const CandidateProcess& u, const PathPoint& at, const Jet& jet,
                                const Localization& window, const DriftBound& bound, Side side,
                                const Generator& gen = Generator::heat(),
                                double tolerance = 0.0);

// Jet enumeration for the solution-property checks: a rectangular grid plus
// seeds read off the candidate's own tree increments.
struct JetSearch {
  std::vector<double> time_slopes;
  std::vector<double> slopes;
  std::vector<double> curvatures;
  bool seed_from_candidate = true;

  // q, p in {-2, -1.75, ..., 2}; g in {-4, -3.5, ..., 4}.
  static JetSearch defaults();
  std::vector<Jet> enumerate() const;  // grid jets in fixed row-major order
};

struct JetWitness {
  Jet jet;
  double gap = 0.0;
  double generator_value = 0.0;
  double margin = 0.0;  // amount by which the generator inequality fails
  double tolerance = 0.0;
};

struct CheckReport {
  Side side = Side::sub;
  Verdict verdict = Verdict::pass;
  int tested = 0;
  int tangent = 0;
  double worst_margin = 0.0;  // largest violation over tangent jets
  double slack = 0.0;         // width of the inconclusive band at |jet| = 0
  std::vector<JetWitness> witnesses;  // tangent jets with margin > tolerance
};

// Sub: every jet tangent from above must satisfy -q - G(t, w, u, p, g) <= tol.
// Violations up to tol + h (1 + |jet|) are inconclusive, beyond that the
// check fails; witnesses list every violator in enumeration order.  Super
// mirrors the inequality (>= -tol) over jets tangent from below.
CheckReport subsolution_check(const CandidateProcess& u, const Generator& gen,
                              const PathPoint& at, const JetSearch& search,
                              const Localization& window, const DriftBound& bound,
                              double tolerance = 0.0);
CheckReport supersolution_check(const CandidateProcess& u, const Generator& gen,
                                const PathPoint& at, const JetSearch& search,
                                const Localization& window, const DriftBound& bound,
                                double tolerance = 0.0);

struct MartingaleReport {
  Side side = Side::sub;
  Verdict verdict = Verdict::pass;
  double value = 0.0;     // u at the point
  double envelope = 0.0;  // optimal stopped mean of u over the remaining tree
  double gap = 0.0;       // sub: value - min envelope; super: max envelope - value
  double tolerance = 0.0;
  double slack = 0.0;
};

// u is a regular submartingale at the point when u_t <= E[u_tau] for every
// stopping time, i.e. when u_t attains min over tau of the (lower, if L > 0)
// expected stopped value.  Immediate stopping makes the gap >= 0 always;
// the check passes when it vanishes within tolerance.  Super mirrors with
// the upper envelope.  tolerance <= 0 selects 5 h (1 + |u_t|).
MartingaleReport regular_submartingale_check(const CandidateProcess& u, const PathPoint& at,
                                             const DriftBound& bound, double tolerance = 0.0);
MartingaleReport regular_supermartingale_check(const CandidateProcess& u, const PathPoint& at,
                                               const DriftBound& bound, double tolerance = 0.0);

struct EquivalenceRow {
  std::string name;
  Verdict martingale_sub = Verdict::pass;
  Verdict martingale_super = Verdict::pass;
  Verdict viscosity_sub = Verdict::pass;
  Verdict viscosity_super = Verdict::pass;
  bool consistent = false;
};

struct EquivalenceReport {
  std::vector<EquivalenceRow> rows;
  bool all_consistent = false;
};

// Cross-tabulates the optimal-stopping characterization against the jet
// characterization for each candidate, aggregated over the sample points
// (worst verdict wins).  Rows are consistent when the two verdicts agree on
// each side, with inconclusive compatible with either.
EquivalenceReport equivalence_experiment(const std::vector<CandidateProcess>& candidates,
                                         const TimeGrid& grid,
                                         const std::vector<PathPoint>& points,
                                         const Generator& gen, const DriftBound& bound,
                                         const Localization& window, const JetSearch& search);

struct ComparisonReport {
  bool precondition_ok = false;  // u <= v on every leaf
  bool ordered = false;          // u <= v + tol at every interior node
  double worst_terminal_gap = 0.0;  // max over leaves of u - v
  double worst_gap = 0.0;           // max over interior nodes of u - v
  int witness_level = -1;
  std::uint64_t witness_id = 0;
  double tolerance = 0.0;
};

// Order check from the origin over a full tree.  A terminal-order violation
// is reported as a precondition failure and the interior is not judged.
ComparisonReport comparison_check(const CandidateProcess& u, const CandidateProcess& v,
                                  const TimeGrid& grid, double tolerance = 0.0);

}  // namespace ppde
