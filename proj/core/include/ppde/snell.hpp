#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ppde/expectation.hpp"
#include "ppde/functionals.hpp"
#include "ppde/tree.hpp"

namespace ppde {

// Reward available on immediate exercise, one value per tree node.
struct ObstacleProcess {
  NodeTable<double> values;

  // X at node (i, j) is xi applied to the node's path prefix, i.e. the payoff
  // of stopping there.
  static ObstacleProcess from_functional(const ScenarioTree& tree, const PathFunctional& xi);
  static ObstacleProcess from_node_function(
      const ScenarioTree& tree,
      const std::function<double(int, std::uint64_t, const PathView&)>& f);
};

// A stopping rule recorded along each leaf path: leaf_level[id] is the level
// at which the path with that leaf id stops.  The rule is adapted when the
// decision at level k depends only on the first k moves; is_adapted verifies
// that, and every consumer below requires it.
struct StoppingTime {
  int depth = 0;
  std::vector<int> leaf_level;
};

bool is_adapted(const ScenarioTree& tree, const StoppingTime& rule);

// Smallest worst-case-expectation supermartingale dominating the obstacle.
// Backward step: S = one-step upper expectation of the next level,
// Y = max(X, S), dK = Y - S.  By construction Y - X and dK never both exceed
// zero at a node; contact (Y == X) holds bitwise because max returns one of
// its operands.
struct SnellEnvelope {
  NodeTable<double> obstacle;      // X
  NodeTable<double> value;         // Y
  NodeTable<double> continuation;  // S (leaves: S = X)
  NodeTable<double> compensator;   // dK = Y - S >= 0 (leaves: 0)
  NodeTable<double> extremal;      // maximizing drift per inner node
  double root = 0.0;
  double drift_bound = 0.0;        // bound the envelope was built with
};

SnellEnvelope snell(const ScenarioTree& tree, const ObstacleProcess& obstacle,
                    const DriftBound& bound);

// First contact Y == X along each path; attains the envelope value.
StoppingTime optimal_rule(const ScenarioTree& tree, const SnellEnvelope& env);

// First time Y - X <= eps; sacrifices at most eps of the optimal value.
StoppingTime hitting_time_eps(const ScenarioTree& tree, const SnellEnvelope& env, double eps);

// Worst-case expected reward of an adapted rule.  Never exceeds the envelope
// root, with equality for optimal_rule.
double value_of_rule(const ScenarioTree& tree, const ObstacleProcess& obstacle,
                     const StoppingTime& rule, const DriftBound& bound);

// Decomposition diagnostics for the envelope: Y + K is a martingale under the
// recorded extremal drift, K has nonnegative increments that only act on the
// contact set, and Y dominates X.
struct DoobMeyerCheck {
  double max_martingale_defect = 0.0;   // |E_lambda*[Y_next] - S| over inner nodes
  double skorokhod_sum = 0.0;           // sum over nodes of (Y - X) * dK
  double min_compensator_increment = 0.0;
  bool envelope_dominates = false;      // Y >= X everywhere
};

DoobMeyerCheck doob_meyer(const ScenarioTree& tree, const SnellEnvelope& env);

// Upper expectation of Y stopped at min(rule, level).  Y is a one-step upper
// expectation martingale strictly before contact, so for rules that stop no
// earlier than hitting_time_eps this reproduces the root value.
double stopped_recursion_at(const ScenarioTree& tree, const SnellEnvelope& env,
                            const StoppingTime& rule, int level);

// The drift choices that realize the envelope, and the classical (fixed
// measure) envelope under any given control.
DriftControl extremal_measure(const SnellEnvelope& env);
double linear_snell_under(const ScenarioTree& tree, const ObstacleProcess& obstacle,
                          const DriftControl& control);

void write_envelope_csv(std::ostream& os, const SnellEnvelope& env);

}  // namespace ppde
