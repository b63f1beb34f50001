#pragma once

#include <iosfwd>

#include "ppde/functionals.hpp"
#include "ppde/tree.hpp"

namespace ppde {

// Bound L >= 0 on the absolute drift of each component of the tilt.
struct DriftBound {
  double value = 0.0;
  DriftBound() = default;
  explicit DriftBound(double L);
  // The one-step probabilities stay in [0,1] only while |lambda| sqrt(h) <= 1.
  void validate_for_step(double h) const;
};

struct StepProbabilities {
  double up;
  double down;
};

// One-step tilt by drift lambda: p_up = (1 + lambda sqrt(h)) / 2.  The tilted
// increment has mean lambda*h and variance h (1 - lambda^2 h).
StepProbabilities step_probabilities(double lambda, double h);

// A drift choice per interior node (levels 0..depth-1 used).
struct DriftControl {
  NodeTable<double> lambda;
};

struct ExpectationResult {
  double root = 0.0;
  NodeTable<double> value;     // per-node backward values, levels 0..depth
  NodeTable<double> extremal;  // optimizing drift, interior levels; 0 on ties
};

// sup over adapted drifts bounded by L of E^{P_lambda}[leaf values]:
// V = mean(children) + (L sqrt(h)/2) |V_up - V_down| backwards from the
// leaves.  The maximizing drift is L sign(V_up - V_down).
ExpectationResult upper_expectation(const ScenarioTree& tree,
                                    const std::vector<double>& leaf_values, DriftBound L);
// inf counterpart; equals -upper(-X) and records the minimizing drift.
ExpectationResult lower_expectation(const ScenarioTree& tree,
                                    const std::vector<double>& leaf_values, DriftBound L);

ExpectationResult upper_expectation(const ScenarioTree& tree, const PathFunctional& xi,
                                    DriftBound L);
ExpectationResult lower_expectation(const ScenarioTree& tree, const PathFunctional& xi,
                                    DriftBound L);

// Plain expectation under one fixed adapted drift.
double expectation_under(const ScenarioTree& tree, const std::vector<double>& leaf_values,
                         const DriftControl& control);

// Leaf values of a functional over the whole tree, in leaf id order.
std::vector<double> leaf_values(const ScenarioTree& tree, const PathFunctional& xi);

// One backward-averaging sweep: conditional expectations of the leaf values
// at every node (the L = 0 value table).
NodeTable<double> conditional_mean_sweep(const ScenarioTree& tree,
                                         const std::vector<double>& leaves);

// CSV export, header "level,node_id,value,lambda_star" (leaves print an
// empty drift column).
void write_node_csv(std::ostream& os, const ExpectationResult& result);

}  // namespace ppde
