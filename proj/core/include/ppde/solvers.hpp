#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "ppde/expectation.hpp"
#include "ppde/montecarlo.hpp"
#include "ppde/smooth.hpp"
#include "ppde/tree.hpp"

namespace ppde {

// ---------------------------------------------------------------------------
// Heat baseline: terminal functional averaged backward through the tree.

// Exact expectation of xi under the unbiased walk; the all-node table doubles
// as a discrete harmonic (martingale) extension of the terminal data.
NodeTable<double> heat_sweep(const ScenarioTree& tree, const PathFunctional& xi);
double solve_heat(const PathFunctional& xi, const TimeGrid& grid);
McEstimate solve_heat_mc(const PathFunctional& xi, const TimeGrid& grid, int dim,
                         std::size_t paths, std::uint64_t seed);

// ---------------------------------------------------------------------------
// One-step scheme operators.  A backward solve applies op per inner node to
// the two child values; monotonicity in (up, down) is what makes the scheme
// trustworthy and is checked separately, never assumed.

struct StepContext {
  double t = 0.0;         // time at the node
  double h = 0.0;         // grid step
  double increment = 0.0; // sqrt(h)
  PathView prefix;        // path up to the node
};

using SchemeOperator = std::function<double(const StepContext&, double up, double down)>;

// mean + h * G(t, w, mean, (up-down)/(2 sqrt h), 0): the curvature half is
// already inside the two-point mean, so the generator is read at gamma = 0.
// Covers every generator of the form gamma/2 + F(t, w, y, z).
SchemeOperator scheme_for(const Generator& gen);

struct SchemeResult {
  NodeTable<double> value;
  double root = 0.0;
};

SchemeResult monotone_scheme(const ScenarioTree& tree, const std::vector<double>& leaves,
                             const SchemeOperator& op);
SchemeResult monotone_scheme(const ScenarioTree& tree, const PathFunctional& xi,
                             const SchemeOperator& op);

// Worst violation of op(up, down) <= op(up', down') over sampled ordered
// pairs; <= 0 up to rounding means monotone.
double monotonicity_margin(const SchemeOperator& op, const TimeGrid& grid, int trials,
                           unsigned seed);

// Difference between the scheme's one-step quotient on a shifted paraboloid
// and the classical residual at the same point.  Zero up to rounding for the
// mean and drift operators, O(h) for value-dependent drivers.
double consistency_deviation(const Generator& gen, const SchemeOperator& op,
                             const Paraboloid& phi, const PathPoint& at, double constant = 0.0);

// ---------------------------------------------------------------------------
// Explicit backward scheme for the semilinear equation
//   -d_t u - gamma/2 - F(t, w, u, du) = 0, u(T) = xi.

struct BsdeResult {
  NodeTable<double> y;
  NodeTable<double> z;       // inner nodes: (up - down) / (2 sqrt h)
  double root = 0.0;
  double apriori_bound = 0.0;  // (max|xi| + T max|F(.,0,0)|) e^{LT}
  bool stability_warning = false;  // explicit step too coarse for the modulus
};

BsdeResult solve_bsde(const ScenarioTree& tree, const PathFunctional& xi, const Generator& gen);

// ---------------------------------------------------------------------------
// Recombining state lattice for terminal data xi = psi(w_T) and generators
// that read at most the current path value.  Identical values to the tree
// backends (induction on levels), but quadratic instead of exponential cost,
// so it reaches step counts the tree cannot.

double lattice_scheme(const TimeGrid& grid, const std::function<double(double)>& profile,
                      const SchemeOperator& op);
double solve_bsde_lattice(const TimeGrid& grid, const PathFunctional& xi, const Generator& gen);
double upper_expectation_lattice(const TimeGrid& grid, const PathFunctional& xi,
                                 const DriftBound& bound);

// Exact expectation of a payoff of (terminal value, running maximum).  The
// pair (w, max w) is Markov on the increment lattice, so the sweep costs
// O(n^3) where the path tree is exponential; this is the backend that reaches
// the lookback step counts the tree cannot.
double lookback_lattice(const TimeGrid& grid,
                        const std::function<double(double, double)>& payoff);

// ---------------------------------------------------------------------------
// Step refinement table against a fixed target value.

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double value = 0.0;
  double error = 0.0;   // |value - target|
  double ratio = 0.0;   // previous error / this error (0 on the first row)
  double order = 0.0;   // log(ratio) / log(step shrink factor)
};

std::vector<ConvergenceRow> convergence_study(const std::function<double(int)>& value_at,
                                              double target, const std::vector<int>& steps,
                                              double horizon);
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);

// ---------------------------------------------------------------------------
// Markovian finite-difference reference on [-radius, radius] with Dirichlet
// data psi at the edges.  Explicit in time; construction rejects step sizes
// that break the positive-coefficient (CFL) condition.

struct FdConfig {
  double horizon = 1.0;
  int space_cells = 300;   // even, so x = 0 is a grid point
  int time_steps = 0;      // 0: smallest count satisfying the CFL bound
  double radius = 0.0;     // 0: 6 sqrt(horizon)
};

double markovian_fd_heat(const std::function<double(double)>& psi, FdConfig config);
double markovian_fd_hjb(const std::function<double(double)>& psi, double bound, FdConfig config);

// ---------------------------------------------------------------------------
// Response of the value to a constant shift of the dynamics; runs on the
// lattice when the terminal functional carries a state profile, on the tree
// otherwise.

struct StabilityReport {
  double base = 0.0;
  double shifted = 0.0;
  double delta = 0.0;   // shifted - base
  double shift = 0.0;
};

StabilityReport stability_experiment(const TimeGrid& grid, const PathFunctional& xi,
                                     const Generator& gen, double eps);

}  // namespace ppde
