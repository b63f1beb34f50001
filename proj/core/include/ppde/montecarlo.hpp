#pragma once

#include <cstdint>
#include <span>

#include "ppde/expectation.hpp"
#include "ppde/functionals.hpp"

namespace ppde {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
};

// Exponential change-of-measure weight along one sampled path:
// exp(sum_i lambda_i . dB_i - 0.5 sum_i |lambda_i|^2 h).  `lambdas` holds the
// per-step drifts, row-major (steps x dim).
double girsanov_weight(const DiscretePath& path, std::span<const double> lambdas);

// Adapted drift rule: fills lambda for step i from the path prefix up to t_i.
using DriftRule = std::function<void(int, const PathView&, std::span<double>)>;

DriftRule zero_drift();
DriftRule constant_drift(std::vector<double> lambda);

// Importance-sampled estimate of E^{P_lambda}[xi]: simulate Gaussian
// increments under the reference measure, weight each path by its
// change-of-measure factor.  Deterministic for a fixed seed: every path has
// its own counter-derived RNG stream, and the reduction order is fixed.
McEstimate expectation_mc(const PathFunctional& xi, const TimeGrid& grid, int dim,
                          const DriftRule& drift, std::size_t n_paths, std::uint64_t seed);

}  // namespace ppde
