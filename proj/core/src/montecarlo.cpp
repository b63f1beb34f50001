#include "ppde/montecarlo.hpp"

#include <cmath>
#include <random>

#include "ppde/parallel.hpp"

namespace ppde {

double girsanov_weight(const DiscretePath& path, std::span<const double> lambdas) {
  const int n = path.grid().steps();
  const int d = path.dim();
  if (lambdas.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(d))
    throw input_error("girsanov_weight: drift array must be (steps x dim)");
  const double h = path.grid().step();
  double exponent = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      double lam = lambdas[static_cast<std::size_t>(i) * d + k];
      double db = path.value(i + 1, k) - path.value(i, k);
      exponent += lam * db - 0.5 * lam * lam * h;
    }
  }
  return std::exp(exponent);
}

DriftRule zero_drift() {
  return [](int, const PathView&, std::span<double> out) {
    for (double& v : out) v = 0.0;
  };
}

DriftRule constant_drift(std::vector<double> lambda) {
  return [lambda = std::move(lambda)](int, const PathView&, std::span<double> out) {
    if (out.size() != lambda.size())
      throw input_error("constant_drift: dimension mismatch");
    for (std::size_t k = 0; k < lambda.size(); ++k) out[k] = lambda[k];
  };
}

namespace {

// splitmix64: decorrelates consecutive path indices into seed material.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

McEstimate expectation_mc(const PathFunctional& xi, const TimeGrid& grid, int dim,
                          const DriftRule& drift, std::size_t n_paths, std::uint64_t seed) {
  if (dim < 1) throw input_error("expectation_mc: dimension must be at least 1");
  if (n_paths < 2) throw input_error("expectation_mc: need at least two paths");
  const int n = grid.steps();
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);

  std::vector<double> weighted(n_paths);
  parallel_for(n_paths, 512, [&](std::size_t b, std::size_t e) {
    std::vector<double> values(static_cast<std::size_t>(n + 1) * dim, 0.0);
    std::vector<double> lam(static_cast<std::size_t>(dim));
    for (std::size_t p = b; p < e; ++p) {
      std::mt19937_64 rng(mix(seed ^ mix(p + 1)));
      std::normal_distribution<double> gauss(0.0, 1.0);
      double exponent = 0.0;
      for (int i = 0; i < n; ++i) {
        PathView prefix{h, dim, {values.data(), static_cast<std::size_t>(i + 1) * dim}};
        drift(i, prefix, lam);
        for (int k = 0; k < dim; ++k) {
          double db = gauss(rng) * sqrt_h;
          values[static_cast<std::size_t>(i + 1) * dim + k] =
              values[static_cast<std::size_t>(i) * dim + k] + db;
          exponent += lam[static_cast<std::size_t>(k)] * db -
                      0.5 * lam[static_cast<std::size_t>(k)] * lam[static_cast<std::size_t>(k)] * h;
        }
      }
      PathView full{h, dim, values};
      weighted[p] = std::exp(exponent) * xi(full);
    }
  });

  // Fixed-order reduction keeps the estimate independent of the worker count.
  double sum = 0.0;
  for (double v : weighted) sum += v;
  double mean = sum / static_cast<double>(n_paths);
  double ss = 0.0;
  for (double v : weighted) ss += (v - mean) * (v - mean);
  double variance = ss / static_cast<double>(n_paths - 1);
  return {mean, std::sqrt(variance / static_cast<double>(n_paths)), n_paths};
}

}  // namespace ppde
