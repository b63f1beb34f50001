#include "ppde/expectation.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "ppde/parallel.hpp"

namespace ppde {

DriftBound::DriftBound(double L) : value(L) {
  if (!(L >= 0.0) || !std::isfinite(L))
    throw invalid_drift_error("DriftBound: bound must be finite and nonnegative");
}

void DriftBound::validate_for_step(double h) const {
  if (value * std::sqrt(h) > 1.0)
    throw invalid_drift_error("DriftBound: L sqrt(h) must not exceed 1");
}

StepProbabilities step_probabilities(double lambda, double h) {
  if (!(h > 0.0)) throw input_error("step_probabilities: step must be positive");
  double s = lambda * std::sqrt(h);
  if (std::abs(s) > 1.0)
    throw invalid_drift_error("step_probabilities: |lambda| sqrt(h) must not exceed 1");
  return {0.5 * (1.0 + s), 0.5 * (1.0 - s)};
}

namespace {

enum class Direction { upper, lower };

ExpectationResult extremal_expectation(const ScenarioTree& tree,
                                       const std::vector<double>& leaves, DriftBound L,
                                       Direction dir) {
  const int n = tree.depth();
  if (leaves.size() != tree.leaf_count())
    throw input_error("expectation: leaf array size mismatch");
  L.validate_for_step(tree.grid().step());

  ExpectationResult res;
  res.value = NodeTable<double>(n);
  res.extremal = n > 0 ? NodeTable<double>(n - 1) : NodeTable<double>(0);
  res.value.level(n) = leaves;

  const double half_spread = 0.5 * L.value * tree.increment();
  for (int level = n - 1; level >= 0; --level) {
    const std::vector<double>& next = res.value.level(level + 1);
    std::vector<double>& cur = res.value.level(level);
    std::vector<double>& lam = res.extremal.level(level);
    parallel_for(cur.size(), 4096, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        double down = next[2 * j];
        double up = next[2 * j + 1];
        double diff = up - down;
        double mean = 0.5 * (up + down);
        if (dir == Direction::upper) {
          cur[j] = mean + half_spread * std::abs(diff);
          lam[j] = diff > 0.0 ? L.value : (diff < 0.0 ? -L.value : 0.0);
        } else {
          cur[j] = mean - half_spread * std::abs(diff);
          lam[j] = diff > 0.0 ? -L.value : (diff < 0.0 ? L.value : 0.0);
        }
      }
    });
  }
  res.root = res.value.at(0, 0);
  return res;
}

}  // namespace

ExpectationResult upper_expectation(const ScenarioTree& tree,
                                    const std::vector<double>& leaves, DriftBound L) {
  return extremal_expectation(tree, leaves, L, Direction::upper);
}

ExpectationResult lower_expectation(const ScenarioTree& tree,
                                    const std::vector<double>& leaves, DriftBound L) {
  return extremal_expectation(tree, leaves, L, Direction::lower);
}

ExpectationResult upper_expectation(const ScenarioTree& tree, const PathFunctional& xi,
                                    DriftBound L) {
  return upper_expectation(tree, leaf_values(tree, xi), L);
}

ExpectationResult lower_expectation(const ScenarioTree& tree, const PathFunctional& xi,
                                    DriftBound L) {
  return lower_expectation(tree, leaf_values(tree, xi), L);
}

double expectation_under(const ScenarioTree& tree, const std::vector<double>& leaves,
                         const DriftControl& control) {
  const int n = tree.depth();
  if (leaves.size() != tree.leaf_count())
    throw input_error("expectation_under: leaf array size mismatch");
  if (control.lambda.depth() < n - 1)
    throw input_error("expectation_under: control table too shallow");

  const double h = tree.grid().step();
  std::vector<double> cur = leaves;
  for (int level = n - 1; level >= 0; --level) {
    std::vector<double> next(std::size_t{1} << level);
    for (std::size_t j = 0; j < next.size(); ++j) {
      auto [up, down] = step_probabilities(control.lambda.at(level, j), h);
      next[j] = up * cur[2 * j + 1] + down * cur[2 * j];
    }
    cur.swap(next);
  }
  return cur[0];
}

std::vector<double> leaf_values(const ScenarioTree& tree, const PathFunctional& xi) {
  const int n = tree.depth();
  std::vector<double> out(tree.leaf_count());
  // Rebuild each leaf path from its id; cheap relative to the 2^n growth and
  // embarrassingly parallel.
  parallel_for(out.size(), 1024, [&](std::size_t b, std::size_t e) {
    std::vector<double> buf(static_cast<std::size_t>(n) + 1);
    for (std::size_t id = b; id < e; ++id) {
      tree.node_path(n, id, buf);
      out[id] = xi(PathView{tree.grid().step(), 1, buf});
    }
  });
  return out;
}

NodeTable<double> conditional_mean_sweep(const ScenarioTree& tree,
                                         const std::vector<double>& leaves) {
  const int n = tree.depth();
  if (leaves.size() != tree.leaf_count())
    throw input_error("conditional_mean_sweep: leaf array size mismatch");
  NodeTable<double> table(n);
  table.level(n) = leaves;
  for (int level = n - 1; level >= 0; --level) {
    const std::vector<double>& next = table.level(level + 1);
    std::vector<double>& cur = table.level(level);
    parallel_for(cur.size(), 4096, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) cur[j] = 0.5 * (next[2 * j + 1] + next[2 * j]);
    });
  }
  return table;
}

void write_node_csv(std::ostream& os, const ExpectationResult& result) {
  os << "level,node_id,value,lambda_star\n";
  char buf[96];
  const int n = result.value.depth();
  for (int level = 0; level <= n; ++level) {
    const auto& vals = result.value.level(level);
    for (std::size_t j = 0; j < vals.size(); ++j) {
      if (level < n) {
        std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g\n", level,
                      static_cast<unsigned long long>(j), vals[j],
                      result.extremal.at(level, j));
      } else {
        std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,\n", level,
                      static_cast<unsigned long long>(j), vals[j]);
      }
      os << buf;
    }
  }
}

}  // namespace ppde
