#include "ppde/snell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "ppde/parallel.hpp"

namespace ppde {

ObstacleProcess ObstacleProcess::from_functional(const ScenarioTree& tree,
                                                 const PathFunctional& xi) {
  if (xi.dim() != 1) throw input_error("ObstacleProcess: tree paths are one-dimensional");
  ObstacleProcess obs{NodeTable<double>(tree.depth())};
  tree.for_each_node([&](int level, std::uint64_t id, const PathView& prefix) {
    obs.values.at(level, id) = xi(prefix);
  });
  return obs;
}

ObstacleProcess ObstacleProcess::from_node_function(
    const ScenarioTree& tree,
    const std::function<double(int, std::uint64_t, const PathView&)>& f) {
  ObstacleProcess obs{NodeTable<double>(tree.depth())};
  tree.for_each_node([&](int level, std::uint64_t id, const PathView& prefix) {
    obs.values.at(level, id) = f(level, id, prefix);
  });
  return obs;
}

namespace {

void check_rule_shape(const ScenarioTree& tree, const StoppingTime& rule) {
  const int n = tree.depth();
  if (rule.depth != n || rule.leaf_level.size() != tree.leaf_count())
    throw input_error("StoppingTime: shape does not match the tree");
  for (int k : rule.leaf_level)
    if (k < 0 || k > n) throw input_error("StoppingTime: stop level out of range");
}

// Min and max of leaf_level over the leaf range under each node.
struct RangeTables {
  NodeTable<int> mn, mx;
};

RangeTables leaf_range_tables(const ScenarioTree& tree, const StoppingTime& rule) {
  const int n = tree.depth();
  RangeTables t{NodeTable<int>(n), NodeTable<int>(n)};
  for (std::size_t j = 0; j < rule.leaf_level.size(); ++j)
    t.mn.at(n, j) = t.mx.at(n, j) = rule.leaf_level[j];
  for (int level = n - 1; level >= 0; --level) {
    auto& mn = t.mn.level(level);
    auto& mx = t.mx.level(level);
    const auto& mn_next = t.mn.level(level + 1);
    const auto& mx_next = t.mx.level(level + 1);
    for (std::size_t j = 0; j < mn.size(); ++j) {
      mn[j] = std::min(mn_next[2 * j], mn_next[2 * j + 1]);
      mx[j] = std::max(mx_next[2 * j], mx_next[2 * j + 1]);
    }
  }
  return t;
}

}  // namespace

bool is_adapted(const ScenarioTree& tree, const StoppingTime& rule) {
  check_rule_shape(tree, rule);
  auto tables = leaf_range_tables(tree, rule);

  // Walk the tree from the root, descending only through continue regions.  A
  // node is consistent when either every leaf below stops exactly here, or
  // every leaf below stops strictly later.
  std::vector<std::pair<int, std::uint64_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [level, id] = stack.back();
    stack.pop_back();
    int mn = tables.mn.at(level, id);
    int mx = tables.mx.at(level, id);
    if (mn < level) return false;  // a leaf claims an earlier stop its siblings missed
    if (mn == level) {
      if (mx != level) return false;  // split decision inside one information set
      continue;
    }
    if (level == tree.depth()) return false;  // stop level beyond the horizon
    stack.emplace_back(level + 1, 2 * id);
    stack.emplace_back(level + 1, 2 * id + 1);
  }
  return true;
}

SnellEnvelope snell(const ScenarioTree& tree, const ObstacleProcess& obstacle,
                    const DriftBound& bound) {
  const int n = tree.depth();
  if (obstacle.values.depth() != n) throw input_error("snell: obstacle depth mismatch");
  bound.validate_for_step(tree.grid().step());

  SnellEnvelope env;
  env.obstacle = obstacle.values;
  env.value = NodeTable<double>(n);
  env.continuation = NodeTable<double>(n);
  env.compensator = NodeTable<double>(n);
  env.extremal = NodeTable<double>(n);
  env.drift_bound = bound.value;

  env.value.level(n) = obstacle.values.level(n);
  env.continuation.level(n) = obstacle.values.level(n);

  const double half_spread = 0.5 * bound.value * tree.increment();
  for (int level = n - 1; level >= 0; --level) {
    const std::vector<double>& next = env.value.level(level + 1);
    const std::vector<double>& obs = env.obstacle.level(level);
    std::vector<double>& y = env.value.level(level);
    std::vector<double>& s = env.continuation.level(level);
    std::vector<double>& dk = env.compensator.level(level);
    std::vector<double>& lam = env.extremal.level(level);
    parallel_for(y.size(), 4096, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        double down = next[2 * j];
        double up = next[2 * j + 1];
        double diff = up - down;
        s[j] = 0.5 * (up + down) + half_spread * std::abs(diff);
        lam[j] = diff > 0.0 ? bound.value : (diff < 0.0 ? -bound.value : 0.0);
        y[j] = std::max(obs[j], s[j]);
        dk[j] = y[j] - s[j];
      }
    });
  }
  env.root = env.value.at(0, 0);
  return env;
}

namespace {

StoppingTime first_level_where(const ScenarioTree& tree, const SnellEnvelope& env,
                               double eps) {
  const int n = tree.depth();
  StoppingTime rule{n, std::vector<int>(tree.leaf_count(), n)};
  parallel_for(rule.leaf_level.size(), 1024, [&](std::size_t b, std::size_t e) {
    for (std::size_t id = b; id < e; ++id) {
      for (int level = 0; level < n; ++level) {
        std::uint64_t ancestor = id >> (n - level);
        if (env.value.at(level, ancestor) - env.obstacle.at(level, ancestor) <= eps) {
          rule.leaf_level[id] = level;
          break;
        }
      }
    }
  });
  return rule;
}

}  // namespace

StoppingTime optimal_rule(const ScenarioTree& tree, const SnellEnvelope& env) {
  // Contact is exact equality, so the zero threshold finds Y == X precisely.
  return first_level_where(tree, env, 0.0);
}

StoppingTime hitting_time_eps(const ScenarioTree& tree, const SnellEnvelope& env, double eps) {
  if (!(eps >= 0.0)) throw input_error("hitting_time_eps: eps must be nonnegative");
  return first_level_where(tree, env, eps);
}

double value_of_rule(const ScenarioTree& tree, const ObstacleProcess& obstacle,
                     const StoppingTime& rule, const DriftBound& bound) {
  const int n = tree.depth();
  if (obstacle.values.depth() != n) throw input_error("value_of_rule: obstacle depth mismatch");
  if (!is_adapted(tree, rule)) throw input_error("value_of_rule: rule is not adapted");
  bound.validate_for_step(tree.grid().step());

  auto tables = leaf_range_tables(tree, rule);
  const double half_spread = 0.5 * bound.value * tree.increment();

  std::vector<double> cur = obstacle.values.level(n);
  for (int level = n - 1; level >= 0; --level) {
    std::vector<double> next(std::size_t{1} << level);
    const auto& obs = obstacle.values.level(level);
    for (std::size_t j = 0; j < next.size(); ++j) {
      if (tables.mn.at(level, j) == level) {
        next[j] = obs[j];
      } else {
        double down = cur[2 * j];
        double up = cur[2 * j + 1];
        next[j] = 0.5 * (up + down) + half_spread * std::abs(up - down);
      }
    }
    cur.swap(next);
  }
  return cur[0];
}

DoobMeyerCheck doob_meyer(const ScenarioTree& tree, const SnellEnvelope& env) {
  const int n = tree.depth();
  const double h = tree.grid().step();
  DoobMeyerCheck out;
  out.envelope_dominates = true;
  out.min_compensator_increment = 0.0;
  for (int level = 0; level <= n; ++level) {
    const auto& y = env.value.level(level);
    const auto& x = env.obstacle.level(level);
    const auto& dk = env.compensator.level(level);
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] < x[j]) out.envelope_dominates = false;
      out.skorokhod_sum += (y[j] - x[j]) * dk[j];
      out.min_compensator_increment = std::min(out.min_compensator_increment, dk[j]);
      if (level < n) {
        auto p = step_probabilities(env.extremal.at(level, j), h);
        double predicted = p.up * env.value.at(level + 1, 2 * j + 1) +
                           p.down * env.value.at(level + 1, 2 * j);
        out.max_martingale_defect =
            std::max(out.max_martingale_defect,
                     std::abs(predicted - env.continuation.at(level, j)));
      }
    }
  }
  return out;
}

double stopped_recursion_at(const ScenarioTree& tree, const SnellEnvelope& env,
                            const StoppingTime& rule, int level) {
  const int n = tree.depth();
  if (level < 0 || level > n) throw input_error("stopped_recursion_at: level out of range");
  if (!is_adapted(tree, rule)) throw input_error("stopped_recursion_at: rule is not adapted");

  auto tables = leaf_range_tables(tree, rule);
  const double half_spread = 0.5 * env.drift_bound * tree.increment();

  std::vector<double> cur = env.value.level(level);
  for (int k = level - 1; k >= 0; --k) {
    std::vector<double> next(std::size_t{1} << k);
    for (std::size_t j = 0; j < next.size(); ++j) {
      if (tables.mn.at(k, j) == k) {
        next[j] = env.value.at(k, j);
      } else {
        double down = cur[2 * j];
        double up = cur[2 * j + 1];
        next[j] = 0.5 * (up + down) + half_spread * std::abs(up - down);
      }
    }
    cur.swap(next);
  }
  return cur[0];
}

DriftControl extremal_measure(const SnellEnvelope& env) {
  // Drop the leaf level; controls act on inner nodes only.
  const int n = env.extremal.depth();
  DriftControl control{NodeTable<double>(n > 0 ? n - 1 : 0)};
  for (int level = 0; level < n; ++level) control.lambda.level(level) = env.extremal.level(level);
  return control;
}

double linear_snell_under(const ScenarioTree& tree, const ObstacleProcess& obstacle,
                          const DriftControl& control) {
  const int n = tree.depth();
  if (obstacle.values.depth() != n)
    throw input_error("linear_snell_under: obstacle depth mismatch");
  if (control.lambda.depth() < n - 1)
    throw input_error("linear_snell_under: control table too shallow");
  const double h = tree.grid().step();

  std::vector<double> cur = obstacle.values.level(n);
  for (int level = n - 1; level >= 0; --level) {
    std::vector<double> next(std::size_t{1} << level);
    const auto& obs = obstacle.values.level(level);
    for (std::size_t j = 0; j < next.size(); ++j) {
      auto p = step_probabilities(control.lambda.at(level, j), h);
      next[j] = std::max(obs[j], p.up * cur[2 * j + 1] + p.down * cur[2 * j]);
    }
    cur.swap(next);
  }
  return cur[0];
}

void write_envelope_csv(std::ostream& os, const SnellEnvelope& env) {
  os << "level,node_id,X,Y,S,dK,lambda_star,is_stop\n";
  char buf[192];
  const int n = env.value.depth();
  for (int level = 0; level <= n; ++level) {
    const auto& x = env.obstacle.level(level);
    const auto& y = env.value.level(level);
    const auto& s = env.continuation.level(level);
    const auto& dk = env.compensator.level(level);
    for (std::size_t j = 0; j < y.size(); ++j) {
      int stop = y[j] == x[j] ? 1 : 0;
      if (level < n) {
        std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", level,
                      static_cast<unsigned long long>(j), x[j], y[j], s[j], dk[j],
                      env.extremal.at(level, j), stop);
      } else {
        std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g,%.17g,%.17g,,%d\n", level,
                      static_cast<unsigned long long>(j), x[j], y[j], s[j], dk[j], stop);
      }
      os << buf;
    }
  }
}

}  // namespace ppde
