#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ppde/grid.hpp"

namespace ppde {

// Dense per-level node tables get large fast: a full table at depth n holds
// 2^{n+1}-1 entries.  The cap keeps a single table under ~70 MB.
inline constexpr int max_tree_depth = 22;

// Non-recombining binomial tree on a TimeGrid (one-dimensional): every node
// at level i is a path prefix with increments +-sqrt(h).  Node ids encode the
// moves in their bits, most significant move first, 1 = up.  Children of
// (level, id) are (level+1, 2*id) [down] and (level+1, 2*id+1) [up].
class ScenarioTree {
 public:
  explicit ScenarioTree(TimeGrid grid);

  const TimeGrid& grid() const { return grid_; }
  int depth() const { return grid_.steps(); }
  double increment() const { return increment_; }
  std::uint64_t level_size(int level) const { return std::uint64_t{1} << level; }
  std::uint64_t leaf_count() const { return level_size(depth()); }

  // Fills out[0..level] with the node's path values (out[0] = 0).
  void node_path(int level, std::uint64_t id, std::vector<double>& out) const;

  // Preorder sweep over all nodes.  The callback receives (level, id, prefix
  // view); the view is valid only for the duration of the call.
  void for_each_node(const std::function<void(int, std::uint64_t, const PathView&)>& f) const;

 private:
  TimeGrid grid_;
  double increment_;
};

// The anchored prefix point sitting at a tree node.
PathPoint node_point(const ScenarioTree& tree, int level, std::uint64_t id);

// Per-node storage, indexed (level, id) with contiguous level arrays.
template <class T>
class NodeTable {
 public:
  NodeTable() = default;
  explicit NodeTable(int depth) : levels_(static_cast<std::size_t>(depth) + 1) {
    if (depth < 0 || depth > max_tree_depth)
      throw input_error("NodeTable: depth out of range");
    for (int i = 0; i <= depth; ++i)
      levels_[static_cast<std::size_t>(i)].resize(std::size_t{1} << i);
  }

  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  std::vector<T>& level(int i) { return levels_[static_cast<std::size_t>(i)]; }
  const std::vector<T>& level(int i) const { return levels_[static_cast<std::size_t>(i)]; }
  T& at(int level, std::uint64_t id) { return levels_[static_cast<std::size_t>(level)][id]; }
  const T& at(int level, std::uint64_t id) const {
    return levels_[static_cast<std::size_t>(level)][id];
  }

 private:
  std::vector<std::vector<T>> levels_;
};

}  // namespace ppde
