#include "ppde/tree.hpp"

#include <cmath>

namespace ppde {

ScenarioTree::ScenarioTree(TimeGrid grid) : grid_(grid) {
  if (grid_.steps() > max_tree_depth)
    throw input_error("ScenarioTree: depth exceeds the hard cap (" +
                      std::to_string(max_tree_depth) + ")");
  increment_ = std::sqrt(grid_.step());
}

void ScenarioTree::node_path(int level, std::uint64_t id, std::vector<double>& out) const {
  if (level < 0 || level > depth()) throw input_error("ScenarioTree: level out of range");
  if (id >= level_size(level)) throw input_error("ScenarioTree: node id out of range");
  out.resize(static_cast<std::size_t>(level) + 1);
  out[0] = 0.0;
  for (int k = 0; k < level; ++k) {
    bool up = (id >> (level - 1 - k)) & 1u;
    out[static_cast<std::size_t>(k) + 1] = up ? out[k] + increment_ : out[k] - increment_;
  }
}

PathPoint node_point(const ScenarioTree& tree, int level, std::uint64_t id) {
  std::vector<double> prefix;
  tree.node_path(level, id, prefix);
  return PathPoint(tree.grid(), 1, level, std::move(prefix));
}

void ScenarioTree::for_each_node(
    const std::function<void(int, std::uint64_t, const PathView&)>& f) const {
  const int n = depth();
  std::vector<double> buf(static_cast<std::size_t>(n) + 1);
  buf[0] = 0.0;

  // Explicit preorder walk; ids are rebuilt from the move stack.
  std::vector<int> moves;  // -1 = not yet descended, 0 = down done, 1 = both done
  int level = 0;
  std::uint64_t id = 0;
  f(0, 0, PathView{grid_.step(), 1, {buf.data(), 1}});
  moves.assign(static_cast<std::size_t>(n), -1);
  while (true) {
    if (level < n && moves[static_cast<std::size_t>(level)] < 1) {
      // descend: first down (bit 0), then up (bit 1)
      int branch = moves[static_cast<std::size_t>(level)] + 1;
      moves[static_cast<std::size_t>(level)] = branch;
      bool up = branch == 1;
      buf[static_cast<std::size_t>(level) + 1] =
          up ? buf[level] + increment_ : buf[level] - increment_;
      id = (id << 1) | static_cast<std::uint64_t>(branch);
      ++level;
      if (level < n) moves[static_cast<std::size_t>(level)] = -1;
      f(level, id, PathView{grid_.step(), 1, {buf.data(), static_cast<std::size_t>(level) + 1}});
    } else {
      if (level == 0) break;
      --level;
      id >>= 1;
    }
  }
}

}  // namespace ppde
