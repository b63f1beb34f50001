#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "ppde/errors.hpp"

namespace ppde {

// Uniform grid 0 = t_0 < t_1 < ... < t_n = T with step h = T/n.
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double step() const { return step_; }
  double time(int i) const;

  // Nearest grid index of t; rejects t off the grid or outside [0, T].
  int index_of(double t) const;

  bool same_step(const TimeGrid& other) const;

 private:
  double horizon_;
  int steps_;
  double step_;
};

// Lightweight handle on a sampled path prefix: `length()` rows of `dim`
// doubles at spacing `step`.  Row 0 is the start of the path.  Valid only as
// long as the underlying storage.
struct PathView {
  double step = 0.0;
  int dim = 1;
  std::span<const double> data;

  int length() const { return dim > 0 ? static_cast<int>(data.size()) / dim : 0; }
  int last_index() const { return length() - 1; }
  double at(int i, int k = 0) const {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim) +
                static_cast<std::size_t>(k)];
  }
  std::span<const double> row(int i) const {
    return data.subspan(static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                        static_cast<std::size_t>(dim));
  }
};

// Path sampled on a full TimeGrid, row-major (steps+1) x dim.  Paths start at
// the origin: row 0 must be identically zero.
class DiscretePath {
 public:
  DiscretePath(TimeGrid grid, int dim);
  DiscretePath(TimeGrid grid, int dim, std::vector<double> values);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }

  double value(int i, int k = 0) const;
  void set_value(int i, int k, double v);
  std::span<const double> row(int i) const;

  PathView view() const;
  PathView prefix_view(int last_index) const;
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

 private:
  TimeGrid grid_;
  int dim_;
  std::vector<double> values_;
};

// A path prefix anchored at a grid index: the pair (t_i, w restricted to
// [0, t_i]).  Stores exactly index+1 rows.
class PathPoint {
 public:
  PathPoint(TimeGrid grid, int dim, int index, std::vector<double> prefix);
  PathPoint(const DiscretePath& path, int index);
  static PathPoint origin(TimeGrid grid, int dim = 1);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  int index() const { return index_; }
  double t() const { return grid_.time(index_); }
  int suffix_steps() const { return grid_.steps() - index_; }

  double value(int i, int k = 0) const;
  double current(int k = 0) const { return value(index_, k); }
  PathView view() const;
  const std::vector<double>& prefix() const { return values_; }

  // Same grid/prefix with the last row bumped by `delta` in coordinate k.
  PathPoint bumped(int k, double delta) const;
  // One grid step later with the path extended flat; rejects terminal points.
  PathPoint extended_flat() const;

 private:
  TimeGrid grid_;
  int dim_;
  int index_;
  std::vector<double> values_;  // (index+1) x dim
};

// CSV serialization, header "t,x1,...,xd", full round-trip precision.
void write_path_csv(std::ostream& os, const DiscretePath& path);
DiscretePath read_path_csv(std::istream& is);

}  // namespace ppde
