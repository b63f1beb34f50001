#include "ppde/grid.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ppde {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw input_error("TimeGrid: horizon must be positive and finite");
  if (steps < 1) throw input_error("TimeGrid: need at least one step");
  step_ = horizon_ / steps_;
}

double TimeGrid::time(int i) const {
  if (i < 0 || i > steps_) throw input_error("TimeGrid: index out of range");
  return i == steps_ ? horizon_ : step_ * i;
}

int TimeGrid::index_of(double t) const {
  double x = t / step_;
  int i = static_cast<int>(std::lround(x));
  if (i < 0 || i > steps_ || std::abs(x - i) > 1e-9 * (steps_ + 1))
    throw input_error("TimeGrid: time does not lie on the grid");
  return i;
}

bool TimeGrid::same_step(const TimeGrid& other) const {
  return std::abs(step_ - other.step_) <= 1e-12 * std::max(step_, other.step_);
}

DiscretePath::DiscretePath(TimeGrid grid, int dim)
    : grid_(grid), dim_(dim),
      values_(static_cast<std::size_t>(grid.steps() + 1) * static_cast<std::size_t>(dim), 0.0) {
  if (dim < 1) throw input_error("DiscretePath: dimension must be at least 1");
}

DiscretePath::DiscretePath(TimeGrid grid, int dim, std::vector<double> values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
  if (dim < 1) throw input_error("DiscretePath: dimension must be at least 1");
  std::size_t want = static_cast<std::size_t>(grid_.steps() + 1) * static_cast<std::size_t>(dim_);
  if (values_.size() != want)
    throw input_error("DiscretePath: value matrix must be (steps+1) x dim");
  for (int k = 0; k < dim_; ++k)
    if (values_[static_cast<std::size_t>(k)] != 0.0)
      throw input_error("DiscretePath: paths start at the origin, row 0 must be zero");
}

double DiscretePath::value(int i, int k) const {
  if (i < 0 || i > grid_.steps() || k < 0 || k >= dim_)
    throw input_error("DiscretePath: index out of range");
  return values_[static_cast<std::size_t>(i) * dim_ + k];
}

void DiscretePath::set_value(int i, int k, double v) {
  if (i < 0 || i > grid_.steps() || k < 0 || k >= dim_)
    throw input_error("DiscretePath: index out of range");
  values_[static_cast<std::size_t>(i) * dim_ + k] = v;
}

std::span<const double> DiscretePath::row(int i) const {
  if (i < 0 || i > grid_.steps()) throw input_error("DiscretePath: index out of range");
  return {values_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}

PathView DiscretePath::view() const { return {grid_.step(), dim_, values_}; }

PathView DiscretePath::prefix_view(int last_index) const {
  if (last_index < 0 || last_index > grid_.steps())
    throw input_error("DiscretePath: prefix index out of range");
  return {grid_.step(), dim_,
          {values_.data(), static_cast<std::size_t>(last_index + 1) * dim_}};
}

PathPoint::PathPoint(TimeGrid grid, int dim, int index, std::vector<double> prefix)
    : grid_(grid), dim_(dim), index_(index), values_(std::move(prefix)) {
  if (dim < 1) throw input_error("PathPoint: dimension must be at least 1");
  if (index < 0 || index > grid_.steps()) throw input_error("PathPoint: index out of range");
  std::size_t want = static_cast<std::size_t>(index_ + 1) * static_cast<std::size_t>(dim_);
  if (values_.size() != want)
    throw input_error("PathPoint: prefix length must match the anchor index");
  for (int k = 0; k < dim_; ++k)
    if (values_[static_cast<std::size_t>(k)] != 0.0)
      throw input_error("PathPoint: paths start at the origin, row 0 must be zero");
}

PathPoint::PathPoint(const DiscretePath& path, int index)
    : PathPoint(path.grid(), path.dim(), index,
                std::vector<double>(path.values().begin(),
                                    path.values().begin() +
                                        static_cast<std::ptrdiff_t>(
                                            (static_cast<std::size_t>(index) + 1) * path.dim()))) {}

PathPoint PathPoint::origin(TimeGrid grid, int dim) {
  return PathPoint(grid, dim, 0, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
}

double PathPoint::value(int i, int k) const {
  if (i < 0 || i > index_ || k < 0 || k >= dim_)
    throw input_error("PathPoint: index out of range");
  return values_[static_cast<std::size_t>(i) * dim_ + k];
}

PathView PathPoint::view() const { return {grid_.step(), dim_, values_}; }

PathPoint PathPoint::bumped(int k, double delta) const {
  if (k < 0 || k >= dim_) throw input_error("PathPoint: coordinate out of range");
  if (index_ == 0 && delta != 0.0)
    throw input_error("PathPoint: cannot bump the origin row");
  std::vector<double> v = values_;
  v[static_cast<std::size_t>(index_) * dim_ + k] += delta;
  return PathPoint(grid_, dim_, index_, std::move(v));
}

PathPoint PathPoint::extended_flat() const {
  if (index_ >= grid_.steps())
    throw input_error("PathPoint: no step beyond the terminal time");
  std::vector<double> v = values_;
  v.insert(v.end(), values_.end() - dim_, values_.end());
  return PathPoint(grid_, dim_, index_ + 1, std::move(v));
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void write_path_csv(std::ostream& os, const DiscretePath& path) {
  std::string line = "t";
  for (int k = 1; k <= path.dim(); ++k) {
    line += ",x" + std::to_string(k);
  }
  os << line << '\n';
  for (int i = 0; i <= path.grid().steps(); ++i) {
    line.clear();
    append_double(line, path.grid().time(i));
    for (int k = 0; k < path.dim(); ++k) {
      line += ',';
      append_double(line, path.value(i, k));
    }
    os << line << '\n';
  }
}

DiscretePath read_path_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw input_error("path csv: empty input");
  int dim = 0;
  for (char c : header)
    if (c == ',') ++dim;
  if (dim < 1 || header.substr(0, 1) != "t") throw input_error("path csv: bad header");

  std::vector<double> times;
  std::vector<double> values;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) throw input_error("path csv: bad row");
    times.push_back(std::stod(cell));
    for (int k = 0; k < dim; ++k) {
      if (!std::getline(row, cell, ',')) throw input_error("path csv: short row");
      values.push_back(std::stod(cell));
    }
  }
  if (times.size() < 2) throw input_error("path csv: need at least two rows");
  int steps = static_cast<int>(times.size()) - 1;
  TimeGrid grid(times.back(), steps);
  return DiscretePath(grid, dim, std::move(values));
}

}  // namespace ppde
