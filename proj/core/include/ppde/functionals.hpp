#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ppde/grid.hpp"

namespace ppde {

// Real-valued map on sampled paths.  Functionals accept prefixes as well as
// full paths; the declared horizon is the last time the value may depend on
// (unset means the whole path).
class PathFunctional {
 public:
  using Fn = std::function<double(const PathView&)>;

  PathFunctional(std::string name, int dim, Fn fn);

  double operator()(const PathView& view) const;
  double operator()(const DiscretePath& path) const;

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }

  PathFunctional& with_horizon(double time);
  PathFunctional& with_lipschitz(double constant);
  // Declares xi(w) = psi(w_T): unlocks recombining (state indexed) backends.
  PathFunctional& with_terminal_profile(std::function<double(double)> psi);

  std::optional<double> horizon_time() const { return horizon_; }
  std::optional<double> lipschitz() const { return lipschitz_; }
  const std::function<double(double)>& terminal_profile() const { return profile_; }
  bool has_terminal_profile() const { return static_cast<bool>(profile_); }

 private:
  std::string name_;
  int dim_;
  Fn fn_;
  std::optional<double> horizon_;
  std::optional<double> lipschitz_;
  std::function<double(double)> profile_;
};

// Joins a prefix and a suffix path: the suffix is translated to start at the
// prefix endpoint.  The suffix must live on the remaining grid (same step,
// steps = n - i, origin start).
DiscretePath concat(const PathPoint& at, const DiscretePath& suffix);

// xi seen from (t_i, w): the functional on suffix paths w' -> xi(w (x) w').
PathFunctional shift_functional(const PathFunctional& xi, const PathPoint& at);

// |t - t'| + sup-norm distance of the stopped paths, both extended constantly
// to the later of the two anchor times.  Requires equal grid steps.
double pseudo_distance(const PathPoint& a, const PathPoint& b);

// --------------------------------------------------------------------------
// Built-in catalog.  All of these evaluate on prefixes too: a prefix is
// treated as a path stopped at its last sample.

PathFunctional zero_functional();
PathFunctional terminal_value(int coord = 0);
PathFunctional terminal_square(int coord = 0);
PathFunctional value_at_time(double s, int coord = 0);  // w_{s ^ t}
PathFunctional running_max(int coord = 0);
PathFunctional running_min(int coord = 0);
// Left Riemann average over the spanned window: sum_{i<last} w_i * h / t_last.
PathFunctional time_average(int coord = 0);
// Left-endpoint pathwise integral of x1 against x2 (dimension 2 only).
PathFunctional pathwise_integral();
PathFunctional affine_combination(double constant,
                                  std::vector<std::pair<double, PathFunctional>> terms);

}  // namespace ppde
