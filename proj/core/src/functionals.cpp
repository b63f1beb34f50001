#include "ppde/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace ppde {

PathFunctional::PathFunctional(std::string name, int dim, Fn fn)
    : name_(std::move(name)), dim_(dim), fn_(std::move(fn)) {
  if (dim_ < 1) throw input_error("PathFunctional: dimension must be at least 1");
  if (!fn_) throw input_error("PathFunctional: missing evaluator");
}

double PathFunctional::operator()(const PathView& view) const {
  if (view.dim != dim_)
    throw input_error("PathFunctional '" + name_ + "': dimension mismatch");
  if (view.length() < 1)
    throw input_error("PathFunctional '" + name_ + "': empty path");
  return fn_(view);
}

double PathFunctional::operator()(const DiscretePath& path) const {
  return (*this)(path.view());
}

PathFunctional& PathFunctional::with_horizon(double time) {
  if (time < 0.0) throw input_error("PathFunctional: horizon must be nonnegative");
  horizon_ = time;
  return *this;
}

PathFunctional& PathFunctional::with_lipschitz(double constant) {
  if (constant < 0.0) throw input_error("PathFunctional: Lipschitz constant must be nonnegative");
  lipschitz_ = constant;
  return *this;
}

PathFunctional& PathFunctional::with_terminal_profile(std::function<double(double)> psi) {
  profile_ = std::move(psi);
  return *this;
}

DiscretePath concat(const PathPoint& at, const DiscretePath& suffix) {
  if (suffix.dim() != at.dim()) throw input_error("concat: dimension mismatch");
  if (!suffix.grid().same_step(at.grid())) throw input_error("concat: grid step mismatch");
  if (suffix.grid().steps() != at.suffix_steps())
    throw input_error("concat: suffix must cover exactly the remaining steps");

  const int n = at.grid().steps();
  const int i = at.index();
  const int d = at.dim();
  std::vector<double> out(static_cast<std::size_t>(n + 1) * d);
  for (int s = 0; s <= i; ++s)
    for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(s) * d + k] = at.value(s, k);
  for (int s = i + 1; s <= n; ++s)
    for (int k = 0; k < d; ++k)
      out[static_cast<std::size_t>(s) * d + k] = at.current(k) + suffix.value(s - i, k);
  return DiscretePath(at.grid(), d, std::move(out));
}

PathFunctional shift_functional(const PathFunctional& xi, const PathPoint& at) {
  if (xi.dim() != at.dim()) throw input_error("shift_functional: dimension mismatch");

  const int i = at.index();
  const int d = at.dim();
  const double step = at.grid().step();
  // The anchored prefix is shared by all evaluations of the shifted functional.
  auto prefix = std::make_shared<const PathPoint>(at);
  auto base = std::make_shared<const PathFunctional>(xi);

  PathFunctional shifted(
      xi.name() + "@" + std::to_string(at.t()), d,
      [prefix, base, i, d, step](const PathView& suffix) -> double {
        if (suffix.dim != d)
          throw input_error("shifted functional: dimension mismatch");
        if (std::abs(suffix.step - step) > 1e-12 * std::max(suffix.step, step))
          throw input_error("shifted functional: grid step mismatch");
        const int m = suffix.last_index();
        std::vector<double> joined(static_cast<std::size_t>(i + m + 1) * d);
        std::copy(prefix->prefix().begin(), prefix->prefix().end(), joined.begin());
        for (int s = 1; s <= m; ++s)
          for (int k = 0; k < d; ++k)
            joined[static_cast<std::size_t>(i + s) * d + k] =
                prefix->current(k) + suffix.at(s, k);
        PathView full{step, d, joined};
        return (*base)(full);
      });

  if (xi.horizon_time())
    shifted.with_horizon(std::max(0.0, *xi.horizon_time() - at.t()));
  if (xi.lipschitz()) shifted.with_lipschitz(*xi.lipschitz());
  if (xi.has_terminal_profile() && d == 1) {
    double shift = at.current(0);
    auto psi = xi.terminal_profile();
    shifted.with_terminal_profile([psi, shift](double x) { return psi(shift + x); });
  }
  return shifted;
}

double pseudo_distance(const PathPoint& a, const PathPoint& b) {
  if (a.dim() != b.dim()) throw input_error("pseudo_distance: dimension mismatch");
  if (!a.grid().same_step(b.grid()))
    throw input_error("pseudo_distance: grids must share the step size");

  const int last = std::max(a.index(), b.index());
  double sup = 0.0;
  for (int i = 0; i <= last; ++i) {
    const int ia = std::min(i, a.index());
    const int ib = std::min(i, b.index());
    for (int k = 0; k < a.dim(); ++k)
      sup = std::max(sup, std::abs(a.value(ia, k) - b.value(ib, k)));
  }
  return std::abs(a.t() - b.t()) + sup;
}

// ---------------------------------------------------------------------------
// Built-ins

PathFunctional zero_functional() {
  PathFunctional f("zero", 1, [](const PathView&) { return 0.0; });
  f.with_horizon(0.0).with_lipschitz(0.0).with_terminal_profile([](double) { return 0.0; });
  return f;
}

PathFunctional terminal_value(int coord) {
  PathFunctional f("terminal", std::max(1, coord + 1),
                   [coord](const PathView& w) { return w.at(w.last_index(), coord); });
  f.with_lipschitz(1.0);
  if (coord == 0) f.with_terminal_profile([](double x) { return x; });
  return f;
}

PathFunctional terminal_square(int coord) {
  PathFunctional f("terminal_square", std::max(1, coord + 1), [coord](const PathView& w) {
    double x = w.at(w.last_index(), coord);
    return x * x;
  });
  if (coord == 0) f.with_terminal_profile([](double x) { return x * x; });
  return f;
}

PathFunctional value_at_time(double s, int coord) {
  if (s < 0.0) throw input_error("value_at_time: time must be nonnegative");
  PathFunctional f("value_at_time(" + std::to_string(s) + ")", std::max(1, coord + 1),
                   [s, coord](const PathView& w) {
                     double x = s / w.step;
                     int i = static_cast<int>(std::lround(x));
                     if (std::abs(x - i) > 1e-9 * (w.length() + 1))
                       throw input_error("value_at_time: time off the evaluation grid");
                     return w.at(std::min(i, w.last_index()), coord);
                   });
  f.with_horizon(s).with_lipschitz(1.0);
  return f;
}

PathFunctional running_max(int coord) {
  PathFunctional f("running_max", std::max(1, coord + 1), [coord](const PathView& w) {
    double m = w.at(0, coord);
    for (int i = 1; i < w.length(); ++i) m = std::max(m, w.at(i, coord));
    return m;
  });
  f.with_lipschitz(1.0);
  return f;
}

PathFunctional running_min(int coord) {
  PathFunctional f("running_min", std::max(1, coord + 1), [coord](const PathView& w) {
    double m = w.at(0, coord);
    for (int i = 1; i < w.length(); ++i) m = std::min(m, w.at(i, coord));
    return m;
  });
  f.with_lipschitz(1.0);
  return f;
}

PathFunctional time_average(int coord) {
  PathFunctional f("time_average", std::max(1, coord + 1), [coord](const PathView& w) {
    const int last = w.last_index();
    if (last == 0) return 0.0;
    double sum = 0.0;
    for (int i = 0; i < last; ++i) sum += w.at(i, coord);
    return sum / last;
  });
  f.with_lipschitz(1.0);
  return f;
}

PathFunctional pathwise_integral() {
  PathFunctional f("pathwise_integral", 2, [](const PathView& w) {
    double sum = 0.0;
    for (int i = 0; i + 1 < w.length(); ++i)
      sum += w.at(i, 0) * (w.at(i + 1, 1) - w.at(i, 1));
    return sum;
  });
  return f;
}

PathFunctional affine_combination(double constant,
                                  std::vector<std::pair<double, PathFunctional>> terms) {
  if (terms.empty()) throw input_error("affine_combination: needs at least one term");
  const int d = terms.front().second.dim();
  std::string name = "affine(";
  bool have_lip = true, have_horizon = true, have_profile = true;
  double lip = 0.0, horizon = 0.0;
  for (auto& [c, f] : terms) {
    if (f.dim() != d) throw input_error("affine_combination: mixed dimensions");
    name += f.name() + ",";
    if (f.lipschitz())
      lip += std::abs(c) * *f.lipschitz();
    else
      have_lip = false;
    if (f.horizon_time())
      horizon = std::max(horizon, *f.horizon_time());
    else
      have_horizon = false;
    if (!f.has_terminal_profile()) have_profile = false;
  }
  name.back() = ')';

  auto shared = std::make_shared<const std::vector<std::pair<double, PathFunctional>>>(
      std::move(terms));
  PathFunctional f(std::move(name), d, [shared, constant](const PathView& w) {
    double v = constant;
    for (const auto& [c, g] : *shared) v += c * g(w);
    return v;
  });
  if (have_lip) f.with_lipschitz(lip);
  if (have_horizon) f.with_horizon(horizon);
  if (have_profile && d == 1) {
    f.with_terminal_profile([shared, constant](double x) {
      double v = constant;
      for (const auto& [c, g] : *shared) v += c * g.terminal_profile()(x);
      return v;
    });
  }
  return f;
}

}  // namespace ppde
