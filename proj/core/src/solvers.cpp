#include "ppde/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "ppde/parallel.hpp"

namespace ppde {

NodeTable<double> heat_sweep(const ScenarioTree& tree, const PathFunctional& xi) {
  return conditional_mean_sweep(tree, leaf_values(tree, xi));
}

double solve_heat(const PathFunctional& xi, const TimeGrid& grid) {
  ScenarioTree tree(grid);
  return heat_sweep(tree, xi).at(0, 0);
}

McEstimate solve_heat_mc(const PathFunctional& xi, const TimeGrid& grid, int dim,
                         std::size_t paths, std::uint64_t seed) {
  return expectation_mc(xi, grid, dim, zero_drift(), paths, seed);
}

SchemeOperator scheme_for(const Generator& gen) {
  if (!gen.g) throw input_error("scheme_for: generator has no dynamics");
  return [gen](const StepContext& ctx, double up, double down) {
    double mean = 0.5 * (up + down);
    double z = (up - down) / (2.0 * ctx.increment);
    return mean + ctx.h * gen(ctx.t, ctx.prefix, mean, z, 0.0);
  };
}

SchemeResult monotone_scheme(const ScenarioTree& tree, const std::vector<double>& leaves,
                             const SchemeOperator& op) {
  const int n = tree.depth();
  if (leaves.size() != tree.leaf_count())
    throw input_error("monotone_scheme: leaf array size mismatch");
  if (!op) throw input_error("monotone_scheme: missing operator");

  const double h = tree.grid().step();
  SchemeResult res;
  res.value = NodeTable<double>(n);
  res.value.level(n) = leaves;

  for (int level = n - 1; level >= 0; --level) {
    const std::vector<double>& next = res.value.level(level + 1);
    std::vector<double>& cur = res.value.level(level);
    const double t = tree.grid().time(level);
    parallel_for(cur.size(), 1024, [&](std::size_t b, std::size_t e) {
      std::vector<double> buf(static_cast<std::size_t>(n) + 1);
      for (std::size_t j = b; j < e; ++j) {
        tree.node_path(level, j, buf);
        StepContext ctx{t, h, tree.increment(),
                        PathView{h, 1, std::span<const double>(buf.data(),
                                                               static_cast<std::size_t>(level) + 1)}};
        cur[j] = op(ctx, next[2 * j + 1], next[2 * j]);
      }
    });
  }
  res.root = res.value.at(0, 0);
  return res;
}

SchemeResult monotone_scheme(const ScenarioTree& tree, const PathFunctional& xi,
                             const SchemeOperator& op) {
  return monotone_scheme(tree, leaf_values(tree, xi), op);
}

double monotonicity_margin(const SchemeOperator& op, const TimeGrid& grid, int trials,
                           unsigned seed) {
  if (!op) throw input_error("monotonicity_margin: missing operator");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  const double s = std::sqrt(grid.step());

  double worst = -1e300;
  std::vector<double> buf(static_cast<std::size_t>(grid.steps()) + 1, 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    int level = static_cast<int>(rng() % static_cast<std::uint64_t>(grid.steps()));
    for (int i = 1; i <= level; ++i)
      buf[static_cast<std::size_t>(i)] =
          buf[static_cast<std::size_t>(i) - 1] + (rng() % 2 ? s : -s);
    StepContext ctx{grid.time(level), grid.step(), s,
                    PathView{grid.step(), 1,
                             std::span<const double>(buf.data(),
                                                     static_cast<std::size_t>(level) + 1)}};
    double up = value(rng), down = value(rng);
    double small = op(ctx, up, down);
    double large = op(ctx, up + bump(rng), down + bump(rng));
    worst = std::max(worst, small - large);
  }
  return worst;
}

double consistency_deviation(const Generator& gen, const SchemeOperator& op,
                             const Paraboloid& phi, const PathPoint& at, double constant) {
  if (phi.dim() != 1 || at.dim() != 1)
    throw input_error("consistency_deviation: one-dimensional points only");
  const double h = at.grid().step();
  const double s = std::sqrt(h);
  const double t = at.t();
  const double x = at.current(0);

  double here = constant + phi.eval(t, std::vector<double>{x});
  double up = constant + phi.eval(t + h, std::vector<double>{x + s});
  double down = constant + phi.eval(t + h, std::vector<double>{x - s});
  StepContext ctx{t, h, s, at.view()};
  double applied = op(ctx, up, down);

  double grad = phi.gradient(std::vector<double>{x})[0];
  double gamma = phi.curvature.at(0, 0);
  return (here - applied) / h + phi.time_slope + gen(t, at.view(), here, grad, gamma);
}

BsdeResult solve_bsde(const ScenarioTree& tree, const PathFunctional& xi, const Generator& gen) {
  if (!gen.g) throw input_error("solve_bsde: generator has no dynamics");
  const int n = tree.depth();
  const double h = tree.grid().step();
  const double s = tree.increment();
  const double horizon = tree.grid().horizon();

  BsdeResult res;
  res.y = NodeTable<double>(n);
  res.z = NodeTable<double>(n > 0 ? n - 1 : 0);
  res.y.level(n) = leaf_values(tree, xi);
  res.stability_warning = gen.lipschitz * h >= 1.0;

  double max_terminal = 0.0;
  for (double v : res.y.level(n)) {
    if (!std::isfinite(v)) throw numeric_error("solve_bsde: terminal data is not finite");
    max_terminal = std::max(max_terminal, std::abs(v));
  }

  double max_f0 = 0.0;
  double max_abs = max_terminal;
  bool finite = true;
  for (int level = n - 1; level >= 0; --level) {
    const std::vector<double>& next = res.y.level(level + 1);
    std::vector<double>& cur = res.y.level(level);
    std::vector<double>& zs = res.z.level(level);
    const double t = tree.grid().time(level);
    std::vector<double> buf(static_cast<std::size_t>(n) + 1);
    for (std::size_t j = 0; j < cur.size(); ++j) {
      tree.node_path(level, j, buf);
      PathView prefix{h, 1, std::span<const double>(buf.data(),
                                                    static_cast<std::size_t>(level) + 1)};
      double up = next[2 * j + 1];
      double down = next[2 * j];
      double mean = 0.5 * (up + down);
      double z = (up - down) / (2.0 * s);
      double y = mean + h * gen(t, prefix, mean, z, 0.0);
      cur[j] = y;
      zs[j] = z;
      if (!std::isfinite(y)) finite = false;
      max_abs = std::max(max_abs, std::abs(y));
      max_f0 = std::max(max_f0, std::abs(gen(t, prefix, 0.0, 0.0, 0.0)));
    }
  }
  if (!finite) throw numeric_error("solve_bsde: value blew up (check the step size)");

  res.root = res.y.at(0, 0);
  res.apriori_bound = (max_terminal + horizon * max_f0) * std::exp(gen.lipschitz * horizon);
  // The growth estimate only holds while one step cannot overshoot.
  if (gen.lipschitz * s <= 1.0 &&
      max_abs > res.apriori_bound * (1.0 + 1e-9) + 1e-12)
    throw numeric_error("solve_bsde: value escaped its a priori bound");
  return res;
}

namespace {

constexpr int max_lattice_steps = 65536;

double lattice_backward(const TimeGrid& grid, const std::function<double(double)>& profile,
                        const SchemeOperator& op) {
  const int n = grid.steps();
  if (n > max_lattice_steps) throw input_error("lattice: step count too large");
  const double h = grid.step();
  const double s = std::sqrt(h);

  std::vector<double> v(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) v[static_cast<std::size_t>(j)] = profile((2.0 * j - n) * s);

  double state = 0.0;
  // Context carries only the current state; fine for generators that read at
  // most the last path value.
  PathView here{h, 1, std::span<const double>(&state, 1)};
  for (int level = n - 1; level >= 0; --level) {
    const double t = grid.time(level);
    for (int j = 0; j <= level; ++j) {
      state = (2.0 * j - level) * s;
      StepContext ctx{t, h, s, here};
      v[static_cast<std::size_t>(j)] =
          op(ctx, v[static_cast<std::size_t>(j) + 1], v[static_cast<std::size_t>(j)]);
    }
  }
  if (!std::isfinite(v[0])) throw numeric_error("lattice: value blew up (check the step size)");
  return v[0];
}

}  // namespace

double lattice_scheme(const TimeGrid& grid, const std::function<double(double)>& profile,
                      const SchemeOperator& op) {
  if (!profile) throw input_error("lattice_scheme: missing terminal profile");
  if (!op) throw input_error("lattice_scheme: missing operator");
  return lattice_backward(grid, profile, op);
}

double solve_bsde_lattice(const TimeGrid& grid, const PathFunctional& xi, const Generator& gen) {
  if (!xi.has_terminal_profile())
    throw input_error("solve_bsde_lattice: terminal functional carries no state profile");
  return lattice_backward(grid, xi.terminal_profile(), scheme_for(gen));
}

double upper_expectation_lattice(const TimeGrid& grid, const PathFunctional& xi,
                                 const DriftBound& bound) {
  if (!xi.has_terminal_profile())
    throw input_error("upper_expectation_lattice: terminal functional carries no state profile");
  bound.validate_for_step(grid.step());
  const double half_spread = 0.5 * bound.value * std::sqrt(grid.step());
  SchemeOperator op = [half_spread](const StepContext&, double up, double down) {
    return 0.5 * (up + down) + half_spread * std::abs(up - down);
  };
  return lattice_backward(grid, xi.terminal_profile(), op);
}

double lookback_lattice(const TimeGrid& grid,
                        const std::function<double(double, double)>& payoff) {
  if (!payoff) throw input_error("lookback_lattice: missing payoff");
  const int n = grid.steps();
  // The sweep is cubic in the step count; this cap keeps it near a second.
  if (n > 1024) throw input_error("lookback_lattice: step count too large");
  const double s = std::sqrt(grid.step());

  // State (j, g) at level k: value x = (2j - k) s with j ups taken, running
  // maximum x + g s.  An up move sends g to max(g - 1, 0) (the maximum only
  // advances while the walk sits at it), a down move to g + 1.
  const int width = n + 1;
  auto idx = [width](int j, int g) {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(g);
  };
  std::vector<double> v(static_cast<std::size_t>(width) * static_cast<std::size_t>(width));
  for (int j = 0; j <= n; ++j) {
    const double x = (2.0 * j - n) * s;
    for (int g = 0; g <= n; ++g) v[idx(j, g)] = payoff(x, x + g * s);
  }
  std::vector<double> level_values(v.size());
  for (int level = n - 1; level >= 0; --level) {
    for (int j = 0; j <= level; ++j)
      for (int g = 0; g <= level; ++g) {
        const double up = v[idx(j + 1, g > 0 ? g - 1 : 0)];
        const double down = v[idx(j, g + 1)];
        level_values[idx(j, g)] = 0.5 * (up + down);
      }
    v.swap(level_values);
  }
  if (!std::isfinite(v[0])) throw numeric_error("lattice: value blew up (check the step size)");
  return v[0];
}

std::vector<ConvergenceRow> convergence_study(const std::function<double(int)>& value_at,
                                              double target, const std::vector<int>& steps,
                                              double horizon) {
  if (!value_at) throw input_error("convergence_study: missing solver");
  if (steps.empty()) throw input_error("convergence_study: no step counts");
  std::vector<ConvergenceRow> rows;
  rows.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    int n = steps[i];
    if (n < 1) throw input_error("convergence_study: step counts must be positive");
    if (i > 0 && n <= steps[i - 1])
      throw input_error("convergence_study: step counts must increase");
    ConvergenceRow row;
    row.n = n;
    row.h = horizon / n;
    row.value = value_at(n);
    row.error = std::abs(row.value - target);
    if (i > 0 && row.error > 0.0 && rows.back().error > 0.0) {
      row.ratio = rows.back().error / row.error;
      row.order = std::log(row.ratio) / std::log(static_cast<double>(n) / steps[i - 1]);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "n,h,value,error,ratio,order_est\n";
  char buf[160];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,,\n", r.n, r.h, r.value, r.error);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.h, r.value,
                    r.error, r.ratio, r.order);
    }
    os << buf;
  }
}

namespace {

double fd_reference(const std::function<double(double)>& psi, double bound, FdConfig config) {
  if (!psi) throw input_error("markovian_fd: missing terminal profile");
  if (!(config.horizon > 0.0)) throw input_error("markovian_fd: horizon must be positive");
  if (config.space_cells < 4 || config.space_cells % 2 != 0)
    throw input_error("markovian_fd: space cells must be even and at least 4");
  if (!(bound >= 0.0)) throw input_error("markovian_fd: drift bound must be nonnegative");

  const double radius = config.radius > 0.0 ? config.radius : 6.0 * std::sqrt(config.horizon);
  const int m = config.space_cells;
  const double dx = 2.0 * radius / m;
  const double h_max = dx * dx / (1.0 + bound * dx);

  int n = config.time_steps;
  if (n <= 0) n = static_cast<int>(std::ceil(config.horizon / h_max));
  const double h = config.horizon / n;
  // positive-coefficient condition: the weight staying on the center cell is
  // 1 - h/dx^2 - bound h/dx and must not go negative
  if (h > h_max * (1.0 + 1e-12))
    throw input_error("markovian_fd: time step violates the CFL bound");

  std::vector<double> v(static_cast<std::size_t>(m) + 1), next(v.size());
  for (int i = 0; i <= m; ++i) v[static_cast<std::size_t>(i)] = psi(-radius + i * dx);
  next.front() = v.front();
  next.back() = v.back();

  for (int step = 0; step < n; ++step) {
    for (int i = 1; i < m; ++i) {
      double here = v[static_cast<std::size_t>(i)];
      double east = v[static_cast<std::size_t>(i) + 1];
      double west = v[static_cast<std::size_t>(i) - 1];
      double diffusion = 0.5 * (east - 2.0 * here + west) / (dx * dx);
      double upwind = bound * std::max({(east - here) / dx, (west - here) / dx, 0.0});
      next[static_cast<std::size_t>(i)] = here + h * (diffusion + upwind);
    }
    v.swap(next);
  }
  return v[static_cast<std::size_t>(m) / 2];
}

}  // namespace

double markovian_fd_heat(const std::function<double(double)>& psi, FdConfig config) {
  return fd_reference(psi, 0.0, config);
}

double markovian_fd_hjb(const std::function<double(double)>& psi, double bound, FdConfig config) {
  return fd_reference(psi, bound, config);
}

StabilityReport stability_experiment(const TimeGrid& grid, const PathFunctional& xi,
                                     const Generator& gen, double eps) {
  StabilityReport report;
  report.shift = eps;
  Generator shifted = gen.with_shift(eps);
  if (xi.has_terminal_profile()) {
    report.base = solve_bsde_lattice(grid, xi, gen);
    report.shifted = solve_bsde_lattice(grid, xi, shifted);
  } else {
    ScenarioTree tree(grid);
    report.base = monotone_scheme(tree, xi, scheme_for(gen)).root;
    report.shifted = monotone_scheme(tree, xi, scheme_for(shifted)).root;
  }
  report.delta = report.shifted - report.base;
  return report;
}

}  // namespace ppde
