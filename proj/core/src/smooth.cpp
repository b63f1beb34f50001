#include "ppde/smooth.hpp"

#include <cmath>
#include <random>
#include <utility>

namespace ppde {

SymMatrix::SymMatrix(int dim) : dim_(dim) {
  if (dim < 0) throw input_error("SymMatrix: negative dimension");
  entries_.assign(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), 0.0);
}

SymMatrix::SymMatrix(int dim, std::vector<double> entries) : dim_(dim) {
  if (dim < 0) throw input_error("SymMatrix: negative dimension");
  if (entries.size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim))
    throw input_error("SymMatrix: entry count must be dim*dim");
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      double a = entries[static_cast<std::size_t>(i) * dim + j];
      double b = entries[static_cast<std::size_t>(j) * dim + i];
      if (std::abs(a - b) > 1e-14 * std::max(1.0, std::abs(a) + std::abs(b)))
        throw input_error("SymMatrix: entries are not symmetric");
      double avg = 0.5 * (a + b);
      entries[static_cast<std::size_t>(i) * dim + j] = avg;
      entries[static_cast<std::size_t>(j) * dim + i] = avg;
    }
  entries_ = std::move(entries);
}

SymMatrix SymMatrix::scalar(double value) { return SymMatrix(1, {value}); }

double SymMatrix::at(int i, int j) const {
  if (i < 0 || j < 0 || i >= dim_ || j >= dim_) throw input_error("SymMatrix: index out of range");
  return entries_[static_cast<std::size_t>(i) * dim_ + j];
}

double& SymMatrix::at(int i, int j) {
  if (i < 0 || j < 0 || i >= dim_ || j >= dim_) throw input_error("SymMatrix: index out of range");
  return entries_[static_cast<std::size_t>(i) * dim_ + j];
}

double SymMatrix::quadratic(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(dim_))
    throw input_error("SymMatrix: vector length mismatch");
  double acc = 0.0;
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) acc += x[static_cast<std::size_t>(i)] * at(i, j) *
                                          x[static_cast<std::size_t>(j)];
  return acc;
}

double SymMatrix::trace() const {
  double acc = 0.0;
  for (int i = 0; i < dim_; ++i) acc += at(i, i);
  return acc;
}

Paraboloid Paraboloid::quadratic1d(double constant, double time_slope, double slope,
                                   double curvature) {
  return Paraboloid{constant, time_slope, {slope}, SymMatrix::scalar(curvature)};
}

double Paraboloid::eval(double t, std::span<const double> x) const {
  if (x.size() != slope.size()) throw input_error("Paraboloid: point dimension mismatch");
  double acc = constant + time_slope * t;
  for (std::size_t k = 0; k < slope.size(); ++k) acc += slope[k] * x[k];
  return acc + 0.5 * curvature.quadratic(x);
}

std::vector<double> Paraboloid::gradient(std::span<const double> x) const {
  if (x.size() != slope.size()) throw input_error("Paraboloid: point dimension mismatch");
  std::vector<double> g(slope);
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < dim(); ++j)
      g[static_cast<std::size_t>(i)] += curvature.at(i, j) * x[static_cast<std::size_t>(j)];
  return g;
}

PathField field_from_paraboloid(const Paraboloid& phi) {
  return [phi](const PathPoint& at) { return phi.eval(at.t(), at.view().row(at.index())); };
}

Generator Generator::with_shift(double eps) const {
  Generator out = *this;
  out.name = name + "_shifted";
  auto base = g;
  out.g = [base, eps](double t, const PathView& w, double y, double z, double gamma) {
    return base(t, w, y, z, gamma) + eps;
  };
  if (is_semilinear && driver) {
    auto f = driver;
    out.driver = [f, eps](double t, const PathView& w, double y, double z) {
      return f(t, w, y, z) + eps;
    };
  }
  return out;
}

Generator Generator::heat() {
  Generator gen;
  gen.name = "heat";
  gen.g = [](double, const PathView&, double, double, double gamma) { return 0.5 * gamma; };
  gen.is_semilinear = true;
  gen.driver = [](double, const PathView&, double, double) { return 0.0; };
  return gen;
}

Generator Generator::semilinear(
    std::function<double(double, const PathView&, double, double)> f, double lipschitz,
    std::string label) {
  if (!f) throw input_error("Generator: missing driver");
  if (!(lipschitz >= 0.0)) throw input_error("Generator: Lipschitz modulus must be nonnegative");
  Generator gen;
  gen.name = std::move(label);
  gen.driver = std::move(f);
  gen.lipschitz = lipschitz;
  gen.is_semilinear = true;
  auto fcopy = gen.driver;
  gen.g = [fcopy](double t, const PathView& w, double y, double z, double gamma) {
    return 0.5 * gamma + fcopy(t, w, y, z);
  };
  return gen;
}

Generator Generator::drift_hjb(double bound) {
  if (!(bound >= 0.0)) throw input_error("Generator: drift bound must be nonnegative");
  Generator gen;
  gen.name = "drift_hjb";
  gen.g = [bound](double, const PathView&, double, double z, double gamma) {
    return 0.5 * gamma + bound * std::abs(z);
  };
  gen.lipschitz = bound;
  gen.drift_bound = bound;
  return gen;
}

Generator Generator::decay() {
  return semilinear([](double, const PathView&, double y, double) { return 1.0 - y; }, 1.0,
                    "decay");
}

double classical_residual(const Generator& gen, const Paraboloid& phi, const PathPoint& at) {
  if (phi.dim() != 1 || at.dim() != 1)
    throw input_error("classical_residual: one-dimensional points only");
  auto x = at.view().row(at.index());
  double value = phi.eval(at.t(), x);
  double grad = phi.gradient(x)[0];
  double gamma = phi.curvature.at(0, 0);
  return -phi.time_slope - gen(at.t(), at.view(), value, grad, gamma);
}

PathDerivatives discrete_derivatives(const PathField& u, const PathPoint& at, double bump) {
  if (!u) throw input_error("discrete_derivatives: missing field");
  if (at.suffix_steps() == 0)
    throw input_error("discrete_derivatives: no room for a time step at the horizon");
  const int d = at.dim();
  if (bump <= 0.0) {
    double scale = 1.0;
    for (int k = 0; k < d; ++k) scale = std::max(scale, std::abs(at.current(k)));
    bump = 1e-4 * scale;
  }

  PathDerivatives out;
  const double u0 = u(at);
  out.time = (u(at.extended_flat()) - u0) / at.grid().step();

  out.gradient.resize(static_cast<std::size_t>(d));
  std::vector<double> entries(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < d; ++k) {
    double up = u(at.bumped(k, bump));
    double dn = u(at.bumped(k, -bump));
    out.gradient[static_cast<std::size_t>(k)] = (up - dn) / (2.0 * bump);
    entries[static_cast<std::size_t>(k) * d + k] = (up - 2.0 * u0 + dn) / (bump * bump);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      double pp = u(at.bumped(i, bump).bumped(j, bump));
      double pm = u(at.bumped(i, bump).bumped(j, -bump));
      double mp = u(at.bumped(i, -bump).bumped(j, bump));
      double mm = u(at.bumped(i, -bump).bumped(j, -bump));
      double cross = (pp - pm - mp + mm) / (4.0 * bump * bump);
      entries[static_cast<std::size_t>(i) * d + j] = cross;
      entries[static_cast<std::size_t>(j) * d + i] = cross;
    }
  out.hessian = SymMatrix(d, std::move(entries));
  return out;
}

std::vector<double> ito_residuals(const Paraboloid& phi, const DiscretePath& path) {
  if (phi.dim() != path.dim()) throw input_error("ito_residuals: dimension mismatch");
  const int n = path.grid().steps();
  const double h = path.grid().step();
  const double half_trace = 0.5 * phi.curvature.trace();

  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto x0 = path.row(i);
    auto x1 = path.row(i + 1);
    double increment = phi.eval(path.grid().time(i + 1), x1) - phi.eval(path.grid().time(i), x0);
    double predicted = phi.time_slope * h + half_trace * h;
    auto grad = phi.gradient(x0);
    for (int k = 0; k < path.dim(); ++k)
      predicted += grad[static_cast<std::size_t>(k)] *
                   (x1[static_cast<std::size_t>(k)] - x0[static_cast<std::size_t>(k)]);
    out[static_cast<std::size_t>(i)] = increment - predicted;
  }
  return out;
}

namespace {

// Short random prefix for spot checks; storage owned by the caller via `buf`.
PathView sample_prefix(std::mt19937_64& rng, std::vector<double>& buf) {
  std::normal_distribution<double> normal(0.0, 0.5);
  int len = 2 + static_cast<int>(rng() % 4);
  buf.assign(static_cast<std::size_t>(len), 0.0);
  for (int i = 1; i < len; ++i) buf[static_cast<std::size_t>(i)] =
      buf[static_cast<std::size_t>(i) - 1] + normal(rng);
  return PathView{0.25, 1, buf};
}

}  // namespace

double ellipticity_margin(const Generator& gen, int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = -1e300;
  std::vector<double> buf;
  for (int s = 0; s < samples; ++s) {
    auto w = sample_prefix(rng, buf);
    double t = 0.25 * (w.last_index());
    double y = u(rng), z = u(rng);
    double g1 = u(rng), g2 = u(rng);
    if (g1 > g2) std::swap(g1, g2);
    // monotone in gamma: larger curvature never lowers the dynamics
    worst = std::max(worst, gen(t, w, y, z, g1) - gen(t, w, y, z, g2));
  }
  return worst;
}

double lipschitz_margin(const Generator& gen, int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = -1e300;
  std::vector<double> buf;
  for (int s = 0; s < samples; ++s) {
    auto w = sample_prefix(rng, buf);
    double t = 0.25 * (w.last_index());
    double gamma = u(rng);
    double y1 = u(rng), z1 = u(rng), y2 = u(rng), z2 = u(rng);
    double lhs = std::abs(gen(t, w, y1, z1, gamma) - gen(t, w, y2, z2, gamma));
    double rhs = gen.lipschitz * (std::abs(y1 - y2) + std::abs(z1 - z2));
    worst = std::max(worst, lhs - rhs);
  }
  return worst;
}

}  // namespace ppde
