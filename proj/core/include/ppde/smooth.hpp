#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ppde/grid.hpp"

namespace ppde {

// Small dense symmetric matrix.  Construction enforces symmetry so downstream
// code can read either triangle.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int dim);                           // zero matrix
  SymMatrix(int dim, std::vector<double> entries);       // row-major, must be symmetric
  static SymMatrix scalar(double value);                 // 1x1

  int dim() const { return dim_; }
  double at(int i, int j) const;
  double& at(int i, int j);
  double quadratic(std::span<const double> x) const;     // x' A x
  double trace() const;

 private:
  int dim_ = 0;
  std::vector<double> entries_;
};

// Quadratic test function phi(t, x) = constant + time_slope * t + slope . x
// + x' curvature x / 2, read at (t, w_t).  Rich enough to carry any jet and
// exact under second-order difference schemes.
struct Paraboloid {
  double constant = 0.0;
  double time_slope = 0.0;
  std::vector<double> slope;
  SymMatrix curvature;

  static Paraboloid quadratic1d(double constant, double time_slope, double slope,
                                double curvature);

  int dim() const { return static_cast<int>(slope.size()); }
  double eval(double t, std::span<const double> x) const;

  // Space derivatives at x; for a paraboloid these are exact and affine.
  std::vector<double> gradient(std::span<const double> x) const;
};

// Scalar field on path space: a value for every (time, prefix) point.
using PathField = std::function<double(const PathPoint&)>;

PathField field_from_paraboloid(const Paraboloid& phi);

// One-step dynamics G(t, w, y, z, gamma); the equation solved everywhere else
// is  -d_t u - G(t, w, u, du, d2u) = 0  with terminal data at the horizon.
struct Generator {
  std::string name;
  std::function<double(double, const PathView&, double, double, double)> g;
  double lipschitz = 0.0;    // modulus in (y, z)
  double drift_bound = 0.0;  // size of the first-order nonlinearity, if any
  bool is_semilinear = false;
  std::function<double(double, const PathView&, double, double)> driver;  // F when semilinear

  double operator()(double t, const PathView& prefix, double y, double z, double gamma) const {
    return g(t, prefix, y, z, gamma);
  }

  // Same dynamics shifted by a constant; turns solutions into strict sub- or
  // supersolutions for comparison experiments.
  Generator with_shift(double eps) const;

  static Generator heat();                          // G = gamma / 2
  static Generator semilinear(
      std::function<double(double, const PathView&, double, double)> f, double lipschitz,
      std::string label = "semilinear");            // G = gamma / 2 + F(t, w, y, z)
  static Generator drift_hjb(double bound);         // G = gamma / 2 + L |z|
  static Generator decay();                         // F = 1 - y, closed-form benchmark
};

// -time_slope - G at the point, with the exact paraboloid derivatives plugged
// in.  Negative means phi grows too fast along the dynamics (subsolution
// side), positive the opposite.
double classical_residual(const Generator& gen, const Paraboloid& phi, const PathPoint& at);

// Vertical and horizontal finite differences of a field at a point: central
// second-order bumps of the last path value, flat extension in time.  Exact
// on paraboloids up to rounding.  Rejects terminal points (no room for the
// time difference).
struct PathDerivatives {
  double time = 0.0;
  std::vector<double> gradient;
  SymMatrix hessian;
};

PathDerivatives discrete_derivatives(const PathField& u, const PathPoint& at,
                                     double bump = 0.0);

// Per-step defect of the second-order expansion
//   u(t+h, w+dB) - u(t, w) ~ time_slope h + grad . dB + tr(curv) h / 2
// for a paraboloid.  The expansion is exact in dB, so the defect is exactly
// (dB' curv dB - tr(curv) h) / 2: zero along +-sqrt(h) tree paths, order h on
// sampled Gaussian paths.
std::vector<double> ito_residuals(const Paraboloid& phi, const DiscretePath& path);

// Sampling validators used before trusting a generator in the checks below:
// monotone in gamma (degenerate ellipticity) and Lipschitz in (y, z) with the
// declared modulus.  Both return the worst signed margin; <= tol passes.
double ellipticity_margin(const Generator& gen, int samples, unsigned seed);
double lipschitz_margin(const Generator& gen, int samples, unsigned seed);

}  // namespace ppde
