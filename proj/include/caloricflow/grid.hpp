/// @file grid.hpp
/// @brief Periodic square grids, sampled fields, the linear heat semigroup and field norms.
#pragma once

#include "caloricflow/hyperbolic.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace caloricflow {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Periodic grid on [-L, L)^2 with n nodes per side.
struct Grid2D {
  int n = 0;
  double L = 0;

  Grid2D() = default;
  Grid2D(int n_, double L_);

  double h() const { return 2.0 * L / n; }
  int nodes() const { return n * n; }
  double x1(int i) const { return -L + i * h(); }
  double x2(int j) const { return -L + j * h(); }
  int index(int i, int j) const { return wrap(j) * n + wrap(i); }
  int wrap(int i) const { return ((i % n) + n) % n; }
  bool operator==(const Grid2D& o) const { return n == o.n && L == o.L; }
};

/// k real components per node, node-major storage (node = j*n + i).
class Field {
 public:
  Field() = default;
  Field(const Grid2D& g, int comps, double fill = 0.0);

  const Grid2D& grid() const { return grid_; }
  int components() const { return comps_; }
  int nodes() const { return grid_.nodes(); }

  double* at(int node) { return v_.data() + static_cast<std::ptrdiff_t>(node) * comps_; }
  const double* at(int node) const { return v_.data() + static_cast<std::ptrdiff_t>(node) * comps_; }
  double& operator()(int node, int c) { return at(node)[c]; }
  double operator()(int node, int c) const { return at(node)[c]; }

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  /// One component extracted as a scalar field.
  Field component(int c) const;
  void set_component(int c, const Field& scalar);

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  void require_compatible(const Field& o) const;

 private:
  Grid2D grid_;
  int comps_ = 0;
  std::vector<double> v_;
};

/// Grid-sampled map into H^m (components = 1+m).
class MapField : public Field {
 public:
  MapField() = default;
  MapField(const Grid2D& g, int m);
  /// Wraps raw values, validating every node and the optional constant tail.
  MapField(Field values, std::optional<AmbientVec> at_infinity = {}, std::optional<double> support_radius = {});
  static MapField constant(const Grid2D& g, const HPoint& p);

  int m() const { return components() - 1; }
  int dim() const { return components(); }
  const std::optional<AmbientVec>& at_infinity() const { return at_inf_; }
  const std::optional<double>& support_radius() const { return support_; }
  void set_tail(std::optional<AmbientVec> at_infinity, std::optional<double> support_radius);

  /// Max |<p,p> + 1| (relative) over nodes.
  double constraint_violation() const;
  /// Throws GeometryError if any node or the declared tail is violated.
  void validate(double tol = 1e-10) const;
  HPoint point(int node) const;

 private:
  std::optional<AmbientVec> at_inf_;
  std::optional<double> support_;
};

/// Tangent section over a MapField (components = 1+m).
class TangentField : public Field {
 public:
  TangentField() = default;
  explicit TangentField(const MapField& base);
  explicit TangentField(Field values) : Field(std::move(values)) {}
  int dim() const { return components(); }
  /// Max |<v,p>| over nodes.
  double tangency_violation(const MapField& base) const;
  void project_onto(const MapField& base);
};

namespace grid {

// ---- finite differences --------------------------------------------------

Field laplacian(const Field& f);
std::array<Field, 2> grad(const Field& f);
/// Centered first difference along axis (0 -> x1, 1 -> x2).
Field diff(const Field& f, int axis);
/// Centered second difference along one axis.
Field diff2(const Field& f, int axis);

// ---- spectral tools ------------------------------------------------------

/// Symbol used by the Fourier-diagonal heat propagator.
enum class HeatSymbol {
  Continuum,   ///< exp(-s |xi|^2), the exact semigroup of the continuum Laplacian on the torus
  FivePoint,   ///< exp(s * lambda_h(xi)), exact semigroup of the 5-point Laplacian
};

Field heat_propagate(const Field& f, double s, HeatSymbol symbol = HeatSymbol::Continuum);

/// Explicit Euler with the 5-point Laplacian, taken with steps ds (last step shortened).
Field heat_propagate_fd(const Field& f, double s, double ds);

/// Fourier transform cached for repeated propagation of the same initial field.
class HeatSemigroup {
 public:
  explicit HeatSemigroup(const Field& f, HeatSymbol symbol = HeatSymbol::Continuum);
  ~HeatSemigroup();
  HeatSemigroup(const HeatSemigroup&) = delete;
  HeatSemigroup& operator=(const HeatSemigroup&) = delete;
  Field at(double s) const;

 private:
  struct Impl;
  Impl* impl_;
};

/// Spectral partial derivative d1^a d2^b (Nyquist mode dropped for odd orders).
Field spectral_derivative(const Field& f, int a, int b);
Field spectral_laplacian(const Field& f);

// ---- norms ---------------------------------------------------------------

enum class NormKind { Lp, Ck, L1loc };
struct NormSpec {
  NormKind kind = NormKind::Lp;
  double p = 2.0;  ///< used by Lp; +inf selects the sup norm
  int k = 0;       ///< used by Ck
};

/// Euclidean magnitude over components at each node.
Field magnitude(const Field& f);
double norm(const Field& f, NormSpec which);
double lp_norm(const Field& f, double p);
double sup_norm(const Field& f);
/// sup over nodes x0 of the integral of |f| over the closed unit disk about x0.
double l1loc_norm(const Field& f);
/// sum_{j<=k} sup |d^j f| with centered differences.
double ck_norm(const Field& f, int k);
/// Integral of a scalar field (or sum over components).
double integral(const Field& f);

// ---- functional inequalities --------------------------------------------

enum class GNVariant { Gag1, Gag2, Gag6, Gag3, Gag4 };
/// Ratio of the left side to the right side (without constants).
/// Gag1 uses (k, p); the others fix their exponents.
double gn_ratio(const Field& u, GNVariant variant, int k = 1, double p = 2.0);

struct StrichartzOptions {
  double s_max = -1;     ///< default (L/4)^2
  double s_min = -1;     ///< default h^2
  double ratio = 1.0905077326652577;  ///< 2^{1/8}
};
/// (integral_0^s_max s^{-2/p} ||e^{s Lap} u||_p^2 ds) / ||u||_2^2, zero for u = 0.
double strichartz_functional(const Field& u, double p, StrichartzOptions opt = {});

/// u(s1) = e^{(s1-s0)Lap} u0 + integral e^{(s1-s)Lap} F(s) ds, trapezoid rule with `substeps` panels.
Field duhamel_solve(const Field& initial, const std::function<Field(double)>& forcing, double s0, double s1,
                    int substeps = 64);

// ---- geometric s-ladders -------------------------------------------------

struct LadderSpec {
  double s_min = -1;  ///< default h^2
  double ratio = 1.189207115002721;  ///< 2^{1/4}
  bool include_zero = true;
};
/// 0, s_min, s_min*rho, ... up to and including the last rung <= s_max (s_max itself appended).
std::vector<double> make_ladder(const Grid2D& g, const LadderSpec& spec, double s_max);
/// Quadrature weights: trapezoid on [0, s_1], trapezoid in log s afterwards.
std::vector<double> ladder_weights(std::span<const double> s);

/// Non-uniform three-point derivative at the middle node.
inline double three_point_derivative(double fm, double f0, double fp, double a_minus, double b_plus) {
  // a_minus = s0 - s_-, b_plus = s_+ - s0
  const double a = a_minus, b = b_plus;
  return (a * a * fp - b * b * fm - (a * a - b * b) * f0) / (a * b * (a + b));
}

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace grid
}  // namespace caloricflow
