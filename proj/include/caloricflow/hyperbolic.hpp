/// @file hyperbolic.hpp
/// @brief Pointwise geometry of the hyperboloid model of H^m inside Minkowski R^{1+m}.
///
/// Vectors carry 1+m ambient coordinates (x^0, x^1, ..., x^m). The form is
/// <a,b> = -a0 b0 + sum_i ai bi. Points satisfy <p,p> = -1 with p0 > 0.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace caloricflow {

/// Thrown whenever a geometric precondition fails.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kConstraintTol = 1e-12;
/// Synthetic data farther than this from the basepoint is rejected (cosh overflow margin).
inline constexpr double kMaxSyntheticDistance = 20.0;

/// A plain (1+m)-vector of ambient coordinates.
class AmbientVec {
 public:
  AmbientVec() = default;
  explicit AmbientVec(std::size_t dim, double fill = 0.0) : c_(dim, fill) {}
  AmbientVec(std::initializer_list<double> xs) : c_(xs) {}
  explicit AmbientVec(std::span<const double> xs) : c_(xs.begin(), xs.end()) {}

  std::size_t dim() const { return c_.size(); }
  int m() const { return static_cast<int>(c_.size()) - 1; }
  double& operator[](std::size_t i) { return c_[i]; }
  double operator[](std::size_t i) const { return c_[i]; }
  std::span<double> span() { return c_; }
  std::span<const double> span() const { return c_; }
  const double* data() const { return c_.data(); }
  double* data() { return c_.data(); }

  AmbientVec& operator+=(const AmbientVec& o);
  AmbientVec& operator-=(const AmbientVec& o);
  AmbientVec& operator*=(double s);
  friend AmbientVec operator+(AmbientVec a, const AmbientVec& b) { return a += b; }
  friend AmbientVec operator-(AmbientVec a, const AmbientVec& b) { return a -= b; }
  friend AmbientVec operator*(double s, AmbientVec a) { return a *= s; }
  friend AmbientVec operator*(AmbientVec a, double s) { return a *= s; }

 private:
  std::vector<double> c_;
};

/// Point on the upper sheet; construction validates the constraint.
class HPoint {
 public:
  explicit HPoint(AmbientVec p, double tol = kConstraintTol);
  static HPoint basepoint(int m);  ///< o = (1,0,...,0)
  const AmbientVec& vec() const { return p_; }
  std::size_t dim() const { return p_.dim(); }
  int m() const { return p_.m(); }
  double operator[](std::size_t i) const { return p_[i]; }

 private:
  AmbientVec p_;
};

/// Tangent vector anchored at a base point.
class TangentVec {
 public:
  TangentVec(HPoint base, AmbientVec v, double tol = kConstraintTol);
  const HPoint& base() const { return base_; }
  const AmbientVec& vec() const { return v_; }
  double operator[](std::size_t i) const { return v_[i]; }

 private:
  HPoint base_;
  AmbientVec v_;
};

/// Orthonormal, positively oriented frame of T_p H^m.
class OrthoFrame {
 public:
  OrthoFrame(HPoint base, std::vector<AmbientVec> cols, double tol = 1e-10);
  /// Frame (E_1, ..., E_m) at the basepoint o.
  static OrthoFrame standard(int m);
  const HPoint& base() const { return base_; }
  const std::vector<AmbientVec>& cols() const { return cols_; }
  const AmbientVec& col(int a) const { return cols_[static_cast<std::size_t>(a)]; }
  int m() const { return base_.m(); }
  /// Right action by an m x m rotation R (row-major): e'_b = sum_a e_a R_ab.
  OrthoFrame rotated(std::span<const double> R) const;

 private:
  HPoint base_;
  std::vector<AmbientVec> cols_;
};

// ---------------------------------------------------------------------------
// Value-level operations.

double mink_form(const AmbientVec& a, const AmbientVec& b);
HPoint project_hyperboloid(const AmbientVec& a);
TangentVec tangent_project(const HPoint& p, const AmbientVec& a);
double tangent_norm(const TangentVec& v);
HPoint exp_map(const TangentVec& v);
TangentVec log_map(const HPoint& p, const HPoint& q);
double dist(const HPoint& p, const HPoint& q);
TangentVec wedge_apply(const TangentVec& X, const TangentVec& Y, const TangentVec& Z);
TangentVec parallel_transport(const HPoint& p, const HPoint& q, const TangentVec& v);
OrthoFrame transport_frame(const OrthoFrame& f, const HPoint& q);

// ---------------------------------------------------------------------------
// Raw kernels on contiguous coordinates; these back every grid loop.
namespace kern {

inline double mink(const double* a, const double* b, int d) {
  double s = -a[0] * b[0];
  for (int i = 1; i < d; ++i) s += a[i] * b[i];
  return s;
}

/// a <- a / sqrt(-<a,a>). Throws if a is not future timelike.
void normalize_point(double* a, int d);
/// Resets the time component so that <a,a> = -1 exactly, keeping the spatial part.
void lift_time(double* a, int d);

/// v <- v + <v,p> p
inline void tangent_project(const double* p, double* v, int d) {
  const double c = mink(v, p, d);
  for (int i = 0; i < d; ++i) v[i] += c * p[i];
}

/// out = exp_p(v); out may not alias p or v.
void exp_map(const double* p, const double* v, double* out, int d);

/// out = velocity at the end of the geodesic t -> exp_p(t v), t in [0,1].
void exp_map_with_velocity(const double* p, const double* v, double* q, double* vq, int d);

/// Parallel transport of v from p to q along the geodesic, in place.
void transport(const double* p, const double* q, double* v, int d);

/// Numerically stable hyperbolic distance.
double dist(const double* p, const double* q, int d);

/// log_p(q) into out.
void log_map(const double* p, const double* q, double* out, int d);

/// Minkowski Gram-Schmidt of m vectors (stored contiguously, stride d) tangent at p.
/// Returns false if the input is degenerate.
bool gram_schmidt(const double* p, double* frame, int m, int d);

/// Determinant of the (1+m)x(1+m) matrix [p | e_1 ... e_m].
double orientation(const double* p, const double* frame, int m, int d);

}  // namespace kern

}  // namespace caloricflow
