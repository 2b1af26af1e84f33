#include "caloricflow/hyperbolic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

namespace caloricflow {

namespace {

void require_same_dim(const AmbientVec& a, const AmbientVec& b) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << "ambient dimension mismatch: " << a.dim() << " vs " << b.dim();
    throw GeometryError(os.str());
  }
}

double euclid_sq(const AmbientVec& a) {
  double s = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * a[i];
  return s;
}

// sinh(a)/a, accurate near zero.
double sinhc(double a) {
  if (std::abs(a) < 1e-4) {
    const double a2 = a * a;
    return 1.0 + a2 / 6.0 + a2 * a2 / 120.0;
  }
  return std::sinh(a) / a;
}

}  // namespace

AmbientVec& AmbientVec::operator+=(const AmbientVec& o) {
  require_same_dim(*this, o);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

AmbientVec& AmbientVec::operator-=(const AmbientVec& o) {
  require_same_dim(*this, o);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

AmbientVec& AmbientVec::operator*=(double s) {
  for (double& x : c_) x *= s;
  return *this;
}

HPoint::HPoint(AmbientVec p, double tol) : p_(std::move(p)) {
  if (p_.dim() < 2) throw GeometryError("hyperboloid needs m >= 1");
  for (std::size_t i = 0; i < p_.dim(); ++i)
    if (!std::isfinite(p_[i])) throw GeometryError("non-finite point coordinate");
  if (p_[0] <= 0) throw GeometryError("point is not on the upper sheet");
  const double defect = std::abs(mink_form(p_, p_) + 1.0);
  if (defect > tol * euclid_sq(p_)) {
    std::ostringstream os;
    os << "point violates <p,p> = -1 by " << defect;
    throw GeometryError(os.str());
  }
}

HPoint HPoint::basepoint(int m) {
  AmbientVec o(static_cast<std::size_t>(m + 1));
  o[0] = 1.0;
  return HPoint(std::move(o));
}

TangentVec::TangentVec(HPoint base, AmbientVec v, double tol) : base_(std::move(base)), v_(std::move(v)) {
  require_same_dim(base_.vec(), v_);
  const double pairing = std::abs(mink_form(base_.vec(), v_));
  const double scale = std::sqrt(euclid_sq(base_.vec()) * euclid_sq(v_));
  if (pairing > tol * std::max(1.0, scale)) {
    std::ostringstream os;
    os << "vector is not tangent: <v,p> = " << pairing;
    throw GeometryError(os.str());
  }
}

OrthoFrame::OrthoFrame(HPoint base, std::vector<AmbientVec> cols, double tol)
    : base_(std::move(base)), cols_(std::move(cols)) {
  const int m = base_.m();
  if (static_cast<int>(cols_.size()) != m) throw GeometryError("frame needs exactly m columns");
  for (int a = 0; a < m; ++a) {
    require_same_dim(base_.vec(), cols_[a]);
    if (std::abs(mink_form(cols_[a], base_.vec())) > tol * std::max(1.0, base_[0] * base_[0]))
      throw GeometryError("frame column is not tangent");
    for (int b = 0; b < m; ++b) {
      const double target = a == b ? 1.0 : 0.0;
      if (std::abs(mink_form(cols_[a], cols_[b]) - target) > tol * std::max(1.0, base_[0] * base_[0]))
        throw GeometryError("frame is not orthonormal");
    }
  }
  std::vector<double> flat;
  for (const auto& c : cols_) flat.insert(flat.end(), c.span().begin(), c.span().end());
  if (kern::orientation(base_.vec().data(), flat.data(), m, m + 1) <= 0)
    throw GeometryError("frame is negatively oriented");
}

OrthoFrame OrthoFrame::standard(int m) {
  std::vector<AmbientVec> cols;
  for (int a = 0; a < m; ++a) {
    AmbientVec e(static_cast<std::size_t>(m + 1));
    e[static_cast<std::size_t>(a + 1)] = 1.0;
    cols.push_back(std::move(e));
  }
  return OrthoFrame(HPoint::basepoint(m), std::move(cols));
}

OrthoFrame OrthoFrame::rotated(std::span<const double> R) const {
  const int m = this->m();
  if (static_cast<int>(R.size()) != m * m) throw GeometryError("rotation has wrong size");
  std::vector<AmbientVec> out(static_cast<std::size_t>(m), AmbientVec(base_.dim()));
  for (int b = 0; b < m; ++b)
    for (int a = 0; a < m; ++a) out[b] += R[static_cast<std::size_t>(a * m + b)] * cols_[a];
  return OrthoFrame(base_, std::move(out));
}

double mink_form(const AmbientVec& a, const AmbientVec& b) {
  require_same_dim(a, b);
  return kern::mink(a.data(), b.data(), static_cast<int>(a.dim()));
}

HPoint project_hyperboloid(const AmbientVec& a) {
  AmbientVec out = a;
  kern::normalize_point(out.data(), static_cast<int>(out.dim()));
  return HPoint(std::move(out));
}

TangentVec tangent_project(const HPoint& p, const AmbientVec& a) {
  require_same_dim(p.vec(), a);
  AmbientVec v = a;
  kern::tangent_project(p.vec().data(), v.data(), static_cast<int>(v.dim()));
  return TangentVec(p, std::move(v));
}

double tangent_norm(const TangentVec& v) { return std::sqrt(std::max(0.0, mink_form(v.vec(), v.vec()))); }

HPoint exp_map(const TangentVec& v) {
  const int d = static_cast<int>(v.vec().dim());
  AmbientVec out(v.vec().dim());
  kern::exp_map(v.base().vec().data(), v.vec().data(), out.data(), d);
  return HPoint(std::move(out));
}

TangentVec log_map(const HPoint& p, const HPoint& q) {
  require_same_dim(p.vec(), q.vec());
  AmbientVec out(p.dim());
  kern::log_map(p.vec().data(), q.vec().data(), out.data(), static_cast<int>(p.dim()));
  return TangentVec(p, std::move(out), 1e-10);
}

double dist(const HPoint& p, const HPoint& q) {
  require_same_dim(p.vec(), q.vec());
  return kern::dist(p.vec().data(), q.vec().data(), static_cast<int>(p.dim()));
}

TangentVec wedge_apply(const TangentVec& X, const TangentVec& Y, const TangentVec& Z) {
  const auto& p = X.base().vec();
  for (const auto* w : {&Y, &Z}) {
    const auto& q = w->base().vec();
    require_same_dim(p, q);
    for (std::size_t i = 0; i < p.dim(); ++i)
      if (std::abs(p[i] - q[i]) > 1e-12 * std::max(1.0, std::abs(p[i])))
        throw GeometryError("wedge arguments live at different base points");
  }
  AmbientVec out = mink_form(Y.vec(), Z.vec()) * X.vec() - mink_form(X.vec(), Z.vec()) * Y.vec();
  return TangentVec(X.base(), std::move(out), 1e-10);
}

TangentVec parallel_transport(const HPoint& p, const HPoint& q, const TangentVec& v) {
  require_same_dim(p.vec(), q.vec());
  AmbientVec out = v.vec();
  kern::transport(p.vec().data(), q.vec().data(), out.data(), static_cast<int>(p.dim()));
  return TangentVec(q, std::move(out), 1e-10);
}

OrthoFrame transport_frame(const OrthoFrame& f, const HPoint& q) {
  std::vector<AmbientVec> cols;
  for (const auto& c : f.cols()) cols.push_back(parallel_transport(f.base(), q, TangentVec(f.base(), c, 1e-10)).vec());
  return OrthoFrame(q, std::move(cols));
}

namespace kern {

void normalize_point(double* a, int d) {
  const double q = -mink(a, a, d);
  if (!(q > 0) || !(a[0] > 0)) throw GeometryError("cannot project a non-timelike or past-pointing vector");
  const double inv = 1.0 / std::sqrt(q);
  for (int i = 0; i < d; ++i) a[i] *= inv;
}

void lift_time(double* a, int d) {
  double r2 = 0;
  for (int i = 1; i < d; ++i) r2 += a[i] * a[i];
  a[0] = std::sqrt(1.0 + r2);
}

void exp_map(const double* p, const double* v, double* out, int d) {
  const double a = std::sqrt(std::max(0.0, mink(v, v, d)));
  const double c = std::cosh(a);
  const double s = sinhc(a);
  for (int i = 0; i < d; ++i) out[i] = c * p[i] + s * v[i];
  lift_time(out, d);
}

void exp_map_with_velocity(const double* p, const double* v, double* q, double* vq, int d) {
  const double a2 = std::max(0.0, mink(v, v, d));
  const double a = std::sqrt(a2);
  const double c = std::cosh(a);
  const double s = sinhc(a);
  for (int i = 0; i < d; ++i) {
    q[i] = c * p[i] + s * v[i];
    vq[i] = a2 * s * p[i] + c * v[i];
  }
  lift_time(q, d);
  tangent_project(q, vq, d);
}

void transport(const double* p, const double* q, double* v, int d) {
  const double k = mink(v, q, d) / (1.0 - mink(p, q, d));
  for (int i = 0; i < d; ++i) v[i] += k * (p[i] + q[i]);
}

double dist(const double* p, const double* q, int d) {
  double y = 0;
  {
    double s = -(q[0] - p[0]) * (q[0] - p[0]);
    for (int i = 1; i < d; ++i) s += (q[i] - p[i]) * (q[i] - p[i]);
    y = std::max(0.0, 0.5 * s);
  }
  return std::log1p(y + std::sqrt(y * (y + 2.0)));
}

void log_map(const double* p, const double* q, double* out, int d) {
  const double c = mink(p, q, d);
  for (int i = 0; i < d; ++i) out[i] = q[i] + c * p[i];
  const double u = std::sqrt(std::max(0.0, mink(out, out, d)));
  const double k = u < 1e-8 ? 1.0 - u * u / 6.0 : std::asinh(u) / u;
  for (int i = 0; i < d; ++i) out[i] *= k;
}

bool gram_schmidt(const double* p, double* frame, int m, int d) {
  for (int a = 0; a < m; ++a) {
    double* ea = frame + a * d;
    tangent_project(p, ea, d);
    for (int b = 0; b < a; ++b) {
      const double* eb = frame + b * d;
      const double c = mink(ea, eb, d);
      for (int i = 0; i < d; ++i) ea[i] -= c * eb[i];
    }
    tangent_project(p, ea, d);
    const double n2 = mink(ea, ea, d);
    if (!(n2 > 1e-20)) return false;
    const double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < d; ++i) ea[i] *= inv;
  }
  return true;
}

double orientation(const double* p, const double* frame, int m, int d) {
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i) M(i, 0) = p[i];
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < d; ++i) M(i, a + 1) = frame[a * d + i];
  return M.determinant();
}

}  // namespace kern

}  // namespace caloricflow
