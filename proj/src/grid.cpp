#include "caloricflow/grid.hpp"

#include "caloricflow/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace caloricflow {

// ===========================================================================
// Grid and fields

Grid2D::Grid2D(int n_, double L_) : n(n_), L(L_) {
  if (n < 4 || (n & (n - 1)) != 0) {
    std::ostringstream os;
    os << "grid size must be a power of two >= 4, got " << n;
    throw GridError(os.str());
  }
  if (!(L > 0) || !std::isfinite(L)) throw GridError("grid half-width must be positive");
}

Field::Field(const Grid2D& g, int comps, double fill) : grid_(g), comps_(comps) {
  if (comps <= 0) throw GridError("field needs at least one component");
  v_.assign(static_cast<std::size_t>(g.nodes()) * comps, fill);
}

Field Field::component(int c) const {
  Field out(grid_, 1);
  for (int k = 0; k < nodes(); ++k) out.at(k)[0] = at(k)[c];
  return out;
}

void Field::set_component(int c, const Field& scalar) {
  if (!(scalar.grid() == grid_) || scalar.components() != 1) throw GridError("set_component: incompatible scalar field");
  for (int k = 0; k < nodes(); ++k) at(k)[c] = scalar.at(k)[0];
}

void Field::require_compatible(const Field& o) const {
  if (!(grid_ == o.grid_) || comps_ != o.comps_) throw GridError("fields live on different grids or have different shapes");
}

Field& Field::operator+=(const Field& o) {
  require_compatible(o);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_compatible(o);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

MapField::MapField(const Grid2D& g, int m) : Field(g, m + 1) {
  for (int k = 0; k < nodes(); ++k) at(k)[0] = 1.0;
}

MapField::MapField(Field values, std::optional<AmbientVec> at_infinity, std::optional<double> support_radius)
    : Field(std::move(values)), at_inf_(std::move(at_infinity)), support_(support_radius) {
  if (components() < 2) throw GeometryError("map field needs m >= 1");
  validate();
}

MapField MapField::constant(const Grid2D& g, const HPoint& p) {
  Field f(g, static_cast<int>(p.dim()));
  for (int k = 0; k < f.nodes(); ++k)
    for (std::size_t c = 0; c < p.dim(); ++c) f.at(k)[c] = p[c];
  return MapField(std::move(f), p.vec(), 0.0);
}

void MapField::set_tail(std::optional<AmbientVec> at_infinity, std::optional<double> support_radius) {
  at_inf_ = std::move(at_infinity);
  support_ = support_radius;
}

double MapField::constraint_violation() const {
  const int d = dim();
  double worst = 0;
  for (int k = 0; k < nodes(); ++k) {
    const double* p = at(k);
    double e2 = 0;
    for (int c = 0; c < d; ++c) e2 += p[c] * p[c];
    worst = std::max(worst, std::abs(kern::mink(p, p, d) + 1.0) / std::max(1.0, 0.5 * e2));
  }
  return worst;
}

void MapField::validate(double tol) const {
  const int d = dim();
  for (double x : values())
    if (!std::isfinite(x)) throw GeometryError("map field has non-finite entries");
  for (int k = 0; k < nodes(); ++k)
    if (at(k)[0] <= 0) throw GeometryError("map field leaves the upper sheet");
  const double v = constraint_violation();
  if (v > tol) {
    std::ostringstream os;
    os << "map field violates the hyperboloid constraint by " << v;
    throw GeometryError(os.str());
  }
  if (at_inf_ && static_cast<int>(at_inf_->dim()) != d) throw GeometryError("constant at infinity has wrong dimension");
  if (at_inf_) HPoint(*at_inf_, 1e-10);
  if (at_inf_ && support_) {
    const Grid2D& g = grid();
    if (*support_ > g.L / 2) throw GeometryError("support radius must be below L/2");
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i) {
        const double r = std::hypot(g.x1(i), g.x2(j));
        if (r <= *support_) continue;
        const double* p = at(g.index(i, j));
        for (int c = 0; c < d; ++c)
          if (std::abs(p[c] - (*at_inf_)[c]) > 1e-10 * std::max(1.0, std::abs(p[c])))
            throw GeometryError("map field differs from its constant outside the declared support");
      }
  }
}

HPoint MapField::point(int node) const {
  return HPoint(AmbientVec(std::span<const double>(at(node), static_cast<std::size_t>(dim()))), 1e-10);
}

TangentField::TangentField(const MapField& base) : Field(base.grid(), base.dim()) {}

double TangentField::tangency_violation(const MapField& base) const {
  require_compatible(base);
  double worst = 0;
  for (int k = 0; k < nodes(); ++k) {
    const double* p = base.at(k);
    worst = std::max(worst, std::abs(kern::mink(at(k), p, dim())) / std::max(1.0, std::abs(p[0])));
  }
  return worst;
}

void TangentField::project_onto(const MapField& base) {
  require_compatible(base);
  for (int k = 0; k < nodes(); ++k) kern::tangent_project(base.at(k), at(k), dim());
}

namespace grid {

// ===========================================================================
// Finite differences

namespace {

template <class Fn>
Field stencil(const Field& f, Fn fn) {
  const Grid2D& g = f.grid();
  const int n = g.n, c = f.components();
  Field out(g, c);
  parallel_for(0, n, [&](int j0, int j1) {
    for (int j = j0; j < j1; ++j) {
      const int jm = g.wrap(j - 1), jp = g.wrap(j + 1);
      for (int i = 0; i < n; ++i) {
        const int im = g.wrap(i - 1), ip = g.wrap(i + 1);
        const int k = j * n + i;
        fn(out.at(k), f.at(k), f.at(j * n + im), f.at(j * n + ip), f.at(jm * n + i), f.at(jp * n + i), c);
      }
    }
  });
  return out;
}

}  // namespace

Field laplacian(const Field& f) {
  const double ih2 = 1.0 / (f.grid().h() * f.grid().h());
  return stencil(f, [ih2](double* o, const double* x, const double* w, const double* e, const double* s,
                          const double* nn, int c) {
    for (int q = 0; q < c; ++q) o[q] = (w[q] + e[q] + s[q] + nn[q] - 4.0 * x[q]) * ih2;
  });
}

Field diff(const Field& f, int axis) {
  const double i2h = 0.5 / f.grid().h();
  if (axis == 0)
    return stencil(f, [i2h](double* o, const double*, const double* w, const double* e, const double*,
                            const double*, int c) {
      for (int q = 0; q < c; ++q) o[q] = (e[q] - w[q]) * i2h;
    });
  return stencil(f, [i2h](double* o, const double*, const double*, const double*, const double* s,
                          const double* nn, int c) {
    for (int q = 0; q < c; ++q) o[q] = (nn[q] - s[q]) * i2h;
  });
}

Field diff2(const Field& f, int axis) {
  const double ih2 = 1.0 / (f.grid().h() * f.grid().h());
  if (axis == 0)
    return stencil(f, [ih2](double* o, const double* x, const double* w, const double* e, const double*,
                            const double*, int c) {
      for (int q = 0; q < c; ++q) o[q] = (e[q] + w[q] - 2.0 * x[q]) * ih2;
    });
  return stencil(f, [ih2](double* o, const double* x, const double*, const double*, const double* s,
                          const double* nn, int c) {
    for (int q = 0; q < c; ++q) o[q] = (nn[q] + s[q] - 2.0 * x[q]) * ih2;
  });
}

std::array<Field, 2> grad(const Field& f) { return {diff(f, 0), diff(f, 1)}; }

// ===========================================================================
// Spectral tools

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Forward/backward real transforms of one n x n scalar slab.
class Fft2 {
 public:
  explicit Fft2(int n) : n_(n), nh_(n / 2 + 1) {
    real_ = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n) * nh_);
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
  }
  ~Fft2() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  double* real() { return real_; }
  fftw_complex* spec() { return spec_; }
  void forward() { fftw_execute(fwd_); }
  void backward() {
    fftw_execute(bwd_);
    const double inv = 1.0 / (static_cast<double>(n_) * n_);
    for (int k = 0; k < n_ * n_; ++k) real_[k] *= inv;
  }
  int n() const { return n_; }
  int nh() const { return nh_; }

 private:
  int n_, nh_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_, bwd_;
};

int signed_freq(int k, int n) { return k <= n / 2 ? k : k - n; }

double symbol_exponent(HeatSymbol symbol, double xi1, double xi2, double h) {
  if (symbol == HeatSymbol::Continuum) return -(xi1 * xi1 + xi2 * xi2);
  const double a = std::sin(0.5 * xi1 * h), b = std::sin(0.5 * xi2 * h);
  return -4.0 / (h * h) * (a * a + b * b);
}

}  // namespace

struct HeatSemigroup::Impl {
  Grid2D grid;
  int comps;
  HeatSymbol symbol;
  std::vector<std::vector<std::complex<double>>> hat;
  std::vector<double> exponent;  // per spectral index
};

HeatSemigroup::HeatSemigroup(const Field& f, HeatSymbol symbol) : impl_(new Impl) {
  impl_->grid = f.grid();
  impl_->comps = f.components();
  impl_->symbol = symbol;
  const int n = f.grid().n;
  Fft2 fft(n);
  const int nh = fft.nh();
  for (int c = 0; c < f.components(); ++c) {
    for (int k = 0; k < n * n; ++k) fft.real()[k] = f.at(k)[c];
    fft.forward();
    std::vector<std::complex<double>> h(static_cast<std::size_t>(n) * nh);
    for (std::size_t q = 0; q < h.size(); ++q) h[q] = {fft.spec()[q][0], fft.spec()[q][1]};
    impl_->hat.push_back(std::move(h));
  }
  const double dxi = std::numbers::pi / f.grid().L;
  impl_->exponent.resize(static_cast<std::size_t>(n) * nh);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < nh; ++i)
      impl_->exponent[static_cast<std::size_t>(j) * nh + i] =
          symbol_exponent(symbol, dxi * i, dxi * signed_freq(j, n), f.grid().h());
}

HeatSemigroup::~HeatSemigroup() { delete impl_; }

Field HeatSemigroup::at(double s) const {
  if (s < 0) throw GridError("heat propagation needs s >= 0");
  const int n = impl_->grid.n;
  Fft2 fft(n);
  const int nh = fft.nh();
  Field out(impl_->grid, impl_->comps);
  std::vector<double> mult(impl_->exponent.size());
  for (std::size_t q = 0; q < mult.size(); ++q) mult[q] = std::exp(s * impl_->exponent[q]);
  for (int c = 0; c < impl_->comps; ++c) {
    const auto& h = impl_->hat[static_cast<std::size_t>(c)];
    for (std::size_t q = 0; q < h.size(); ++q) {
      fft.spec()[q][0] = h[q].real() * mult[q];
      fft.spec()[q][1] = h[q].imag() * mult[q];
    }
    (void)nh;
    fft.backward();
    for (int k = 0; k < n * n; ++k) out.at(k)[c] = fft.real()[k];
  }
  return out;
}

Field heat_propagate(const Field& f, double s, HeatSymbol symbol) { return HeatSemigroup(f, symbol).at(s); }

Field heat_propagate_fd(const Field& f, double s, double ds) {
  const double h = f.grid().h();
  if (!(ds > 0) || ds > 0.25 * h * h * (1 + 1e-12)) throw GridError("explicit heat step violates ds <= h^2/4");
  Field u = f;
  double t = 0;
  while (t < s * (1 - 1e-14)) {
    const double step = std::min(ds, s - t);
    Field lap = laplacian(u);
    lap *= step;
    u += lap;
    t += step;
  }
  return u;
}

Field spectral_derivative(const Field& f, int a, int b) {
  const int n = f.grid().n;
  Fft2 fft(n);
  const int nh = fft.nh();
  const double dxi = std::numbers::pi / f.grid().L;
  Field out(f.grid(), f.components());
  for (int c = 0; c < f.components(); ++c) {
    for (int k = 0; k < n * n; ++k) fft.real()[k] = f.at(k)[c];
    fft.forward();
    for (int j = 0; j < n; ++j) {
      const int kj = signed_freq(j, n);
      for (int i = 0; i < nh; ++i) {
        auto& z = fft.spec()[j * nh + i];
        const bool drop = ((a % 2 == 1) && i == n / 2) || ((b % 2 == 1) && j == n / 2);
        if (drop) {
          z[0] = z[1] = 0;
          continue;
        }
        std::complex<double> m = std::pow(std::complex<double>(0, dxi * i), a) *
                                 std::pow(std::complex<double>(0, dxi * kj), b);
        std::complex<double> v(z[0], z[1]);
        v *= m;
        z[0] = v.real();
        z[1] = v.imag();
      }
    }
    fft.backward();
    for (int k = 0; k < n * n; ++k) out.at(k)[c] = fft.real()[k];
  }
  return out;
}

Field spectral_laplacian(const Field& f) { return spectral_derivative(f, 2, 0) + spectral_derivative(f, 0, 2); }

// ===========================================================================
// Norms

Field magnitude(const Field& f) {
  Field out(f.grid(), 1);
  const int c = f.components();
  for (int k = 0; k < f.nodes(); ++k) {
    double s = 0;
    for (int q = 0; q < c; ++q) s += f.at(k)[q] * f.at(k)[q];
    out.at(k)[0] = std::sqrt(s);
  }
  return out;
}

double sup_norm(const Field& f) {
  const Field m = magnitude(f);
  double s = 0;
  for (double v : m.values()) s = std::max(s, v);
  return s;
}

double lp_norm(const Field& f, double p) {
  if (std::isinf(p)) return sup_norm(f);
  if (!(p >= 1)) throw GridError("Lp norm needs p >= 1");
  const Field m = magnitude(f);
  const double h2 = f.grid().h() * f.grid().h();
  double s = 0;
  if (p == 1) {
    for (double v : m.values()) s += v;
    return s * h2;
  }
  if (p == 2) {
    for (double v : m.values()) s += v * v;
    return std::sqrt(s * h2);
  }
  for (double v : m.values()) s += std::pow(v, p);
  return std::pow(s * h2, 1.0 / p);
}

double integral(const Field& f) {
  double s = 0;
  for (double v : f.values()) s += v;
  return s * f.grid().h() * f.grid().h();
}

double l1loc_norm(const Field& f) {
  const Grid2D& g = f.grid();
  const int n = g.n;
  const double h = g.h();
  const Field m = magnitude(f);
  // Row prefix sums over a doubled row make each disk row an O(1) lookup.
  std::vector<double> prefix(static_cast<std::size_t>(n) * (2 * n + 1), 0.0);
  for (int j = 0; j < n; ++j) {
    double* row = prefix.data() + static_cast<std::size_t>(j) * (2 * n + 1);
    for (int i = 0; i < 2 * n; ++i) row[i + 1] = row[i] + m.at(j * n + (i % n))[0];
  }
  const int reach = static_cast<int>(std::floor(1.0 / h + 1e-9));
  std::vector<int> half(static_cast<std::size_t>(2 * reach + 1));
  for (int dj = -reach; dj <= reach; ++dj) {
    const double rem = 1.0 - (dj * h) * (dj * h);
    half[dj + reach] = rem < 0 ? -1 : static_cast<int>(std::floor(std::sqrt(rem) / h + 1e-9));
  }
  if (2 * reach + 1 > n) throw GridError("unit disk does not fit inside the periodic grid");
  double best = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int dj = -reach; dj <= reach; ++dj) {
        const int w = half[dj + reach];
        if (w < 0) continue;
        const double* row = prefix.data() + static_cast<std::size_t>(g.wrap(j + dj)) * (2 * n + 1);
        const int lo = g.wrap(i - w);
        s += row[lo + 2 * w + 1] - row[lo];
      }
      best = std::max(best, s);
    }
  return best * h * h;
}

double ck_norm(const Field& f, int k) {
  if (k < 0) throw GridError("C^k norm needs k >= 0");
  double total = sup_norm(f);
  std::vector<Field> level{f};
  for (int order = 1; order <= k; ++order) {
    std::vector<Field> next;
    for (const auto& g : level) {
      next.push_back(diff(g, 0));
      next.push_back(diff(g, 1));
    }
    double s = 0;
    for (int node = 0; node < f.nodes(); ++node) {
      double acc = 0;
      for (const auto& g : next)
        for (int c = 0; c < f.components(); ++c) acc += g.at(node)[c] * g.at(node)[c];
      s = std::max(s, std::sqrt(acc));
    }
    total += s;
    level = std::move(next);
  }
  return total;
}

double norm(const Field& f, NormSpec which) {
  switch (which.kind) {
    case NormKind::Lp: return lp_norm(f, which.p);
    case NormKind::Ck: return ck_norm(f, which.k);
    case NormKind::L1loc: return l1loc_norm(f);
  }
  throw GridError("unknown norm kind");
}

// ===========================================================================
// Functional inequalities

namespace {

/// Pointwise |d^k u| over all ordered index tuples, assembled into one field.
Field derivative_tensor(const Field& u, int k) {
  if (k == 0) return u;
  const int c = u.components();
  Field out(u.grid(), c * (k + 1));
  for (int a = 0; a <= k; ++a) {
    double mult = 1;  // binomial(k, a): number of ordered tuples with a ones
    for (int q = 0; q < a; ++q) mult = mult * (k - q) / (q + 1);
    const Field d = spectral_derivative(u, a, k - a);
    const double w = std::sqrt(mult);
    for (int node = 0; node < u.nodes(); ++node)
      for (int q = 0; q < c; ++q) out.at(node)[a * c + q] = w * d.at(node)[q];
  }
  return out;
}

}  // namespace

double gn_ratio(const Field& u, GNVariant variant, int k, double p) {
  auto safe = [](double num, double den) {
    if (den == 0) throw GridError("Gagliardo-Nirenberg ratio has a vanishing denominator");
    return num / den;
  };
  switch (variant) {
    case GNVariant::Gag1: {
      if (k < 0) throw GridError("Gag1 needs k >= 0");
      const double lhs = lp_norm(derivative_tensor(u, k), p);
      return safe(lhs, std::sqrt(lp_norm(u, p) * lp_norm(derivative_tensor(u, 2 * k), p)));
    }
    case GNVariant::Gag2:
      return safe(sup_norm(u), std::sqrt(lp_norm(u, 2) * lp_norm(derivative_tensor(u, 2), 2)));
    case GNVariant::Gag6:
      return safe(lp_norm(u, 2), std::sqrt(lp_norm(u, 1) * lp_norm(derivative_tensor(u, 2), 1)));
    case GNVariant::Gag3:
      return safe(sup_norm(u), std::cbrt(lp_norm(u, 2)) * std::pow(lp_norm(derivative_tensor(u, 1), 4), 2.0 / 3.0));
    case GNVariant::Gag4:
      return safe(lp_norm(u, 4), std::sqrt(lp_norm(u, 2) * lp_norm(derivative_tensor(u, 1), 2)));
  }
  throw GridError("unknown Gagliardo-Nirenberg variant");
}

double strichartz_functional(const Field& u, double p, StrichartzOptions opt) {
  if (!(p > 2)) throw GridError("Strichartz functional needs p > 2");
  const double u2 = lp_norm(u, 2);
  if (u2 == 0) return 0;
  const Grid2D& g = u.grid();
  const double s_max = opt.s_max > 0 ? opt.s_max : (g.L / 4) * (g.L / 4);
  const double s_min = opt.s_min > 0 ? opt.s_min : g.h() * g.h();
  if (!(opt.ratio > 1)) throw GridError("Strichartz ladder ratio must exceed 1");
  const double expo = std::isinf(p) ? 0.0 : -2.0 / p;
  HeatSemigroup semi(u);
  std::vector<double> s{s_min};
  while (s.back() * opt.ratio < s_max * (1 - 1e-12)) s.push_back(s.back() * opt.ratio);
  if (s.back() < s_max) s.push_back(s_max);
  std::vector<double> g_s(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double np = lp_norm(semi.at(s[j]), p);
    g_s[j] = std::pow(s[j], expo) * np * np;
  }
  // [0, s_min]: the propagated field is still u to leading order.
  const double u_p = lp_norm(u, p);
  double total = u_p * u_p * std::pow(s_min, 1.0 + expo) / (1.0 + expo);
  for (std::size_t j = 0; j + 1 < s.size(); ++j)
    total += 0.5 * std::log(s[j + 1] / s[j]) * (s[j] * g_s[j] + s[j + 1] * g_s[j + 1]);
  return total / (u2 * u2);
}

Field duhamel_solve(const Field& initial, const std::function<Field(double)>& forcing, double s0, double s1,
                    int substeps) {
  if (!(s1 >= s0)) throw GridError("Duhamel interval must satisfy s1 >= s0");
  if (substeps < 1) throw GridError("Duhamel quadrature needs at least one panel");
  Field out = heat_propagate(initial, s1 - s0);
  if (s1 == s0) return out;
  const double ds = (s1 - s0) / substeps;
  for (int q = 0; q <= substeps; ++q) {
    const double s = s0 + q * ds;
    const double w = (q == 0 || q == substeps) ? 0.5 * ds : ds;
    Field term = heat_propagate(forcing(s), s1 - s);
    term *= w;
    out += term;
  }
  return out;
}

// ===========================================================================
// Ladders

std::vector<double> make_ladder(const Grid2D& g, const LadderSpec& spec, double s_max) {
  const double s_min = spec.s_min > 0 ? spec.s_min : g.h() * g.h();
  if (!(spec.ratio > 1)) throw GridError("ladder ratio must exceed 1");
  if (!(s_max >= s_min)) throw GridError("ladder needs s_max >= s_min");
  std::vector<double> s;
  if (spec.include_zero) s.push_back(0.0);
  for (double v = s_min; v <= s_max * (1 + 1e-12); v *= spec.ratio) s.push_back(v);
  if (s.back() < s_max * (1 - 1e-9))
    s.push_back(s_max);
  else
    s.back() = s_max;
  return s;
}

std::vector<double> ladder_weights(std::span<const double> s) {
  std::vector<double> w(s.size(), 0.0);
  for (std::size_t j = 0; j + 1 < s.size(); ++j) {
    const double a = s[j], b = s[j + 1];
    if (!(b > a)) throw GridError("ladder must be strictly increasing");
    if (a == 0) {
      w[j] += 0.5 * b;
      w[j + 1] += 0.5 * b;
    } else {
      const double du = std::log(b / a);
      w[j] += 0.5 * du * a;
      w[j + 1] += 0.5 * du * b;
    }
  }
  return w;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw GridError("slope fit needs at least two matched samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw GridError("slope fit needs positive samples");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace grid
}  // namespace caloricflow
