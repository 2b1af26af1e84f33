#include "caloricflow/energy_space.hpp"

#include "caloricflow/heat_flow.hpp"
#include "caloricflow/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace caloricflow::energy {

namespace {

using Mat = Eigen::MatrixXd;

constexpr double kMetric[3] = {-1.0, 1.0, 1.0};

Field pair_with_frame(const Field& v, const gauge::FrameField& e) {
  const int m = e.m(), d = e.dim();
  Field out(v.grid(), m);
  for (int k = 0; k < v.nodes(); ++k)
    for (int a = 0; a < m; ++a) out.at(k)[a] = kern::mink(v.at(k), e.col(k, a), d);
  return out;
}

// sum_k h^2 y_k x_k^T
Mat outer_integral(const Field& x, const Field& y) {
  const int m = x.components();
  Mat M = Mat::Zero(m, m);
  for (int k = 0; k < x.nodes(); ++k) {
    Eigen::Map<const Eigen::VectorXd> a(x.at(k), m), b(y.at(k), m);
    M += b * a.transpose();
  }
  return M * (x.grid().h() * x.grid().h());
}

double sq_norm(const Field& f) {
  double s = 0;
  for (double v : f.values()) s += v * v;
  return s * f.grid().h() * f.grid().h();
}

Field rotate_components(const Field& f, const Mat& U) {
  const int m = f.components();
  Field out(f.grid(), m);
  for (int k = 0; k < f.nodes(); ++k)
    Eigen::Map<Eigen::VectorXd>(out.at(k), m) = U * Eigen::Map<const Eigen::VectorXd>(f.at(k), m);
  return out;
}

// Copies of a and b on the longer of the two ladders; the shorter one must be a prefix and is
// extended by zero rungs (the flow has stopped at its tail there).
std::pair<LPResolution, LPResolution> on_common_ladder(const LPResolution& a, const LPResolution& b) {
  if (!(a.grid == b.grid)) throw EnergyError("resolutions live on different grids");
  if (a.m() != b.m()) throw EnergyError("resolutions have different target dimensions");
  const LPResolution& longer = a.s.size() >= b.s.size() ? a : b;
  const LPResolution& shorter = a.s.size() >= b.s.size() ? b : a;
  for (std::size_t j = 0; j < shorter.s.size(); ++j)
    if (std::abs(a.s[j] - b.s[j]) > 1e-12 * std::max(1.0, a.s[j])) throw EnergyError("resolutions use different ladders");
  std::pair<LPResolution, LPResolution> out{a, b};
  for (LPResolution* r : {&out.first, &out.second}) {
    r->psi_s.resize(longer.s.size(), Field(r->grid, r->m()));
    r->s = longer.s;
    r->weights = longer.weights;
  }
  return out;
}

}  // namespace

int SymField::slot(int a, int b) {
  if (a > b) std::swap(a, b);
  static constexpr int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  if (a < 0 || b > 2) throw EnergyError("symmetric index out of range");
  return table[a][b];
}

Field SymField::min_eigenvalue() const {
  Field out(grid(), 1);
  for (int k = 0; k < nodes(); ++k) {
    Eigen::Matrix3d M;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) M(a, b) = get(k, a, b);
    out.at(k)[0] = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(M, Eigen::EigenvaluesOnly).eigenvalues()(0);
  }
  return out;
}

SymField gram(const ClassicalData& data) {
  const auto grads = heat::covariant_gradient(data.phi0);
  const int d = data.phi0.dim();
  SymField G(data.grid());
  for (int k = 0; k < G.nodes(); ++k) {
    const double* v[3] = {data.phi1.at(k), grads[0].at(k), grads[1].at(k)};
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) G.set(k, a, b, kern::mink(v[a], v[b], d));
  }
  return G;
}

SymField stress(const SymField& G) {
  SymField T(G.grid());
  for (int k = 0; k < G.nodes(); ++k) {
    const double tr = -G.get(k, 0, 0) + G.get(k, 1, 1) + G.get(k, 2, 2);
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) T.set(k, a, b, G.get(k, a, b) - (a == b ? 0.5 * kMetric[a] * tr : 0.0));
  }
  return T;
}

SymField stress(const ClassicalData& data) { return stress(gram(data)); }

SymField destress(const SymField& T) {
  SymField G(T.grid());
  for (int k = 0; k < T.nodes(); ++k) {
    const double tr = -T.get(k, 0, 0) + T.get(k, 1, 1) + T.get(k, 2, 2);
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) G.set(k, a, b, T.get(k, a, b) - (a == b ? kMetric[a] * tr : 0.0));
  }
  return G;
}

double energy(const ClassicalData& data) {
  const int d = data.phi0.dim();
  double kinetic = 0;
  for (int k = 0; k < data.phi1.nodes(); ++k) kinetic += kern::mink(data.phi1.at(k), data.phi1.at(k), d);
  const double h = data.grid().h();
  return heat::dirichlet_energy(data.phi0) + 0.5 * kinetic * h * h;
}

Field energy_density(const ClassicalData& data) {
  const SymField T = stress(data);
  Field out(data.grid(), 1);
  for (int k = 0; k < out.nodes(); ++k) out.at(k)[0] = T.get(k, 0, 0);
  return out;
}

// ---- resolution ----------------------------------------------------------------

LPResolution LPResolution::rotated(const Mat& U) const {
  if (U.rows() != m() || U.cols() != m()) throw EnergyError("rotation has the wrong size");
  LPResolution out{grid, s, weights, {}, rotate_components(psi_t0, U)};
  out.psi_s.reserve(psi_s.size());
  for (const Field& f : psi_s) out.psi_s.push_back(rotate_components(f, U));
  return out;
}

LPResolution LPResolution::scaled(double c) const {
  LPResolution out = *this;
  for (Field& f : out.psi_s) f *= c;
  out.psi_t0 *= c;
  return out;
}

LPResolution LPResolution::zero(const Grid2D& g, int m, std::vector<double> s) {
  LPResolution out;
  out.grid = g;
  out.weights = grid::ladder_weights(s);
  out.psi_s.assign(s.size(), Field(g, m));
  out.s = std::move(s);
  out.psi_t0 = Field(g, m);
  return out;
}

gauge::GaugeConfig default_embedding(const Grid2D& g) {
  gauge::GaugeConfig cfg;
  cfg.flow.s_max = 256;
  cfg.flow.ladder.s_min = cfg.flow.ds(g);
  cfg.flow.ladder.ratio = std::pow(2.0, 0.125);
  cfg.probe_fraction = 0;
  return cfg;
}

LPResolution lp_embed(const ClassicalData& data, const OrthoFrame& e_inf) {
  return lp_embed(data, e_inf, default_embedding(data.grid()));
}

LPResolution lp_embed(const ClassicalData& data, const OrthoFrame& e_inf, const gauge::GaugeConfig& cfg) {
  data.validate();
  const gauge::CaloricGauge G = gauge::build_caloric_gauge(data.phi0, e_inf, cfg);
  LPResolution r;
  r.grid = data.grid();
  r.s = G.trace().s_values();
  r.weights = grid::ladder_weights(r.s);
  r.psi_s.reserve(G.rungs());
  for (std::size_t j = 0; j < G.rungs(); ++j)
    r.psi_s.push_back(pair_with_frame(G.trace().rungs[j].centre.dphi_ds, G.frame(j)));
  r.psi_t0 = pair_with_frame(data.phi1, G.frame(0));
  return r;
}

double lp_norm(const LPResolution& r) {
  double total = 0.5 * sq_norm(r.psi_t0);
  for (std::size_t j = 0; j < r.psi_s.size(); ++j) total += r.weights[j] * sq_norm(r.psi_s[j]);
  return std::sqrt(total);
}

Mat cross_pairing(const LPResolution& a_in, const LPResolution& b_in) {
  const auto [a, b] = on_common_ladder(a_in, b_in);
  Mat M = 0.5 * outer_integral(a.psi_t0, b.psi_t0);
  for (std::size_t j = 0; j < a.psi_s.size(); ++j) M += a.weights[j] * outer_integral(a.psi_s[j], b.psi_s[j]);
  return M;
}

Mat lp_alignment(const LPResolution& a, const LPResolution& b) {
  // <U a, b> = tr(U^T M) is maximised over SO(m) by the polar factor of M, with the least singular
  // direction flipped when det M < 0. Ties (zero singular values) resolve through the SVD's ordering.
  const Mat M = cross_pairing(a, b);
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat W = svd.matrixU();
  const Mat V = svd.matrixV();
  if ((W * V.transpose()).determinant() < 0) W.col(W.cols() - 1) *= -1.0;
  return W * V.transpose();
}

double lp_distance(const LPResolution& a_in, const LPResolution& b_in) {
  const Mat U = lp_alignment(a_in, b_in);
  const auto [a, b] = on_common_ladder(a_in, b_in);
  double total = 0;
  auto add = [&](const Field& x, const Field& y, double w) {
    const int m = x.components();
    double s = 0;
    for (int k = 0; k < x.nodes(); ++k) {
      const Eigen::VectorXd diff =
          U * Eigen::Map<const Eigen::VectorXd>(x.at(k), m) - Eigen::Map<const Eigen::VectorXd>(y.at(k), m);
      s += diff.squaredNorm();
    }
    total += w * s * x.grid().h() * x.grid().h();
  };
  add(a.psi_t0, b.psi_t0, 0.5);
  for (std::size_t j = 0; j < a.psi_s.size(); ++j) add(a.psi_s[j], b.psi_s[j], a.weights[j]);
  return std::sqrt(total);
}

// ---- symmetries ------------------------------------------------------------

TargetIsometry lorentz(int m, double eta, int axis, double theta) {
  if (axis < 1 || axis > m) throw EnergyError("boost axis out of range");
  const int d = m + 1;
  Mat B = Mat::Identity(d, d), R = Mat::Identity(d, d);
  B(0, 0) = B(axis, axis) = std::cosh(eta);
  B(0, axis) = B(axis, 0) = std::sinh(eta);
  if (m >= 2) {
    R(1, 1) = R(2, 2) = std::cos(theta);
    R(1, 2) = -std::sin(theta);
    R(2, 1) = std::sin(theta);
  }
  const Mat U = R * B;
  TargetIsometry out;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out.matrix.push_back(U(i, j));
  return out;
}

namespace {

ClassicalData translate(const ClassicalData& data, const Translation& t) {
  const Grid2D& g = data.grid();
  Field p0(g, data.phi0.dim()), p1(g, data.phi0.dim());
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const int src = g.index(i - t.di, j - t.dj), dst = g.index(i, j);
      std::copy(data.phi0.at(src), data.phi0.at(src) + p0.components(), p0.at(dst));
      std::copy(data.phi1.at(src), data.phi1.at(src) + p1.components(), p1.at(dst));
    }
  std::optional<double> support;
  if (data.phi0.support_radius()) {
    const double r = *data.phi0.support_radius() + g.h() * std::hypot(t.di, t.dj);
    if (r <= g.L / 2) support = r;
  }
  return ClassicalData(MapField(std::move(p0), data.phi0.at_infinity(), support), TangentField(std::move(p1)));
}

ClassicalData isometry(const ClassicalData& data, const TargetIsometry& iso) {
  const int d = data.phi0.dim();
  if (static_cast<int>(iso.matrix.size()) != d * d) throw EnergyError("isometry has the wrong size");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> U(iso.matrix.data(), d, d);
  Mat eta = Mat::Identity(d, d);
  eta(0, 0) = -1;
  if ((U.transpose() * eta * U - eta).cwiseAbs().maxCoeff() > 1e-10 || U(0, 0) < 1 - 1e-12 || U.determinant() < 0)
    throw EnergyError("matrix is not an orientation-preserving isometry of the upper sheet");
  auto apply = [&](const Field& f) {
    Field out(f.grid(), d);
    for (int k = 0; k < f.nodes(); ++k)
      Eigen::Map<Eigen::VectorXd>(out.at(k), d) = U * Eigen::Map<const Eigen::VectorXd>(f.at(k), d);
    return out;
  };
  Field p0 = apply(data.phi0);
  for (int k = 0; k < p0.nodes(); ++k) kern::lift_time(p0.at(k), d);
  std::optional<AmbientVec> inf;
  if (data.phi0.at_infinity()) {
    AmbientVec q(static_cast<std::size_t>(d));
    Eigen::Map<Eigen::VectorXd>(q.data(), d) = U * Eigen::Map<const Eigen::VectorXd>(data.phi0.at_infinity()->data(), d);
    kern::lift_time(q.data(), d);
    inf = q;
  }
  MapField phi0(std::move(p0), inf, data.phi0.support_radius());
  TangentField phi1(apply(data.phi1));
  phi1.project_onto(phi0);
  return ClassicalData(std::move(phi0), std::move(phi1));
}

ClassicalData dilate(const ClassicalData& data, const Dilation& dil) {
  if (std::abs(dil.k) > 20) throw EnergyError("dilation exponent out of range");
  const double lambda = std::ldexp(1.0, dil.k);
  const Grid2D g(data.grid().n, data.grid().L * lambda);
  Field p0(g, data.phi0.dim()), p1(g, data.phi0.dim());
  std::copy(data.phi0.values().begin(), data.phi0.values().end(), p0.values().begin());
  std::copy(data.phi1.values().begin(), data.phi1.values().end(), p1.values().begin());
  p1 *= 1.0 / lambda;
  std::optional<double> support;
  if (data.phi0.support_radius()) support = *data.phi0.support_radius() * lambda;
  return ClassicalData(MapField(std::move(p0), data.phi0.at_infinity(), support), TangentField(std::move(p1)));
}

}  // namespace

ClassicalData apply_symmetry(const ClassicalData& data, const Symmetry& which) {
  return std::visit(
      [&](const auto& op) -> ClassicalData {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, Translation>) {
          return translate(data, op);
        } else if constexpr (std::is_same_v<T, TimeReversal>) {
          TangentField v = data.phi1;
          v *= -1.0;
          return ClassicalData(data.phi0, std::move(v));
        } else if constexpr (std::is_same_v<T, TargetIsometry>) {
          return isometry(data, op);
        } else {
          return dilate(data, op);
        }
      },
      which);
}

// ---- degeneracy ------------------------------------------------------------

std::array<double, 2> degeneracy_functionals(const ClassicalData& data, std::array<double, 2> v) {
  if (std::abs(std::hypot(v[0], v[1]) - 1.0) > 1e-12) throw EnergyError("direction must be a unit vector");
  const std::array<double, 2> w{-v[1], v[0]};
  const auto grads = heat::covariant_gradient(data.phi0);
  const int d = data.phi0.dim();
  std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
  double moving = 0, transverse = 0;
  for (int k = 0; k < data.phi0.nodes(); ++k) {
    for (int c = 0; c < d; ++c) {
      a[c] = data.phi1.at(k)[c] + v[0] * grads[0].at(k)[c] + v[1] * grads[1].at(k)[c];
      b[c] = w[0] * grads[0].at(k)[c] + w[1] * grads[1].at(k)[c];
    }
    moving += kern::mink(a.data(), a.data(), d);
    transverse += kern::mink(b.data(), b.data(), d);
  }
  const double h2 = data.grid().h() * data.grid().h();
  return {moving * h2, transverse * h2};
}

ClassicalData stretched_travelling_data(const Grid2D& g, int m, double k, double amplitude, double radius) {
  if (!(k >= 1)) throw EnergyError("stretch factor must be at least 1");
  const double c = amplitude / std::sqrt(k);
  const Field f = synth::sample_scalar(g, [&](double x1, double x2) { return c * synth::bump(std::hypot(x1, x2 / k), radius); });
  MapField phi0 = synth::geodesic_map(f, m, 1, radius * k);
  TangentField phi1 = heat::covariant_gradient(phi0)[0];
  phi1 *= -1.0;
  return ClassicalData(std::move(phi0), std::move(phi1));
}

// ---- continuity probe ------------------------------------------------------

double gram_distance(const SymField& a, const SymField& b) {
  a.require_compatible(b);
  double total = 0;
  for (int k = 0; k < a.nodes(); ++k) {
    double s = 0;
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) s += std::pow(a.get(k, x, y) - b.get(k, x, y), 2);
    total += std::sqrt(s);
  }
  return total * a.grid().h() * a.grid().h();
}

ContinuityReport gram_continuity_probe(const std::vector<ClassicalData>& data, const OrthoFrame& e_inf,
                                       const gauge::GaugeConfig& cfg) {
  if (data.size() < 2) throw EnergyError("the continuity probe needs at least two data");
  std::vector<LPResolution> res;
  std::vector<SymField> grams;
  for (const ClassicalData& d : data) {
    if (!(d.grid() == data.front().grid())) throw EnergyError("all data must share one grid");
    res.push_back(lp_embed(d, e_inf, cfg));
    grams.push_back(gram(d));
  }
  ContinuityReport rep;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      PairDistance p{i, j, lp_distance(res[i], res[j]), gram_distance(grams[i], grams[j])};
      if (p.lp > 0) rep.max_ratio = std::max(rep.max_ratio, p.gram_l1 / p.lp);
      rep.pairs.push_back(p);
    }
  return rep;
}

}  // namespace caloricflow::energy
