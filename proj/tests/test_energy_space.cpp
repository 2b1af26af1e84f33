#include <doctest.h>

#include "caloricflow/energy_space.hpp"
#include "caloricflow/heat_flow.hpp"
#include "caloricflow/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace caloricflow;
using energy::LPResolution;

namespace {

LPResolution random_resolution(const Grid2D& g, int m, std::size_t rungs, std::mt19937_64& rng) {
  std::vector<double> s{0.0};
  for (std::size_t j = 1; j < rungs; ++j) s.push_back(0.01 * std::pow(1.5, static_cast<double>(j)));
  LPResolution r = LPResolution::zero(g, m, s);
  std::normal_distribution<double> nd;
  for (Field& f : r.psi_s)
    for (double& v : f.values()) v = nd(rng);
  for (double& v : r.psi_t0.values()) v = nd(rng);
  return r;
}

Eigen::MatrixXd random_rotation(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) A(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ();
  if (Q.determinant() < 0) Q.col(0) *= -1.0;
  return Q;
}

double max_abs(const Field& f) {
  double w = 0;
  for (double v : f.values()) w = std::max(w, std::abs(v));
  return w;
}

ClassicalData moving_bump(const Grid2D& g, double amplitude, double velocity) {
  synth::Recipe r;
  r.amplitude = amplitude;
  r.velocity_amplitude = velocity;
  return synth::make_data(g, r);
}

OrthoFrame isometry_frame(const energy::TargetIsometry& iso, const OrthoFrame& e) {
  const int d = static_cast<int>(e.base().dim());
  auto apply = [&](const AmbientVec& v) {
    AmbientVec out(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[i] += iso.matrix[i * d + j] * v[j];
    return out;
  };
  std::vector<AmbientVec> cols;
  for (const auto& c : e.cols()) cols.push_back(apply(c));
  return OrthoFrame(HPoint(apply(e.base().vec())), cols);
}

}  // namespace

TEST_CASE("symmetric storage") {
  CHECK(energy::SymField::slot(0, 2) == energy::SymField::slot(2, 0));
  CHECK(energy::SymField::slot(2, 2) == 5);
  CHECK_THROWS_AS(energy::SymField::slot(0, 3), energy::EnergyError);
}

TEST_CASE("Gram, stress and energy of constant data") {
  const Grid2D g(16, 2.0);
  const ClassicalData c(MapField::constant(g, exp_map(TangentVec(HPoint::basepoint(2), {0, 0.4, -0.2}))));
  CHECK(max_abs(energy::gram(c)) == 0.0);
  CHECK(max_abs(energy::stress(c)) == 0.0);
  CHECK(energy::energy(c) == 0.0);
}

TEST_CASE("stress and destress are inverse") {
  const Grid2D g(4, 1.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  energy::SymField G(g);
  for (double& v : G.values()) v = u(rng);
  const energy::SymField T = energy::stress(G);
  const energy::SymField back = energy::destress(T);
  CHECK(max_abs(back - G) < 1e-14);
  for (int k = 0; k < g.nodes(); ++k) {
    const double trT = -T.get(k, 0, 0) + T.get(k, 1, 1) + T.get(k, 2, 2);
    const double trG = -G.get(k, 0, 0) + G.get(k, 1, 1) + G.get(k, 2, 2);
    CHECK(trT == doctest::Approx(-0.5 * trG).epsilon(1e-14));
    CHECK(T.get(k, 0, 0) == doctest::Approx(0.5 * (G.get(k, 0, 0) + G.get(k, 1, 1) + G.get(k, 2, 2))).epsilon(1e-14));
  }
}

TEST_CASE("Gram is positive semidefinite and vanishes exactly for constant data") {
  const Grid2D g(64, 4.0);
  const ClassicalData d = moving_bump(g, 1.3, 0.7);
  const energy::SymField G = energy::gram(d);
  double lo = 0;
  for (double v : G.min_eigenvalue().values()) lo = std::min(lo, v);
  CHECK(lo >= -1e-10);
  CHECK(energy::energy(d) > 0);
  // E = 0 iff Gram = 0 iff constant: a single displaced node is seen by both.
  Field p0 = MapField::constant(g, HPoint::basepoint(2));
  const HPoint q = exp_map(TangentVec(HPoint::basepoint(2), {0, 1e-3, 0}));
  std::copy(q.vec().data(), q.vec().data() + 3, p0.at(g.index(5, 7)));
  const ClassicalData bumped{MapField(p0)};
  CHECK(energy::energy(bumped) > 0);
  CHECK(max_abs(energy::gram(bumped)) > 0);
}

TEST_CASE("energy of geodesic data reduces to the scalar Dirichlet integral") {
  std::vector<double> hs, errs;
  for (int n : {32, 64, 128}) {
    const Grid2D g(n, 6.0);
    const Field f = synth::sample_scalar(g, [](double x, double y) { return std::exp(-(x * x + y * y) / 2); });
    const ClassicalData d(synth::geodesic_map(f, 2, 1));
    // int |grad f|^2 = 2 pi int r^3 exp(-r^2) dr = pi.
    const double exact = std::numbers::pi / 2;
    hs.push_back(g.h());
    errs.push_back(std::abs(energy::energy(d) - exact));
    double t00 = 0;
    for (double v : energy::energy_density(d).values()) t00 += v;
    CHECK(std::abs(t00 * g.h() * g.h() - exact) < g.h() * g.h());
  }
  CHECK(errs.back() < 0.2 * hs.back() * hs.back());
  CHECK(grid::loglog_slope(hs, errs) > 1.9);
}

TEST_CASE("resolution norm and quotient distance") {
  const Grid2D g(8, 1.0);
  std::mt19937_64 rng(7);
  const LPResolution a = random_resolution(g, 3, 6, rng);
  const LPResolution zero = LPResolution::zero(g, 3, a.s);
  CHECK(energy::lp_norm(zero) == 0.0);
  CHECK(energy::lp_norm(a.scaled(-2.5)) == doctest::Approx(2.5 * energy::lp_norm(a)).epsilon(1e-14));
  CHECK(energy::lp_distance(a, zero) == doctest::Approx(energy::lp_norm(a)).epsilon(1e-12));

  SUBCASE("quotient invariance") {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd U = random_rotation(3, rng);
      CHECK(energy::lp_distance(a, a.rotated(U)) < 1e-10);
      CHECK(energy::lp_norm(a.rotated(U)) == doctest::Approx(energy::lp_norm(a)).epsilon(1e-12));
    }
  }
  SUBCASE("metric axioms on random triples") {
    for (int trial = 0; trial < 50; ++trial) {
      const LPResolution x = random_resolution(g, 3, 6, rng), y = random_resolution(g, 3, 6, rng),
                         z = random_resolution(g, 3, 6, rng);
      const double xy = energy::lp_distance(x, y), yx = energy::lp_distance(y, x);
      CHECK(std::abs(xy - yx) < 1e-12 * xy);
      CHECK(xy <= energy::lp_distance(x, z) + energy::lp_distance(z, y) + 1e-10);
    }
  }
  SUBCASE("closed form against an angle search (m = 2)") {
    for (int trial = 0; trial < 5; ++trial) {
      const LPResolution x = random_resolution(g, 2, 5, rng), y = random_resolution(g, 2, 5, rng);
      const Eigen::MatrixXd M = energy::cross_pairing(x, y);
      const double nx = energy::lp_norm(x), ny = energy::lp_norm(y);
      double best = std::numeric_limits<double>::infinity();
      const int samples = 100000;
      for (int i = 0; i < samples; ++i) {
        const double t = 2 * std::numbers::pi * i / samples;
        const double c = std::cos(t), s = std::sin(t);
        // ||R a - b||^2 = |a|^2 + |b|^2 - 2 tr(R^T M)
        const double tr = c * M(0, 0) + s * M(1, 0) - s * M(0, 1) + c * M(1, 1);
        best = std::min(best, nx * nx + ny * ny - 2 * tr);
      }
      CHECK(std::abs(std::sqrt(best) - energy::lp_distance(x, y)) < 1e-6);
    }
  }
  SUBCASE("mismatched inputs") {
    CHECK_THROWS_AS(energy::lp_distance(a, random_resolution(Grid2D(8, 2.0), 3, 6, rng)), energy::EnergyError);
    CHECK_THROWS_AS(energy::lp_distance(a, random_resolution(g, 2, 6, rng)), energy::EnergyError);
    LPResolution shifted = a;
    shifted.s[2] *= 1.01;
    CHECK_THROWS_AS(energy::lp_distance(a, shifted), energy::EnergyError);
  }
  SUBCASE("a prefix ladder is extended by zero rungs") {
    LPResolution cut = a;
    cut.s.pop_back();
    cut.psi_s.pop_back();
    cut.weights = grid::ladder_weights(cut.s);
    LPResolution padded = a;
    padded.psi_s.back() = Field(g, 3);
    CHECK(energy::lp_distance(cut, a) == doctest::Approx(energy::lp_distance(padded, a)).epsilon(1e-14));
  }
}

TEST_CASE("caloric resolution of data") {
  const Grid2D g(32, 4.0);
  SUBCASE("constant data") {
    const ClassicalData c(MapField::constant(g, HPoint::basepoint(2)));
    const LPResolution r = energy::lp_embed(c, OrthoFrame::standard(2));
    CHECK(energy::lp_norm(r) == 0.0);
  }
  const ClassicalData d = moving_bump(g, 1.0, 0.5);
  const LPResolution r = energy::lp_embed(d, OrthoFrame::standard(2));
  SUBCASE("rotating e_inf rotates the resolution") {
    const double c = std::cos(0.9), s = std::sin(0.9);
    const LPResolution q = energy::lp_embed(d, OrthoFrame::standard(2).rotated(std::vector<double>{c, -s, s, c}));
    Eigen::Matrix2d R;
    R << c, -s, s, c;
    const LPResolution expect = r.rotated(R.transpose());
    double worst = max_abs(expect.psi_t0 - q.psi_t0);
    for (std::size_t j = 0; j < r.psi_s.size(); ++j) worst = std::max(worst, max_abs(expect.psi_s[j] - q.psi_s[j]));
    CHECK(worst < 1e-10);
    CHECK(energy::lp_norm(q) == doctest::Approx(energy::lp_norm(r)).epsilon(1e-12));
  }
  SUBCASE("energy identity, converging under refinement") {
    const double e32 = energy::energy(d), n32 = energy::lp_norm(r);
    const Grid2D g64(64, 4.0);
    const ClassicalData d64 = moving_bump(g64, 1.0, 0.5);
    const double e64 = energy::energy(d64), n64 = energy::lp_norm(energy::lp_embed(d64, OrthoFrame::standard(2)));
    CHECK(std::abs(n64 * n64 - e64) < 0.02 * e64);
    CHECK(std::abs(n64 * n64 - e64) / e64 < 0.5 * std::abs(n32 * n32 - e32) / e32);
  }
  SUBCASE("ladder refinement") {
    gauge::GaugeConfig fine = energy::default_embedding(g);
    fine.flow.ladder.ratio = std::pow(2.0, 1.0 / 16);
    const ClassicalData gauss(synth::gaussian_geodesic(g, 2, 1.0, 1.0));
    const double coarse = energy::lp_norm(energy::lp_embed(gauss, OrthoFrame::standard(2)));
    const double refined = energy::lp_norm(energy::lp_embed(gauss, OrthoFrame::standard(2), fine));
    CHECK(std::abs(coarse - refined) < 0.01 * refined);
  }
}

TEST_CASE("symmetry actions") {
  const Grid2D g(32, 4.0);
  const ClassicalData d = moving_bump(g, 1.0, 0.5);
  const double E = energy::energy(d);

  SUBCASE("time reversal") {
    const ClassicalData rr = energy::apply_symmetry(energy::apply_symmetry(d, energy::TimeReversal{}), energy::TimeReversal{});
    CHECK(max_abs(rr.phi1 - d.phi1) == 0.0);
    CHECK(max_abs(rr.phi0 - d.phi0) == 0.0);
    CHECK(energy::energy(energy::apply_symmetry(d, energy::TimeReversal{})) == E);
  }
  SUBCASE("translation by grid cells") {
    const ClassicalData t = energy::apply_symmetry(d, energy::Translation{3, -5});
    CHECK(t.phi0(g.index(3, -5), 1) == d.phi0(g.index(0, 0), 1));
    CHECK(energy::energy(t) == doctest::Approx(E).epsilon(1e-13));
    const ClassicalData back = energy::apply_symmetry(t, energy::Translation{-3, 5});
    CHECK(max_abs(back.phi0 - d.phi0) == 0.0);
  }
  SUBCASE("target isometries preserve Gram and energy") {
    const energy::TargetIsometry iso = energy::lorentz(2, 0.6, 1, 1.1);
    const ClassicalData u = energy::apply_symmetry(d, iso);
    const energy::SymField a = energy::gram(d), b = energy::gram(u);
    CHECK(max_abs(a - b) < 1e-11 * (1 + max_abs(a)));
    CHECK(energy::energy(u) == doctest::Approx(E).epsilon(1e-11));
    CHECK(u.phi0.constraint_violation() < 1e-12);
    energy::TargetIsometry bad = iso;
    bad.matrix[1] += 1e-3;
    CHECK_THROWS_AS(energy::apply_symmetry(d, bad), energy::EnergyError);
  }
  SUBCASE("dilation by 2") {
    const ClassicalData big = energy::apply_symmetry(d, energy::Dilation{1});
    CHECK(big.grid().L == 2 * g.L);
    CHECK(energy::energy(big) == doctest::Approx(E).epsilon(1e-13));
    const ClassicalData other = moving_bump(g, 0.8, 0.3);
    const double before = energy::lp_distance(energy::lp_embed(d, OrthoFrame::standard(2)),
                                              energy::lp_embed(other, OrthoFrame::standard(2)));
    const double after =
        energy::lp_distance(energy::lp_embed(big, OrthoFrame::standard(2)),
                            energy::lp_embed(energy::apply_symmetry(other, energy::Dilation{1}), OrthoFrame::standard(2)));
    CHECK(before > 0.1);
    CHECK(std::abs(after - before) < 0.01 * before);
  }
}

TEST_CASE("the resolution is invariant under target isometries") {
  const Grid2D g(32, 4.0);
  const ClassicalData d = moving_bump(g, 1.0, 0.5);
  const energy::TargetIsometry iso = energy::lorentz(2, 0.4, 2, -0.7);
  const ClassicalData u = energy::apply_symmetry(d, iso);
  const LPResolution a = energy::lp_embed(d, OrthoFrame::standard(2));
  const LPResolution b = energy::lp_embed(u, isometry_frame(iso, OrthoFrame::standard(2)));
  CHECK(energy::lp_distance(a, b) < 1e-8 * energy::lp_norm(a));
}

TEST_CASE("degeneracy functionals") {
  const Grid2D g(32, 4.0);
  CHECK_THROWS_AS(energy::degeneracy_functionals(ClassicalData(MapField::constant(g, HPoint::basepoint(2))), {1, 1}),
                  energy::EnergyError);
  const auto zero = energy::degeneracy_functionals(ClassicalData(MapField::constant(g, HPoint::basepoint(2))), {0, 1});
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);

  // phi0 depending on x1 only, moving with unit speed along x1.
  const Field f = synth::sample_scalar(g, [](double x, double) { return std::sin(std::numbers::pi * x / 4); });
  const MapField phi0 = synth::geodesic_map(f, 2, 1);
  TangentField phi1 = heat::covariant_gradient(phi0)[0];
  phi1 *= -1.0;
  const auto wave = energy::degeneracy_functionals(ClassicalData(phi0, phi1), {1, 0});
  CHECK(wave[0] < 1e-12);
  CHECK(wave[1] < 1e-12);

  // Stretched travelling family: bounded energy, both functionals tend to zero.
  const Grid2D wide(256, 32.0);
  std::vector<double> transverse;
  std::vector<double> energies;
  for (double k : {1.0, 2.0, 4.0, 8.0}) {
    const ClassicalData dk = energy::stretched_travelling_data(wide, 2, k, 1.0, 1.5);
    const auto fn = energy::degeneracy_functionals(dk, {1, 0});
    CHECK(fn[0] < 1e-12);
    transverse.push_back(fn[1]);
    energies.push_back(energy::energy(dk));
  }
  for (std::size_t i = 0; i + 1 < transverse.size(); ++i) CHECK(transverse[i + 1] < 0.3 * transverse[i]);
  for (double e : energies) {
    CHECK(e >= 0.5 * energies.front());
    CHECK(e <= 2.0 * energies.front());
  }
}

TEST_CASE("Gram continuity probe") {
  const Grid2D g(32, 4.0);
  const gauge::GaugeConfig cfg = energy::default_embedding(g);
  const ClassicalData base = moving_bump(g, 1.0, 0.5);
  SUBCASE("identical data") {
    const auto rep = energy::gram_continuity_probe({base, base}, OrthoFrame::standard(2), cfg);
    CHECK(rep.pairs.size() == 1);
    CHECK(rep.pairs[0].lp < 1e-14);
    CHECK(rep.pairs[0].gram_l1 == 0.0);
  }
  SUBCASE("rotated data") {
    const energy::TargetIsometry iso = energy::lorentz(2, 0.0, 1, 0.8);
    const ClassicalData rot = energy::apply_symmetry(base, iso);
    CHECK(energy::gram_distance(energy::gram(base), energy::gram(rot)) < 1e-12);
  }
  SUBCASE("perturbation sweep") {
    std::vector<ClassicalData> family{base};
    for (double eps : {0.1, 0.05, 0.025}) family.push_back(moving_bump(g, 1.0 + eps, 0.5 * (1 + eps)));
    const auto rep = energy::gram_continuity_probe(family, OrthoFrame::standard(2), cfg);
    std::vector<energy::PairDistance> to_base;
    for (const auto& p : rep.pairs)
      if (p.i == 0) to_base.push_back(p);
    REQUIRE(to_base.size() == 3);
    for (std::size_t i = 0; i + 1 < to_base.size(); ++i) {
      CHECK(to_base[i + 1].lp < to_base[i].lp);
      CHECK(to_base[i + 1].gram_l1 < to_base[i].gram_l1);
    }
    CHECK(std::isfinite(rep.max_ratio));
    CHECK_THROWS_AS(energy::gram_continuity_probe({base}, OrthoFrame::standard(2), cfg), energy::EnergyError);
  }
}
