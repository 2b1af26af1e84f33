#include <doctest.h>

#include "caloricflow/caloric_gauge.hpp"
#include "caloricflow/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace caloricflow;
using gauge::CaloricGauge;
using gauge::GaugeConfig;

namespace {

GaugeConfig truncated(double s_max, bool companions = true) {
  GaugeConfig c;
  c.flow.s_max = s_max;
  c.flow.tail_eps = 0;
  c.flow.companions = companions;
  c.require_tail = false;
  return c;
}

double max_abs(const Field& f) {
  double w = 0;
  for (double v : f.values()) w = std::max(w, std::abs(v));
  return w;
}

double l2(const Field& f) { return grid::lp_norm(f, 2.0); }

MapField shifted(const MapField& phi, const TangentField& v, double t) {
  Field f(phi.grid(), phi.dim());
  std::vector<double> w(static_cast<std::size_t>(phi.dim()));
  for (int k = 0; k < phi.nodes(); ++k) {
    for (int i = 0; i < phi.dim(); ++i) w[i] = t * v.at(k)[i];
    kern::exp_map(phi.at(k), w.data(), f.at(k), phi.dim());
  }
  return MapField(std::move(f), phi.at_infinity(), phi.support_radius());
}

// Frame rotated by a constant R (columns e'_b = sum_a e_a R_ab).
OrthoFrame rotate(const OrthoFrame& e, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return e.rotated(std::vector<double>{c, -s, s, c});
}

}  // namespace

TEST_CASE("seeded frames") {
  double frame[6];
  gauge::seed_frame(HPoint::basepoint(2).vec().data(), frame, 2);
  CHECK(frame[0] == 0.0);
  CHECK(frame[1] == 1.0);
  CHECK(frame[5] == 1.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const HPoint p = exp_map(TangentVec(HPoint::basepoint(3), {0, u(rng), u(rng), u(rng)}));
    double f[12];
    gauge::seed_frame(p.vec().data(), f, 3);
    for (int a = 0; a < 3; ++a) {
      CHECK(std::abs(kern::mink(f + 4 * a, p.vec().data(), 4)) < 1e-12 * p[0]);
      for (int b = 0; b < 3; ++b)
        CHECK(std::abs(kern::mink(f + 4 * a, f + 4 * b, 4) - (a == b ? 1.0 : 0.0)) < 1e-12 * p[0] * p[0]);
    }
    CHECK(kern::orientation(p.vec().data(), f, 3, 4) > 0);
  }
}

TEST_CASE("matrix helpers") {
  const Grid2D g(8, 1.0);
  Field X(g, 3), Y(g, 3), Z(g, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (Field* f : {&X, &Y, &Z})
    for (double& v : f->values()) v = nd(rng);
  const Field W = gauge::wedge(X, Y);
  for (int k = 0; k < g.nodes(); ++k)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) CHECK(W.at(k)[a * 3 + b] == -W.at(k)[b * 3 + a]);
  CHECK(max_abs(gauge::apply(W, Z) - gauge::wedge_apply(X, Y, Z)) < 1e-14);
  CHECK(max_abs(gauge::covariant_diff(Z, Field(g, 9), 1) - grid::diff(Z, 1)) == 0.0);
  // (v ^ w) w . v = |v|^2 |w|^2 - <v,w>^2 >= 0
  const Field vw = gauge::wedge_apply(X, Y, Y);
  for (int k = 0; k < g.nodes(); ++k) {
    double dot = 0;
    for (int a = 0; a < 3; ++a) dot += vw.at(k)[a] * X.at(k)[a];
    CHECK(dot >= -1e-14);
  }
}

TEST_CASE("constant map: trivial gauge") {
  const Grid2D g(32, 4.0);
  const MapField c = MapField::constant(g, HPoint::basepoint(2));
  GaugeConfig cfg;
  cfg.flow.companions = true;
  const CaloricGauge G = gauge::build_caloric_gauge(c, OrthoFrame::standard(2), cfg);
  CHECK(G.rungs() == 1);
  CHECK(G.tail_defect() == 0.0);
  const gauge::GaugeState st = G.state(0);
  for (const Field* f : {&st.psi_x[0], &st.psi_x[1], &st.psi_s, &st.A_x[0], &st.A_x[1]}) CHECK(max_abs(*f) == 0.0);
  for (int k = 0; k < g.nodes(); ++k)
    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < 3; ++i) CHECK(G.frame(0).col(k, a)[i] == OrthoFrame::standard(2).col(a)[i]);
  const auto sr = gauge::structure_residual(st);
  CHECK(sr.torsion == 0.0);
  CHECK(sr.curvature == 0.0);
  CHECK(sr.ps_frame == 0.0);
  const auto scan = gauge::connection_bound_scan(G);
  CHECK(scan.sup_A2 == 0.0);
  CHECK(scan.reconstruction_gap == 0.0);
  CHECK(G.max_as_residual() == 0.0);

  const auto ev = gauge::evolution_residuals(
      gauge::build_caloric_gauge(c, OrthoFrame::standard(2), truncated(0.2)));
  REQUIRE(ev.size() > 3);
  for (const auto& r : ev) {
    CHECK(r.psi_evolve == 0.0);
    CHECK(r.sax == 0.0);
    CHECK(r.psis_heat == 0.0);
  }
}

TEST_CASE("preconditions") {
  const Grid2D g(16, 4.0);
  const MapField phi = synth::generic_bump(g, 2, 1.0, 1.5);
  GaugeConfig cfg;
  cfg.flow.s_max = 0.5;
  CHECK_THROWS_AS(gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), cfg), gauge::GaugeError);
  CHECK_THROWS_AS(gauge::build_caloric_gauge(phi, OrthoFrame::standard(3), truncated(0.5)), gauge::GaugeError);
  const OrthoFrame away = transport_frame(OrthoFrame::standard(2), exp_map(TangentVec(HPoint::basepoint(2), {0, 1, 0})));
  CHECK_THROWS_AS(gauge::build_caloric_gauge(phi, away, truncated(0.5)), gauge::GaugeError);
  const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), truncated(0.5, false));
  CHECK_FALSE(G.has_companions(1));
  CHECK_THROWS_AS(gauge::evolution_residual(G, 1), gauge::GaugeError);
  CHECK_THROWS_AS(G.frame(G.rungs()), gauge::GaugeError);
}

TEST_CASE("geodesic bump: psi along the first axis, flat connection") {
  const Grid2D g(64, 4.0);
  const MapField phi = synth::bump_geodesic(g, 2, 1.0, 2.0);
  const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), truncated(1.0));
  for (std::size_t j : {std::size_t{0}, G.rungs() / 2, G.rungs() - 1}) {
    const gauge::GaugeState st = G.state(j);
    for (int i = 0; i < 2; ++i) {
      double off = 0;
      for (int k = 0; k < g.nodes(); ++k) off = std::max(off, std::abs(st.psi_x[i].at(k)[1]));
      CHECK(off < 1e-12);
      CHECK(max_abs(st.A_x[i]) < 1e-12);
    }
    // psi^1 is the derivative of the scalar profile, read through the centered difference of the map.
    const auto r = gauge::structure_residual(st);
    CHECK(r.curvature < 1e-12);
  }
  // Along the geodesic gamma(t) = (cosh t, sinh t, 0) with e_1 = gamma'(f(x)), the centered difference pairs to
  // psi^1 = (sinh(f(x+h) - f(x)) - sinh(f(x-h) - f(x))) / 2h, with f the flowed profile.
  for (std::size_t j : {std::size_t{0}, G.rungs() - 1}) {
    const MapField& p = G.trace().rungs[j].centre.phi;
    Field f(g, 1);
    for (int k = 0; k < g.nodes(); ++k) f.at(k)[0] = std::asinh(p.at(k)[1]);
    const gauge::GaugeState st = G.state(j);
    double err = 0;
    for (int y = 0; y < g.n; ++y)
      for (int x = 0; x < g.n; ++x) {
        const double c = f.at(g.index(x, y))[0];
        const double expect =
            (std::sinh(f.at(g.index(x + 1, y))[0] - c) - std::sinh(f.at(g.index(x - 1, y))[0] - c)) / (2 * g.h());
        err = std::max(err, std::abs(st.psi_x[0].at(g.index(x, y))[0] - expect));
      }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("caloric condition, orthonormality and the structure equations") {
  std::vector<double> hs, tor, cur, ps;
  std::vector<gauge::EvolutionResidual> evo;
  for (int n : {32, 64, 128}) {
    const Grid2D g(n, 4.0);
    const MapField phi = synth::generic_bump(g, 2, 1.0, 1.5);
    const TangentField v = synth::generic_velocity(phi, 0.5, 1.5);
    const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), truncated(0.3), &v);
    CHECK(G.max_as_residual() < 1e-6);
    CHECK(G.max_frame_drift() < 1e-10);
    for (std::size_t j = 0; j < G.rungs(); ++j) {
      CHECK(G.frame(j).orthonormality_defect() < 1e-10);
      const gauge::GaugeState st = G.state(j);
      double asym = 0;
      for (const Field* A : {&st.A_x[0], &st.A_x[1], &*st.A_t})
        for (int k = 0; k < g.nodes(); ++k) asym = std::max(asym, std::abs(A->at(k)[1] + A->at(k)[2]));
      CHECK(asym < 1e-12);
    }
    const std::size_t last = G.rungs() - 1;
    const auto sr = gauge::structure_residual(G.state(last));
    hs.push_back(g.h());
    tor.push_back(sr.torsion);
    cur.push_back(sr.curvature);
    ps.push_back(sr.ps_frame);
    evo.push_back(gauge::evolution_residual(G, last));
  }
  CHECK(grid::loglog_slope(hs, tor) >= 1.9);
  CHECK(grid::loglog_slope(hs, cur) >= 1.5);
  CHECK(grid::loglog_slope(hs, ps) >= 1.5);
  // Heat-time evolution identities at fixed s converge under refinement.
  for (std::size_t i = 0; i + 1 < evo.size(); ++i) {
    CHECK(evo[i + 1].psi_evolve < evo[i].psi_evolve / 2.5);
    CHECK(evo[i + 1].sax < evo[i].sax / 2.5);
    CHECK(evo[i + 1].psix_heat < evo[i].psix_heat / 2.5);
    CHECK(evo[i + 1].psis_heat < evo[i].psis_heat / 2.5);
    CHECK(evo[i + 1].dst < evo[i].dst / 2.5);
  }
  CHECK(evo.back().psi_evolve < 2e-3 * evo.back().psi_evolve_scale);
  CHECK(evo.back().dst < 1e-2 * evo.back().dst_scale);
}

TEST_CASE("comparison principle for psi_s") {
  const Grid2D g(64, 4.0);
  const MapField phi = synth::generic_bump(g, 2, 1.0, 1.5);
  const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), truncated(1.0, false));
  const auto rep = gauge::psis_comparison(G);
  CHECK(rep.scheme_violation < 1e-6);
  for (std::size_t j = 0; j < G.rungs(); ++j)
    if (G.trace().rungs[j].centre.s >= 0.2) CHECK(rep.violation_per_rung[j] == 0.0);
}

TEST_CASE("gauge covariance under a constant rotation") {
  const Grid2D g(32, 4.0);
  const MapField phi = synth::generic_bump(g, 2, 1.0, 1.5);
  const TangentField v = synth::generic_velocity(phi, 0.5, 1.5);
  GaugeConfig cfg;
  cfg.flow.s_max = 64;
  const double angle = 0.7;
  const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), cfg, &v);
  const CaloricGauge R = gauge::build_caloric_gauge(phi, rotate(OrthoFrame::standard(2), angle), cfg, &v);
  const double c = std::cos(angle), s = std::sin(angle);
  // psi' = R^T psi, A' = R^T A R with R = [[c, -s], [s, c]].
  auto rot_vec = [&](const Field& f) {
    Field out(f.grid(), 2);
    for (int k = 0; k < f.nodes(); ++k) {
      out.at(k)[0] = c * f.at(k)[0] + s * f.at(k)[1];
      out.at(k)[1] = -s * f.at(k)[0] + c * f.at(k)[1];
    }
    return out;
  };
  auto rot_mat = [&](const Field& f) {
    // For m = 2 an antisymmetric matrix commutes with rotations.
    return f;
  };
  double worst = 0;
  for (std::size_t j = 0; j < G.rungs(); j += 3) {
    const gauge::GaugeState a = G.state(j), b = R.state(j);
    for (int i = 0; i < 2; ++i) {
      worst = std::max(worst, max_abs(rot_vec(a.psi_x[i]) - b.psi_x[i]));
      worst = std::max(worst, max_abs(rot_mat(a.A_x[i]) - b.A_x[i]));
    }
    worst = std::max(worst, max_abs(rot_vec(a.psi_s) - b.psi_s));
    worst = std::max(worst, max_abs(rot_vec(*a.psi_t) - *b.psi_t));
    worst = std::max(worst, max_abs(rot_mat(*a.A_t) - *b.A_t));
  }
  CHECK(worst < 1e-10);

  // m = 3, where conjugation is visible.
  const MapField phi3 = synth::generic_bump(g, 3, 1.0, 1.5);
  const double R3[9] = {0.36, 0.48, -0.8, -0.8, 0.6, 0.0, 0.48, 0.64, 0.6};
  const CaloricGauge G3 = gauge::build_caloric_gauge(phi3, OrthoFrame::standard(3), cfg);
  const CaloricGauge H3 =
      gauge::build_caloric_gauge(phi3, OrthoFrame::standard(3).rotated(std::span<const double>(R3, 9)), cfg);
  double worst3 = 0;
  for (std::size_t j = 0; j < G3.rungs(); j += 5) {
    const gauge::GaugeState a = G3.state(j), b = H3.state(j);
    for (int k = 0; k < g.nodes(); ++k)
      for (int i = 0; i < 2; ++i) {
        for (int q = 0; q < 3; ++q) {
          double expect = 0;
          for (int p = 0; p < 3; ++p) expect += R3[p * 3 + q] * a.psi_x[i].at(k)[p];
          worst3 = std::max(worst3, std::abs(expect - b.psi_x[i].at(k)[q]));
        }
        for (int q = 0; q < 3; ++q)
          for (int r = 0; r < 3; ++r) {
            double expect = 0;
            for (int p = 0; p < 3; ++p)
              for (int t = 0; t < 3; ++t) expect += R3[p * 3 + q] * a.A_x[i].at(k)[p * 3 + t] * R3[t * 3 + r];
            worst3 = std::max(worst3, std::abs(expect - b.A_x[i].at(k)[q * 3 + r]));
          }
      }
  }
  CHECK(worst3 < 1e-10);
}

TEST_CASE("frames at the end of the flow match e_inf, and A_t against frame differences") {
  const Grid2D g(32, 4.0);
  const MapField phi = synth::generic_bump(g, 2, 1.0, 1.5);
  const TangentField v = synth::generic_velocity(phi, 0.5, 1.5);
  GaugeConfig cfg;
  cfg.flow.s_max = 64;
  const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), cfg, &v);
  REQUIRE(G.trace().tail_met);
  CHECK(G.tail_defect() < cfg.frame_tail_tol);
  // The aligned final frame, transported to the base of e_inf, is e_inf; across x it varies with the tail spread.
  const gauge::FrameField& last = G.frame(G.rungs() - 1);
  const MapField& phi_end = G.trace().rungs.back().centre.phi;
  double dev = 0, spread = 0;
  for (int k = 0; k < g.nodes(); ++k)
    for (int a = 0; a < 2; ++a) {
      double col[3];
      std::copy(last.col(k, a), last.col(k, a) + 3, col);
      kern::transport(phi_end.at(k), G.e_inf().base().vec().data(), col, 3);
      for (int i = 0; i < 3; ++i) {
        dev = std::max(dev, std::abs(col[i] - G.e_inf().col(a)[i]));
        spread = std::max(spread, std::abs(last.col(k, a)[i] - last.col(0, a)[i]));
      }
    }
  CHECK(dev < 1e-12);
  CHECK(spread < 10 * G.tail_defect());
  CHECK(max_abs(*G.state(G.rungs() - 1).A_t) == 0.0);

  // A_t = <d_t e_b, e_a> by centered differences of gauges built from exp(+-dt phi1).
  const double dt = 1e-3;
  const CaloricGauge P = gauge::build_caloric_gauge(shifted(phi, v, dt), OrthoFrame::standard(2), cfg);
  const CaloricGauge M = gauge::build_caloric_gauge(shifted(phi, v, -dt), OrthoFrame::standard(2), cfg);
  REQUIRE(P.rungs() == G.rungs());
  REQUIRE(M.rungs() == G.rungs());
  double err = 0, scale = 0;
  const Field at = *G.state(0).A_t;
  for (int k = 0; k < g.nodes(); ++k)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double dv[3];
        for (int i = 0; i < 3; ++i) dv[i] = (P.frame(0).col(k, b)[i] - M.frame(0).col(k, b)[i]) / (2 * dt);
        const double fd = kern::mink(dv, G.frame(0).col(k, a), 3);
        err = std::max(err, std::abs(fd - at.at(k)[a * 2 + b]));
        scale = std::max(scale, std::abs(fd));
      }
  CHECK(scale > 0.1);
  CHECK(err < 0.05 * scale);

  const auto scan = gauge::connection_bound_scan(G);
  CHECK(std::isfinite(scan.sup_sqrt_s_Ainf));
  CHECK(scan.sup_sqrt_s_Ainf > 0);
  CHECK(scan.reconstruction_gap < 0.25 * scan.reconstruction_scale);
}

TEST_CASE("energy identities") {
  const Grid2D g(64, 4.0);
  const MapField phi = synth::generic_bump(g, 2, 1.0, 1.5);
  const TangentField v = synth::generic_velocity(phi, 0.5, 1.5);
  GaugeConfig cfg;
  cfg.flow.s_max = 64;
  cfg.flow.ladder.s_min = cfg.flow.ds(g);
  cfg.flow.ladder.ratio = std::pow(2.0, 0.125);
  cfg.probe_fraction = 0;
  const CaloricGauge G = gauge::build_caloric_gauge(phi, OrthoFrame::standard(2), cfg, &v);
  const std::vector<double> s = G.trace().s_values();
  const std::vector<double> w = grid::ladder_weights(s);
  double dissipated = 0;
  for (std::size_t j = 0; j < s.size(); ++j) dissipated += w[j] * std::pow(l2(G.state(j).psi_s), 2);
  const gauge::GaugeState st0 = G.state(0);
  const double kinetic = 0.5 * std::pow(l2(*st0.psi_t), 2);
  const double dirichlet = heat::dirichlet_energy(phi);
  double vv = 0;
  for (int k = 0; k < g.nodes(); ++k) vv += kern::mink(v.at(k), v.at(k), 3);
  const double energy = dirichlet + 0.5 * vv * g.h() * g.h();
  CHECK(kinetic == doctest::Approx(0.5 * vv * g.h() * g.h()).epsilon(1e-12));
  CHECK(std::abs(dissipated + kinetic - energy) < 0.02 * energy);
  // |psi_x(0)|^2 against twice the edge-form Dirichlet energy: second order in h.
  const double half_psix = 0.5 * (std::pow(l2(st0.psi_x[0]), 2) + std::pow(l2(st0.psi_x[1]), 2));
  CHECK(std::abs(half_psix - dirichlet) < 0.05 * dirichlet);
}

TEST_CASE("covariant heat equation") {
  const Grid2D g(32, 4.0);
  Field u0(g, 2);
  for (int k = 0; k < g.nodes(); ++k) {
    const double x = g.x1(k % g.n), y = g.x2(k / g.n);
    u0.at(k)[0] = std::exp(-(x * x + y * y));
    u0.at(k)[1] = std::sin(std::numbers::pi * x / 4);
  }
  SUBCASE("zero data stays zero") {
    const CaloricGauge G =
        gauge::build_caloric_gauge(synth::generic_bump(g, 2, 1.0, 1.5), OrthoFrame::standard(2), truncated(0.5));
    for (const Field& u : gauge::covariant_heat_solve(G, Field(g, 2)).u) CHECK(max_abs(u) == 0.0);
    CHECK_THROWS_AS(gauge::covariant_heat_solve(G, Field(g, 3)), gauge::GaugeError);
  }
  SUBCASE("constant background is the scalar heat equation") {
    const MapField c = MapField::constant(g, HPoint::basepoint(2));
    std::vector<double> errs;
    for (double factor : {0.125, 0.0625}) {
      GaugeConfig cfg = truncated(0.5, false);
      cfg.flow.ds_factor = factor;
      const CaloricGauge G = gauge::build_caloric_gauge(c, OrthoFrame::standard(2), cfg);
      const auto res = gauge::covariant_heat_solve(G, u0);
      const Field exact = grid::heat_propagate(u0, G.trace().s_final(), grid::HeatSymbol::FivePoint);
      errs.push_back(max_abs(res.u.back() - exact));
    }
    CHECK(errs[0] < 1e-2);
    CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.1));
  }
  SUBCASE("generic background: energy inequality and pointwise comparison") {
    const CaloricGauge G =
        gauge::build_caloric_gauge(synth::generic_bump(g, 2, 1.0, 1.5), OrthoFrame::standard(2), truncated(1.0, false));
    const auto res = gauge::covariant_heat_solve(G, u0);
    REQUIRE(res.u.size() == G.rungs());
    CHECK(res.max_energy_increase <= 1e-10);
    CHECK(res.scheme_violation <= 1e-10);
    for (std::size_t j = 0; j < G.rungs(); ++j)
      CHECK(res.continuum_violation_per_rung[j] < 1e-6 + 0.1 * g.h() * g.h());
  }
}
