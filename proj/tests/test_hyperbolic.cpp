/// @file test_hyperbolic.cpp
/// @brief Oracle and property tests for the hyperboloid geometry kernels.
#include <doctest.h>

#include "caloricflow/hyperbolic.hpp"

#include <cmath>
#include <random>

using namespace caloricflow;

namespace {

AmbientVec random_tangent(std::mt19937_64& rng, const HPoint& p, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AmbientVec a(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) a[i] = scale * u(rng);
  return tangent_project(p, a).vec();
}

HPoint random_point(std::mt19937_64& rng, int m, double radius) {
  const HPoint o = HPoint::basepoint(m);
  return exp_map(TangentVec(o, random_tangent(rng, o, radius)));
}

double max_abs_diff(const AmbientVec& a, const AmbientVec& b) {
  double w = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) w = std::max(w, std::abs(a[i] - b[i]));
  return w;
}

}  // namespace

TEST_CASE("Minkowski form oracles") {
  CHECK(mink_form({1, 0, 0}, {1, 0, 0}) == -1.0);
  CHECK(mink_form({std::cosh(1.0), std::sinh(1.0), 0}, {1, 0, 0}) == doctest::Approx(-1.5430806348152437));
  CHECK(mink_form({0, 1, 0}, {0, 0, 1}) == 0.0);
  CHECK_THROWS_AS(mink_form({1, 0}, {1, 0, 0}), GeometryError);
}

TEST_CASE("projection onto the hyperboloid") {
  CHECK(max_abs_diff(project_hyperboloid({2, 0, 0}).vec(), {1, 0, 0}) < 1e-15);
  const AmbientVec p{std::cosh(1.0), std::sinh(1.0), 0};
  CHECK(max_abs_diff(project_hyperboloid(p).vec(), p) < 1e-15);
  // 1.1 / sqrt(1.08), 0.3 / sqrt(1.08), 0.2 / sqrt(1.08)
  const HPoint q = project_hyperboloid({1.1, 0.3, 0.2});
  CHECK(q[0] == doctest::Approx(1.0584754935143141).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(0.2886751345948129).epsilon(1e-14));
  CHECK(q[2] == doctest::Approx(0.1924500897298753).epsilon(1e-14));
  CHECK(mink_form(q.vec(), q.vec()) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS(project_hyperboloid({0.1, 1.0, 0.0}), GeometryError);
  CHECK_THROWS_AS(project_hyperboloid({-2.0, 0.0, 0.0}), GeometryError);
}

TEST_CASE("tangent projection") {
  const HPoint o = HPoint::basepoint(2);
  CHECK(max_abs_diff(tangent_project(o, {5, 0, 0}).vec(), {0, 0, 0}) == 0.0);
  CHECK(max_abs_diff(tangent_project(o, {0, 1, 2}).vec(), {0, 1, 2}) == 0.0);
  const HPoint p(AmbientVec{std::cosh(1.0), std::sinh(1.0), 0});
  const TangentVec t = tangent_project(p, {1, 0, 0});
  CHECK(max_abs_diff(t.vec(), AmbientVec{1, 0, 0} - std::cosh(1.0) * p.vec()) < 1e-15);
  CHECK(std::abs(mink_form(t.vec(), p.vec())) < 1e-15);
}

TEST_CASE("exponential, logarithm and distance") {
  const HPoint o = HPoint::basepoint(2);
  const HPoint q = exp_map(TangentVec(o, {0, 1, 0}));
  CHECK(max_abs_diff(q.vec(), {std::cosh(1.0), std::sinh(1.0), 0}) < 1e-15);
  for (double r : {0.1, 1.0, 5.0}) {
    const HPoint p = exp_map(TangentVec(o, {0, r * 0.6, r * 0.8}));
    CHECK(dist(o, p) == doctest::Approx(r).epsilon(1e-12));
  }
  CHECK(dist(o, o) == 0.0);
  // Small distances keep full relative accuracy.
  const HPoint near = exp_map(TangentVec(o, {0, 1e-9, 0}));
  CHECK(dist(o, near) == doctest::Approx(1e-9).epsilon(1e-6));
}

TEST_CASE("exp/log round trip property") {
  std::mt19937_64 rng(11);
  for (int m : {1, 2, 3}) {
    for (int trial = 0; trial < 200; ++trial) {
      const HPoint p = random_point(rng, m, 2.0);
      AmbientVec v = random_tangent(rng, p, 1.0);
      std::uniform_real_distribution<double> len(0.0, 5.0);
      const double n = std::sqrt(mink_form(v, v));
      const double r = len(rng);
      v *= r / n;
      const TangentVec back = log_map(p, exp_map(TangentVec(p, v, 1e-10)));
      CHECK(max_abs_diff(back.vec(), v) < 1e-12 * p[0] * p[0] * std::max(1.0, r));
    }
  }
  // From the basepoint: random |v| <= 5, then |v| up to 10.
  const HPoint o = HPoint::basepoint(2);
  for (int trial = 0; trial < 500; ++trial) {
    AmbientVec v = random_tangent(rng, o, 1.0);
    std::uniform_real_distribution<double> len(0.0, 5.0);
    v *= len(rng) / std::sqrt(mink_form(v, v));
    CHECK(max_abs_diff(log_map(o, exp_map(TangentVec(o, v))).vec(), v) < 1e-12);
  }
  for (double r : {7.5, 10.0}) {
    const AmbientVec v{0, r * 0.28, r * 0.96};
    CHECK(max_abs_diff(log_map(o, exp_map(TangentVec(o, v))).vec(), v) < 1e-12 * r);
  }
}

TEST_CASE("constraint invariants on returned points") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const HPoint p = random_point(rng, 3, 3.0);
    CHECK(std::abs(mink_form(p.vec(), p.vec()) + 1.0) < 1e-12 * p[0] * p[0]);
    CHECK(p[0] >= 1.0);
    const AmbientVec a = random_tangent(rng, p, 1.0) + 0.7 * p.vec();
    const TangentVec once = tangent_project(p, a);
    const TangentVec twice = tangent_project(p, once.vec());
    CHECK(max_abs_diff(once.vec(), twice.vec()) < 1e-14 * std::pow(std::max(1.0, p[0]), 3));
    // Self-adjointness: <P a, b> = <a, P b>.
    const AmbientVec b = random_tangent(rng, p, 1.0) - 0.3 * p.vec();
    CHECK(mink_form(tangent_project(p, a).vec(), b) ==
          doctest::Approx(mink_form(a, tangent_project(p, b).vec())).epsilon(1e-12));
  }
}

TEST_CASE("wedge operator") {
  const HPoint o = HPoint::basepoint(3);
  const TangentVec X(o, {0, 1, 0, 0}), Y(o, {0, 0, 1, 0});
  CHECK(max_abs_diff(wedge_apply(X, X, Y).vec(), {0, 0, 0, 0}) == 0.0);
  CHECK(max_abs_diff(wedge_apply(X, Y, Y).vec(), X.vec()) == 0.0);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const HPoint p = random_point(rng, 3, 1.5);
    const TangentVec a(p, random_tangent(rng, p, 1.0), 1e-10), b(p, random_tangent(rng, p, 1.0), 1e-10),
        c(p, random_tangent(rng, p, 1.0), 1e-10);
    const AmbientVec w = wedge_apply(a, b, c).vec();
    // Componentwise re-evaluation of X<Y,Z> - Y<X,Z>.
    const double yz = -b[0] * c[0] + b[1] * c[1] + b[2] * c[2] + b[3] * c[3];
    const double xz = -a[0] * c[0] + a[1] * c[1] + a[2] * c[2] + a[3] * c[3];
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(w[i] - (a[i] * yz - b[i] * xz)) < 1e-14 * p[0] * p[0] * 4);
    // Antisymmetry and positivity ((v^w)w).v >= 0.
    CHECK(max_abs_diff(wedge_apply(a, b, c).vec(), -1.0 * wedge_apply(b, a, c).vec()) < 1e-13 * p[0] * p[0]);
    CHECK(mink_form(wedge_apply(a, b, b).vec(), a.vec()) >= -1e-12);
  }
  const HPoint q = exp_map(TangentVec(o, {0, 0.5, 0, 0}));
  CHECK_THROWS_AS(wedge_apply(X, TangentVec(q, tangent_project(q, {0, 0, 1, 0}).vec()), Y), GeometryError);
}

TEST_CASE("parallel transport") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const HPoint p = random_point(rng, 2, 2.0), q = random_point(rng, 2, 2.0);
    const TangentVec v(p, random_tangent(rng, p, 1.0), 1e-10), w(p, random_tangent(rng, p, 1.0), 1e-10);
    CHECK(max_abs_diff(parallel_transport(p, p, v).vec(), v.vec()) < 1e-14 * p[0] * p[0]);
    const TangentVec pv = parallel_transport(p, q, v), pw = parallel_transport(p, q, w);
    CHECK(std::abs(mink_form(pv.vec(), q.vec())) < 1e-11 * q[0] * q[0]);
    CHECK(mink_form(pv.vec(), pw.vec()) == doctest::Approx(mink_form(v.vec(), w.vec())).epsilon(1e-11));
    CHECK(tangent_norm(pv) == doctest::Approx(tangent_norm(v)).epsilon(1e-12));
    const TangentVec back = parallel_transport(q, p, pv);
    CHECK(max_abs_diff(back.vec(), v.vec()) < 1e-12 * p[0] * q[0] * 10);
  }
  // The geodesic tangent is transported to the geodesic tangent.
  const HPoint o = HPoint::basepoint(2);
  const HPoint q = exp_map(TangentVec(o, {0, 2.0, 0}));
  const TangentVec t = parallel_transport(o, q, TangentVec(o, {0, 1, 0}));
  CHECK(max_abs_diff(t.vec(), {std::sinh(2.0), std::cosh(2.0), 0}) < 1e-14);
}

TEST_CASE("orthonormal frames") {
  const OrthoFrame f = OrthoFrame::standard(3);
  CHECK(f.m() == 3);
  CHECK_THROWS_AS(OrthoFrame(HPoint::basepoint(2), {AmbientVec{0, 0, 1}, AmbientVec{0, 1, 0}}), GeometryError);
  const double c = std::cos(0.4), s = std::sin(0.4);
  const OrthoFrame r = OrthoFrame::standard(2).rotated(std::vector<double>{c, -s, s, c});
  CHECK(r.col(0)[1] == doctest::Approx(c));
  CHECK(r.col(0)[2] == doctest::Approx(s));
  const HPoint q = exp_map(TangentVec(HPoint::basepoint(2), {0, 0.3, -1.2}));
  const OrthoFrame moved = transport_frame(r, q);
  CHECK(moved.base()[0] == doctest::Approx(q[0]));
}
