#include "caloricflow/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace caloricflow::synth {

double bump(double r, double R) {
  const double q = r / R;
  if (q >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - q * q));
}

Field sample_scalar(const Grid2D& g, const std::function<double(double, double)>& fn) {
  Field f(g, 1);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) f.at(g.index(i, j))[0] = fn(g.x1(i), g.x2(j));
  return f;
}

MapField exp_field(const Field& f, std::optional<double> support) {
  const int m = f.components();
  const int d = m + 1;
  const Grid2D& g = f.grid();
  Field values(g, d);
  std::vector<double> o(static_cast<std::size_t>(d), 0.0), v(static_cast<std::size_t>(d), 0.0);
  o[0] = 1.0;
  for (int k = 0; k < g.nodes(); ++k) {
    double r2 = 0;
    for (int a = 0; a < m; ++a) {
      v[static_cast<std::size_t>(a + 1)] = f.at(k)[a];
      r2 += f.at(k)[a] * f.at(k)[a];
    }
    if (std::sqrt(r2) > kMaxSyntheticDistance) {
      std::ostringstream os;
      os << "synthetic data reaches distance " << std::sqrt(r2) << " from the basepoint (limit " << kMaxSyntheticDistance
         << ")";
      throw GeometryError(os.str());
    }
    kern::exp_map(o.data(), v.data(), values.at(k), d);
  }
  AmbientVec origin(static_cast<std::size_t>(d));
  origin[0] = 1.0;
  return MapField(std::move(values), support ? std::optional<AmbientVec>(origin) : std::nullopt, support);
}

MapField geodesic_map(const Field& f, int m, int axis, std::optional<double> support) {
  if (axis < 1 || axis > m) throw GeometryError("geodesic axis out of range");
  Field lifted(f.grid(), m);
  for (int k = 0; k < f.nodes(); ++k) lifted.at(k)[axis - 1] = f.at(k)[0];
  return exp_field(lifted, support);
}

MapField gaussian_geodesic(const Grid2D& g, int m, double amplitude, double sigma) {
  const Field f = sample_scalar(g, [&](double x, double y) { return amplitude * std::exp(-(x * x + y * y) / (2 * sigma * sigma)); });
  return geodesic_map(f, m, 1);
}

MapField bump_geodesic(const Grid2D& g, int m, double amplitude, double R) {
  const Field f = sample_scalar(g, [&](double x, double y) { return amplitude * bump(std::hypot(x, y), R); });
  return geodesic_map(f, m, 1, R);
}

namespace {
constexpr double kOffset1[2] = {-0.3, -0.1};
constexpr double kOffset2[2] = {0.3, 0.25};
}  // namespace

MapField generic_bump(const Grid2D& g, int m, double amplitude, double R) {
  Field f(g, m);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x1(i), y = g.x2(j);
      const double b1 = amplitude * bump(std::hypot(x - kOffset1[0], y - kOffset1[1]), R);
      const double b2 = 0.8 * amplitude * bump(std::hypot(x - kOffset2[0], y - kOffset2[1]), R);
      double* v = f.at(g.index(i, j));
      if (m == 1) {
        v[0] = b1 + b2;
      } else {
        v[0] = b1;
        v[1] = b2;
      }
    }
  const double reach = std::max(std::hypot(kOffset1[0], kOffset1[1]), std::hypot(kOffset2[0], kOffset2[1]));
  return exp_field(f, R + reach);
}

TangentField generic_velocity(const MapField& phi, double amplitude, double R) {
  const Grid2D& g = phi.grid();
  const int d = phi.dim();
  TangentField v(phi);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x1(i), y = g.x2(j);
      const double b = amplitude * bump(std::hypot(x - 0.1, y + 0.2), R);
      double* w = v.at(g.index(i, j));
      w[1] = b * (1.0 + 0.5 * x);
      if (d > 2) w[2] = b * (0.7 * y - 0.3);
      kern::tangent_project(phi.at(g.index(i, j)), w, d);
    }
  return v;
}

MapField generic_gaussian(const Grid2D& g, int m, double amplitude, double sigma) {
  Field f(g, m);
  const double w = 1.0 / (2 * sigma * sigma);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x1(i), y = g.x2(j);
      const auto sq = [](double a, double b) { return a * a + b * b; };
      const double b1 = amplitude * std::exp(-w * sq(x - kOffset1[0], y - kOffset1[1]));
      const double b2 = 0.8 * amplitude * std::exp(-w * sq(x - kOffset2[0], y - kOffset2[1]));
      double* v = f.at(g.index(i, j));
      if (m == 1) {
        v[0] = b1 + b2;
      } else {
        v[0] = b1;
        v[1] = b2;
      }
    }
  return exp_field(f);
}

TangentField gaussian_velocity(const MapField& phi, double amplitude, double sigma) {
  const Grid2D& g = phi.grid();
  const int d = phi.dim();
  TangentField v(phi);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x1(i), y = g.x2(j);
      const double b = amplitude * std::exp(-((x - 0.1) * (x - 0.1) + (y + 0.2) * (y + 0.2)) / (2 * sigma * sigma));
      double* w = v.at(g.index(i, j));
      w[1] = b * (1.0 + 0.5 * x);
      if (d > 2) w[2] = b * (0.7 * y - 0.3);
      kern::tangent_project(phi.at(g.index(i, j)), w, d);
    }
  return v;
}

Field random_band_limited(const Grid2D& g, int kmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dxi = std::numbers::pi / g.L;
  struct Mode {
    double k1, k2, a, b;
  };
  std::vector<Mode> modes;
  for (int k1 = 0; k1 <= kmax; ++k1)
    for (int k2 = -kmax; k2 <= kmax; ++k2) {
      if (k1 == 0 && k2 <= 0) continue;
      if (k1 * k1 + k2 * k2 > kmax * kmax) continue;
      modes.push_back({dxi * k1, dxi * k2, normal(rng), normal(rng)});
    }
  Field f = sample_scalar(g, [&](double x, double y) {
    double s = 0;
    for (const auto& md : modes) {
      const double ph = md.k1 * x + md.k2 * y;
      s += md.a * std::cos(ph) + md.b * std::sin(ph);
    }
    return s;
  });
  const double n2 = grid::lp_norm(f, 2);
  if (n2 > 0) f *= 1.0 / n2;
  return f;
}

ClassicalData make_data(const Grid2D& g, const Recipe& r) {
  if (r.m < 1) throw GeometryError("recipe needs m >= 1");
  MapField phi0;
  if (r.name == "constant") {
    phi0 = MapField::constant(g, HPoint::basepoint(r.m));
  } else if (r.name == "gaussian_geodesic") {
    phi0 = gaussian_geodesic(g, r.m, r.amplitude, r.sigma);
  } else if (r.name == "bump_geodesic") {
    phi0 = bump_geodesic(g, r.m, r.amplitude, r.radius);
  } else if (r.name == "generic_bump" || r.name == "generic_moving") {
    phi0 = generic_bump(g, r.m, r.amplitude, r.radius);
  } else if (r.name == "gaussian_moving") {
    phi0 = generic_gaussian(g, r.m, r.amplitude, r.sigma);
    if (r.velocity_amplitude != 0.0) {
      TangentField v = gaussian_velocity(phi0, r.velocity_amplitude, r.sigma);
      return ClassicalData(std::move(phi0), std::move(v));
    }
    return ClassicalData(std::move(phi0));
  } else {
    throw std::invalid_argument("unknown data recipe '" + r.name + "'");
  }
  if (r.velocity_amplitude != 0.0 && r.name != "constant") {
    TangentField v = generic_velocity(phi0, r.velocity_amplitude, r.radius);
    return ClassicalData(std::move(phi0), std::move(v));
  }
  return ClassicalData(std::move(phi0));
}

HPoint profile(double y1, double y2, int m, double amplitude) {
  const double b = amplitude * bump(std::hypot(y1, y2), 0.9);
  AmbientVec v(static_cast<std::size_t>(m + 1));
  if (m == 1) {
    v[1] = b * (0.6 + 0.5 * y1 + 0.4 * y2);
  } else {
    v[1] = b * (0.6 + 0.5 * y1);
    v[2] = b * 0.7 * y2;
  }
  return exp_map(TangentVec(HPoint::basepoint(m), std::move(v)));
}

namespace {

MapField sample_profile(const Grid2D& g, int m, const std::function<HPoint(double, double)>& P, double support) {
  Field values(g, m + 1);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const HPoint p = P(g.x1(i), g.x2(j));
      for (int c = 0; c <= m; ++c) values.at(g.index(i, j))[c] = p[static_cast<std::size_t>(c)];
    }
  AmbientVec origin(static_cast<std::size_t>(m + 1));
  origin[0] = 1.0;
  return MapField(std::move(values), origin, support);
}

ClassicalData sampled_motion(const Grid2D& g, int m, const std::function<HPoint(double, double, double)>& P, double t,
                             double dt, double support) {
  MapField now = sample_profile(g, m, [&](double x, double y) { return P(t, x, y); }, support);
  const MapField plus = sample_profile(g, m, [&](double x, double y) { return P(t + dt, x, y); }, support);
  const MapField minus = sample_profile(g, m, [&](double x, double y) { return P(t - dt, x, y); }, support);
  TangentField vel(now);
  for (int k = 0; k < g.nodes(); ++k) {
    for (int c = 0; c <= m; ++c) vel.at(k)[c] = (plus.at(k)[c] - minus.at(k)[c]) / (2 * dt);
    kern::tangent_project(now.at(k), vel.at(k), m + 1);
  }
  return ClassicalData(std::move(now), std::move(vel));
}

}  // namespace

ClassicalData self_similar_sample(const Grid2D& g, int m, double amplitude, double t, double dt) {
  if (t == 0 || std::abs(dt) >= std::abs(t)) throw GeometryError("self-similar sample needs |dt| < |t| and t != 0");
  const double support = 0.9 * (std::abs(t) + std::abs(dt));
  return sampled_motion(
      g, m, [&](double tt, double x, double y) { return profile(x / tt, y / tt, m, amplitude); }, t, dt, support);
}

ClassicalData travelling_sample(const Grid2D& g, int m, double amplitude, double scale, std::array<double, 2> v,
                                double t, double dt) {
  const double support = 0.9 * scale + std::hypot(v[0], v[1]) * (std::abs(t) + std::abs(dt));
  return sampled_motion(
      g, m,
      [&](double tt, double x, double y) {
        return profile((x - v[0] * tt) / scale, (y - v[1] * tt) / scale, m, amplitude);
      },
      t, dt, support);
}

}  // namespace caloricflow::synth
