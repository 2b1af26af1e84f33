#include "caloricflow/wave_map.hpp"

#include "caloricflow/heat_flow.hpp"
#include "caloricflow/hyperbolic.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace caloricflow::wave {

namespace {

using gauge::FrameField;
using heat::EventRole;

double dot(const double* a, const double* b, int c) {
  double s = 0;
  for (int i = 0; i < c; ++i) s += a[i] * b[i];
  return s;
}

double l1_norm(const Field& f) {
  const int c = f.components();
  double s = 0;
  for (int k = 0; k < f.nodes(); ++k) s += std::sqrt(dot(f.at(k), f.at(k), c));
  const double h = f.grid().h();
  return s * h * h;
}

double l2_norm(const Field& f) {
  const int c = f.components();
  double s = 0;
  for (int k = 0; k < f.nodes(); ++k) s += dot(f.at(k), f.at(k), c);
  const double h = f.grid().h();
  return std::sqrt(s) * h;
}

// A_t with (A_t)_ab = <d_t e_b, e_a>, d_t e by a centered difference, antisymmetrised.
Field frame_time_connection(const FrameField& em, const FrameField& ec, const FrameField& ep, double dt) {
  const int m = ec.m(), d = ec.dim();
  Field A(ec.grid(), m * m);
  std::vector<double> de(static_cast<std::size_t>(d));
  for (int k = 0; k < ec.nodes(); ++k) {
    double* o = A.at(k);
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < d; ++c) de[c] = (ep.col(k, b)[c] - em.col(k, b)[c]) / (2 * dt);
      for (int a = 0; a < m; ++a) o[a * m + b] = kern::mink(de.data(), ec.col(k, a), d);
    }
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) {
        const double x = 0.5 * (o[a * m + b] - o[b * m + a]);
        o[a * m + b] = x;
        o[b * m + a] = -x;
      }
  }
  return A;
}

// Fields at one rung and role for the three wave times.
struct Triple {
  gauge::GaugeState minus, centre, plus;
  Field A_t;
};

Triple triple(const DynamicGauge& g, std::size_t rung, EventRole role) {
  for (const gauge::CaloricGauge* c : {&g.minus, &g.plus})
    if (c->rungs() <= rung) throw WaveError("rung beyond the shortest of the three heat extensions");
  if (g.centre.rungs() <= rung) throw WaveError("rung beyond the heat extension");
  Triple t{g.minus.state(rung, role), g.centre.state(rung, role), g.plus.state(rung, role), {}};
  if (std::abs(t.minus.s - t.centre.s) > 1e-12 * (1 + t.centre.s) ||
      std::abs(t.plus.s - t.centre.s) > 1e-12 * (1 + t.centre.s))
    throw WaveError("heat extensions at adjacent wave times are on different ladders");
  if (!t.minus.psi_t || !t.centre.psi_t || !t.plus.psi_t) throw WaveError("heat extension does not track phi_t");
  t.A_t = frame_time_connection(g.minus.frame(rung, role), g.centre.frame(rung, role), g.plus.frame(rung, role), g.dt);
  return t;
}

Field time_diff(const Field& minus, const Field& plus, double dt) {
  Field out = plus - minus;
  out *= 1.0 / (2 * dt);
  return out;
}

Field tension_field(const Triple& t, double dt) {
  Field dtpsi = time_diff(*t.minus.psi_t, *t.plus.psi_t, dt);
  dtpsi += gauge::apply(t.A_t, *t.centre.psi_t);
  Field w = t.centre.psi_s - dtpsi;
  return w;
}

double radius_at(const Grid2D& g, int k) {
  return std::hypot(g.x1(k % g.n), g.x2(k / g.n));
}

double bilinear(const Field& f, double x, double y) {
  const Grid2D& g = f.grid();
  const double u = (x + g.L) / g.h(), v = (y + g.L) / g.h();
  const int i = static_cast<int>(std::floor(u)), j = static_cast<int>(std::floor(v));
  const double a = u - i, b = v - j;
  return (1 - a) * (1 - b) * f(g.index(i, j), 0) + a * (1 - b) * f(g.index(i + 1, j), 0) +
         (1 - a) * b * f(g.index(i, j + 1), 0) + a * b * f(g.index(i + 1, j + 1), 0);
}

}  // namespace

WaveState::WaveState(double t0, MapField p, TangentField v) : t(t0), phi(std::move(p)), phi_t(std::move(v)) {
  phi.require_compatible(phi_t);
  if (phi_t.tangency_violation(phi) > 1e-10) throw WaveError("wave velocity is not tangent to the map");
}

void WaveConfig::validate() const {
  if (!(dt_factor > 0 && dt_factor <= 0.5)) throw WaveError("dt_factor must lie in (0, 1/2]");
  if (!(drift_budget > 0)) throw WaveError("drift_budget must be positive");
  if (record_every < 1) throw WaveError("record_every must be at least 1");
}

WaveState wave_step(const WaveState& state, double dt) {
  const Grid2D& g = state.grid();
  if (!(dt > 0) || dt > 0.5 * g.h() * (1 + 1e-12)) throw WaveError("time step violates dt <= h/2");
  const int d = state.phi.dim();
  const Field lap0 = grid::laplacian(state.phi);

  Field q1 = state.phi;
  Field half(g, d);
  for (int k = 0; k < g.nodes(); ++k) {
    const double* q = state.phi.at(k);
    const double* p = state.phi_t.at(k);
    const double* a = lap0.at(k);
    double* qn = q1.at(k);
    for (int c = 0; c < d; ++c) qn[c] = q[c] + dt * (p[c] + 0.5 * dt * a[c]);
    // Multiplier along q restoring <q1, q1> = -1, taking the small root.
    const double b = kern::mink(qn, q, d);
    const double delta = kern::mink(qn, qn, d) + 1.0;
    const double c0 = delta / (std::sqrt(b * b + delta) - b);
    for (int c = 0; c < d; ++c) qn[c] += c0 * q[c];
    kern::normalize_point(qn, d);
    double* ph = half.at(k);
    for (int c = 0; c < d; ++c) ph[c] = (qn[c] - q[c]) / dt;
  }
  MapField phi1(std::move(q1));
  const Field lap1 = grid::laplacian(phi1);
  Field v1 = half;
  for (int k = 0; k < g.nodes(); ++k) {
    double* v = v1.at(k);
    const double* a = lap1.at(k);
    for (int c = 0; c < d; ++c) v[c] += 0.5 * dt * a[c];
    kern::tangent_project(phi1.at(k), v, d);
  }
  return WaveState(state.t + dt, std::move(phi1), TangentField(std::move(v1)));
}

double wave_energy(const WaveState& s) { return energy::energy(s.data()); }

WaveTrace evolve(const WaveState& initial, double duration, const WaveConfig& cfg) {
  cfg.validate();
  if (!(duration >= 0)) throw WaveError("duration must be nonnegative");
  const Grid2D& g = initial.grid();
  const auto steps = static_cast<std::size_t>(std::ceil(duration / (cfg.dt_factor * g.h()) - 1e-9));
  const double dt = steps == 0 ? 0.0 : duration / static_cast<double>(steps);

  WaveTrace tr;
  tr.grid = g;
  tr.dt = dt * cfg.record_every;
  tr.states.push_back(initial);
  const double e0 = wave_energy(initial);
  tr.energy.push_back(e0);
  WaveState cur = initial;
  for (std::size_t n = 1; n <= steps; ++n) {
    cur = wave_step(cur, dt);
    const double e = wave_energy(cur);
    if (e0 > 0) {
      const double drift = std::abs(e - e0) / e0;
      tr.max_relative_drift = std::max(tr.max_relative_drift, drift);
      if (drift > 10 * cfg.drift_budget)
        throw WaveError("wave energy drift " + std::to_string(drift) + " exceeds ten times the budget");
    }
    if (n % static_cast<std::size_t>(cfg.record_every) == 0) {
      tr.states.push_back(cur);
      tr.energy.push_back(e);
    }
  }
  return tr;
}

double stress_divergence(const WaveTrace& trace, std::size_t k) {
  if (k == 0 || k + 1 >= trace.states.size()) throw WaveError("stress divergence needs an interior time index");
  const energy::SymField Tm = energy::stress(trace.states[k - 1].data());
  const energy::SymField T0 = energy::stress(trace.states[k].data());
  const energy::SymField Tp = energy::stress(trace.states[k + 1].data());
  const Grid2D& g = trace.grid;
  const double dt = trace.dt;
  std::array<Field, 3> divx;
  for (int b = 0; b < 3; ++b) {
    Field t1(g, 1), t2(g, 1);
    for (int k2 = 0; k2 < g.nodes(); ++k2) {
      t1(k2, 0) = T0.get(k2, 1, b);
      t2(k2, 0) = T0.get(k2, 2, b);
    }
    divx[b] = grid::diff(t1, 0) + grid::diff(t2, 1);
  }
  double total = 0;
  for (int node = 0; node < g.nodes(); ++node)
    for (int b = 0; b < 3; ++b) {
      const double dtT = (Tp.get(node, 0, b) - Tm.get(node, 0, b)) / (2 * dt);
      total += std::abs(-dtT + divx[b](node, 0));
    }
  return total * g.h() * g.h();
}

DynamicGauge build_dynamic_gauge(const WaveState& minus, const WaveState& centre, const WaveState& plus,
                                 const OrthoFrame& e_inf, const gauge::GaugeConfig& cfg) {
  const double dt = centre.t - minus.t;
  if (!(dt > 0) || std::abs((plus.t - centre.t) - dt) > 1e-9 * dt)
    throw WaveError("dynamic gauge needs three equally spaced wave times");
  return DynamicGauge{centre.t, dt, gauge::build_caloric_gauge(minus.phi, e_inf, cfg, &minus.phi_t),
                      gauge::build_caloric_gauge(centre.phi, e_inf, cfg, &centre.phi_t),
                      gauge::build_caloric_gauge(plus.phi, e_inf, cfg, &plus.phi_t)};
}

DynamicGauge build_dynamic_gauge(const WaveTrace& trace, std::size_t k, const OrthoFrame& e_inf,
                                 const gauge::GaugeConfig& cfg) {
  if (k == 0 || k + 1 >= trace.states.size()) throw WaveError("dynamic gauge needs an interior time index");
  return build_dynamic_gauge(trace.states[k - 1], trace.states[k], trace.states[k + 1], e_inf, cfg);
}

WaveTension wave_tension(const DynamicGauge& g, std::size_t rung, EventRole role) {
  const Triple t = triple(g, rung, role);
  WaveTension out;
  out.s = t.centre.s;
  out.w = tension_field(t, g.dt);
  out.l1 = l1_norm(out.w);
  out.A_t_scale = l2_norm(t.A_t);
  if (t.centre.A_t) out.quadrature_gap = l2_norm(t.A_t - *t.centre.A_t);
  out.A_t = t.A_t;
  return out;
}

TensionScan wave_tension_scan(const DynamicGauge& g) {
  TensionScan scan;
  const std::size_t n = std::min({g.minus.rungs(), g.centre.rungs(), g.plus.rungs()});
  for (std::size_t r = 0; r < n; ++r) {
    const WaveTension w = wave_tension(g, r);
    scan.s.push_back(w.s);
    scan.l1.push_back(w.l1);
    scan.sup_l1 = std::max(scan.sup_l1, w.l1);
  }
  return scan;
}

TensionEvolution wave_tension_evolution_residual(const DynamicGauge& g, std::size_t rung, double coefficient) {
  for (const gauge::CaloricGauge* c : {&g.minus, &g.centre, &g.plus})
    if (rung >= c->rungs() || !c->has_companions(rung))
      throw WaveError("wave-tension evolution needs an interior rung with companions");
  const Triple before = triple(g, rung, EventRole::Before);
  const Triple after = triple(g, rung, EventRole::After);
  const Triple mid = triple(g, rung, EventRole::Centre);

  Field dsw = tension_field(after, g.dt) - tension_field(before, g.dt);
  dsw *= 1.0 / (after.centre.s - before.centre.s);

  const Field w = tension_field(mid, g.dt);
  const gauge::GaugeState& c = mid.centre;
  Field r0 = dsw;
  Field B(w.grid(), w.components());
  for (int i = 0; i < 2; ++i) {
    const Field Dw = gauge::covariant_diff(w, c.A_x[i], i);
    r0 -= gauge::covariant_diff(Dw, c.A_x[i], i);
    r0 += gauge::wedge_apply(w, c.psi_x[i], c.psi_x[i]);
    Field dtpsi = time_diff(mid.minus.psi_x[i], mid.plus.psi_x[i], g.dt);
    dtpsi += gauge::apply(mid.A_t, c.psi_x[i]);
    B += gauge::wedge_apply(*c.psi_t, c.psi_x[i], dtpsi);
  }
  TensionEvolution out;
  out.s = c.s;
  out.scale = l1_norm(dsw);
  const int len = static_cast<int>(B.values().size());
  const double bb = dot(B.values().data(), B.values().data(), len);
  const double rr = dot(r0.values().data(), r0.values().data(), len);
  out.fitted_coefficient = bb > 1e-20 * std::max(1.0, rr) ? dot(r0.values().data(), B.values().data(), len) / bb
                                                          : std::numeric_limits<double>::quiet_NaN();
  Field res = r0;
  res -= coefficient * B;
  out.residual = l1_norm(res);
  return out;
}

double travelling_diag(const WaveState& s, std::array<double, 2> v) {
  const auto grads = heat::covariant_gradient(s.phi);
  const int d = s.phi.dim();
  const Grid2D& g = s.grid();
  double total = 0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (int k = 0; k < g.nodes(); ++k) {
    for (int c = 0; c < d; ++c) x[c] = s.phi_t(k, c) + v[0] * grads[0](k, c) + v[1] * grads[1](k, c);
    total += kern::mink(x.data(), x.data(), d);
  }
  return std::sqrt(std::max(0.0, total)) * g.h();
}

double selfsim_diag(const WaveState& s, double radius) {
  const auto grads = heat::covariant_gradient(s.phi);
  const int d = s.phi.dim();
  const Grid2D& g = s.grid();
  double total = 0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double x1 = g.x1(i), x2 = g.x2(j);
      if (std::hypot(x1, x2) > radius) continue;
      const int k = g.index(i, j);
      for (int c = 0; c < d; ++c) x[c] = s.t * s.phi_t(k, c) + x1 * grads[0](k, c) + x2 * grads[1](k, c);
      total += kern::mink(x.data(), x.data(), d);
    }
  return std::sqrt(std::max(0.0, total)) * g.h();
}

double selfsim_diag(const gauge::CaloricGauge& gg, double t, std::size_t rung, double radius) {
  const gauge::GaugeState st = gg.state(rung);
  if (!st.psi_t) throw WaveError("self-similar diagnostic needs a heat extension tracking phi_t");
  const Grid2D& g = st.psi_s.grid();
  const int m = st.psi_s.components();
  double total = 0;
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double x1 = g.x1(i), x2 = g.x2(j);
      if (std::hypot(x1, x2) > radius) continue;
      const int k = g.index(i, j);
      for (int a = 0; a < m; ++a) {
        const double v = t * (*st.psi_t)(k, a) + x1 * st.psi_x[0](k, a) + x2 * st.psi_x[1](k, a) +
                         2 * st.s * st.psi_s(k, a);
        total += v * v;
      }
    }
  return std::sqrt(total) * g.h();
}

HopfQuantities hopf_quantities(const WaveState& s) {
  if (!(s.t < 0)) throw WaveError("Hopf quantities need t < 0");
  const Grid2D& g = s.grid();
  const double t = s.t, T = std::abs(t);
  if (T > g.L - g.h()) throw WaveError("light cone |x| < |t| exceeds the grid");
  const auto grads = heat::covariant_gradient(s.phi);
  const energy::SymField St = energy::stress(s.data());
  const int d = s.phi.dim();
  HopfQuantities out;
  out.G = Field(g, 1);
  std::vector<double> xr(static_cast<std::size_t>(d)), xt(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
  const double area = g.h() * g.h();
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const int k = g.index(i, j);
      const double x1 = g.x1(i), x2 = g.x2(j), r2 = x1 * x1 + x2 * x2;
      for (int c = 0; c < d; ++c) {
        xr[c] = x1 * grads[0](k, c) + x2 * grads[1](k, c);
        xt[c] = x1 * grads[1](k, c) - x2 * grads[0](k, c);
        y[c] = t * s.phi_t(k, c) + xr[c];
      }
      const double lhs = x1 * St.get(k, 0, 1) + x2 * St.get(k, 0, 2) + t * (St.get(k, 1, 1) + St.get(k, 2, 2));
      out.identity_residual += std::abs(lhs - kern::mink(s.phi_t.at(k), y.data(), d)) * area;
      if (r2 >= T * T) continue;
      const double G = (T * T - r2) / (T * T) * kern::mink(xr.data(), xr.data(), d) - kern::mink(xt.data(), xt.data(), d);
      out.G(k, 0) = G;
      const double ss = r2 * St.get(k, 0, 0) + t * (x1 * St.get(k, 0, 1) + x2 * St.get(k, 0, 2)) + 0.5 * G;
      out.selfsim_residual += std::abs(ss) * area;
      out.selfsim_scale += 0.5 * std::abs(G) * area;
    }
  for (int kr = 1; kr * g.h() < T; ++kr) {
    const double r = kr * g.h();
    const int samples = 8 * kr;
    double sum = 0;
    for (int q = 0; q < samples; ++q) {
      const double th = 2 * std::numbers::pi * q / samples;
      sum += bilinear(out.G, r * std::cos(th), r * std::sin(th));
    }
    out.radii.push_back(r);
    out.F.push_back(sum * 2 * std::numbers::pi / samples);
  }
  return out;
}

ShellIntegral angular_energy_shell(const WaveTrace& trace, double eps) {
  const Grid2D& g = trace.grid;
  if (eps < 2 * g.h()) throw WaveError("angular shell is empty at this resolution (eps < 2h)");
  if (trace.states.empty() || trace.states.front().t > -2 + 1e-9 || trace.states.back().t < -1 - 1e-9)
    throw WaveError("angular shell needs a trace spanning t in [-2, -1]");
  std::vector<double> ts, vals;
  ShellIntegral out;
  bool first = true;
  for (std::size_t n = 0; n < trace.states.size(); ++n) {
    const WaveState& s = trace.states[n];
    if (s.t < -2 - 1e-9 || s.t > -1 + 1e-9) continue;
    if (first) {
      out.energy = trace.energy[n];
      first = false;
    }
    const auto grads = heat::covariant_gradient(s.phi);
    const int d = s.phi.dim();
    const double T = std::abs(s.t);
    std::vector<double> xt(static_cast<std::size_t>(d));
    double v = 0;
    for (int k = 0; k < g.nodes(); ++k) {
      const double r = radius_at(g, k);
      if (r < T - 2 * eps || r > T - eps) continue;
      const double x1 = g.x1(k % g.n), x2 = g.x2(k / g.n);
      for (int c = 0; c < d; ++c) xt[c] = x1 * grads[1](k, c) - x2 * grads[0](k, c);
      v += kern::mink(xt.data(), xt.data(), d);
    }
    ts.push_back(s.t);
    vals.push_back(v * g.h() * g.h());
  }
  for (std::size_t n = 1; n < ts.size(); ++n) out.integral += 0.5 * (ts[n] - ts[n - 1]) * (vals[n] + vals[n - 1]);
  out.ratio = out.energy > 0 ? out.integral / (eps * out.energy) : 0.0;
  return out;
}

}  // namespace caloricflow::wave
