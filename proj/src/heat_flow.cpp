#include "caloricflow/heat_flow.hpp"

#include "caloricflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace caloricflow::heat {

namespace {

constexpr double kBlowupFactor = 10.0;

/// Visits every node with its four periodic neighbours.
template <class Fn>
void for_each_node(const Grid2D& g, Fn fn) {
  const int n = g.n;
  parallel_for(0, n, [&](int j0, int j1) {
    for (int j = j0; j < j1; ++j) {
      const int jm = g.wrap(j - 1), jp = g.wrap(j + 1);
      for (int i = 0; i < n; ++i) {
        const int im = g.wrap(i - 1), ip = g.wrap(i + 1);
        fn(j * n + i, j * n + im, j * n + ip, jm * n + i, jp * n + i);
      }
    }
  });
}

}  // namespace

void HeatFlowConfig::validate() const {
  if (!(ds_factor > 0) || ds_factor > 0.25) throw FlowError("ds_factor must lie in (0, 1/4]");
  if (!(s_max > 0)) throw FlowError("s_max must be positive");
  if (tail_eps < 0) throw FlowError("tail_eps must be non-negative");
  if (!(ladder.ratio > 1)) throw FlowError("ladder ratio must exceed 1");
  if (probe_offset < 0) throw FlowError("probe offset must be non-negative");
}

std::vector<double> HeatFlowTrace::s_values() const {
  std::vector<double> s;
  s.reserve(rungs.size());
  for (const auto& r : rungs) s.push_back(r.centre.s);
  return s;
}

std::size_t HeatFlowTrace::rung_near(double s) const {
  if (rungs.empty()) throw FlowError("empty trace");
  std::size_t best = 0;
  for (std::size_t j = 1; j < rungs.size(); ++j)
    if (std::abs(rungs[j].centre.s - s) < std::abs(rungs[best].centre.s - s)) best = j;
  return best;
}

// ===========================================================================
// Pointwise operators

TangentField tension(const MapField& phi) {
  const Grid2D& g = phi.grid();
  const int d = phi.dim();
  const double ih2 = 1.0 / (g.h() * g.h());
  TangentField out(phi);
  for_each_node(g, [&](int k, int w, int e, int s, int nn) {
    const double *x = phi.at(k), *pw = phi.at(w), *pe = phi.at(e), *ps = phi.at(s), *pn = phi.at(nn);
    double* t = out.at(k);
    for (int c = 0; c < d; ++c) t[c] = (pw[c] + pe[c] + ps[c] + pn[c] - 4.0 * x[c]) * ih2;
    kern::tangent_project(x, t, d);
  });
  return out;
}

std::array<TangentField, 2> covariant_gradient(const MapField& phi) {
  std::array<TangentField, 2> out{TangentField(grid::diff(phi, 0)), TangentField(grid::diff(phi, 1))};
  for (auto& f : out) f.project_onto(phi);
  return out;
}

Field gradient_magnitude(const MapField& phi) {
  const auto dphi = covariant_gradient(phi);
  const int d = phi.dim();
  Field out(phi.grid(), 1);
  for (int k = 0; k < phi.nodes(); ++k) {
    const double a = kern::mink(dphi[0].at(k), dphi[0].at(k), d) + kern::mink(dphi[1].at(k), dphi[1].at(k), d);
    out.at(k)[0] = std::sqrt(std::max(0.0, a));
  }
  return out;
}

double dirichlet_energy(const MapField& phi) {
  const Grid2D& g = phi.grid();
  const int d = phi.dim();
  const int n = g.n;
  double total = 0;
  std::vector<double> diffv(static_cast<std::size_t>(d));
  for (int j = 0; j < n; ++j) {
    const int jp = g.wrap(j + 1);
    for (int i = 0; i < n; ++i) {
      const int ip = g.wrap(i + 1);
      const double* x = phi.at(j * n + i);
      for (const double* y : {phi.at(j * n + ip), phi.at(jp * n + i)}) {
        for (int c = 0; c < d; ++c) diffv[c] = y[c] - x[c];
        total += kern::mink(diffv.data(), diffv.data(), d);
      }
    }
  }
  return 0.5 * total;
}

namespace {

void check_step(const Grid2D& g, double ds) {
  if (!(ds > 0) || ds > 0.25 * g.h() * g.h() * (1 + 1e-12)) {
    std::ostringstream os;
    os << "heat step ds = " << ds << " violates the diffusive limit h^2/4 = " << 0.25 * g.h() * g.h();
    throw FlowError(os.str());
  }
}

struct StepStats {
  double defect = 0;
  double tension_sq = 0;  // integral |tau|^2
};

/// Explicit projected Euler step; optionally advances a tangent field by the step derivative.
StepStats explicit_step(const MapField& phi, MapField& out, const TangentField* v, TangentField* vout, double ds) {
  const Grid2D& g = phi.grid();
  const int d = phi.dim();
  const double ih2 = 1.0 / (g.h() * g.h());
  const int rows = g.n;
  if (d > 16) throw FlowError("target dimension above 15 is not supported by the step kernel");
  std::vector<double> defect(static_cast<std::size_t>(rows), 0.0), tsq(static_cast<std::size_t>(rows), 0.0);
  std::vector<char> bad(static_cast<std::size_t>(rows), 0);
  for_each_node(g, [&](int k, int w, int e, int s, int nn) {
    double lap[16] = {}, a[16] = {};
    const double* x = phi.at(k);
    const double *pw = phi.at(w), *pe = phi.at(e), *ps = phi.at(s), *pn = phi.at(nn);
    for (int c = 0; c < d; ++c) lap[c] = (pw[c] + pe[c] + ps[c] + pn[c] - 4.0 * x[c]) * ih2;
    const double lp = kern::mink(lap, x, d);
    double tau[16] = {};
    for (int c = 0; c < d; ++c) tau[c] = lap[c] + lp * x[c];
    const double t2 = kern::mink(tau, tau, d);
    for (int c = 0; c < d; ++c) a[c] = x[c] + ds * tau[c];
    const double q = -kern::mink(a, a, d);
    const int row = k / g.n;
    defect[static_cast<std::size_t>(row)] = std::max(defect[static_cast<std::size_t>(row)], std::abs(q - 1.0));
    tsq[static_cast<std::size_t>(row)] += t2;
    if (!(q > 0) || !(a[0] > 0)) {
      bad[static_cast<std::size_t>(row)] = 1;
      return;
    }
    const double r = std::sqrt(q);
    double* o = out.at(k);
    for (int c = 0; c < d; ++c) o[c] = a[c] / r;
    if (v) {
      const double* V = v->at(k);
      const double *vw = v->at(w), *ve = v->at(e), *vs = v->at(s), *vn = v->at(nn);
      double lv[16] = {}, da[16] = {};
      for (int c = 0; c < d; ++c) lv[c] = (vw[c] + ve[c] + vs[c] + vn[c] - 4.0 * V[c]) * ih2;
      const double c1 = kern::mink(lv, x, d), c2 = kern::mink(lap, V, d);
      for (int c = 0; c < d; ++c) da[c] = V[c] + ds * (lv[c] + (c1 + c2) * x[c] + lp * V[c]);
      const double ada = kern::mink(a, da, d);
      double* vo = vout->at(k);
      for (int c = 0; c < d; ++c) vo[c] = da[c] / r + a[c] * ada / (r * r * r);
      kern::tangent_project(o, vo, d);
    }
  });
  for (char b : bad)
    if (b) throw FlowError("heat step left the timelike cone");
  StepStats st;
  for (double x : defect) st.defect = std::max(st.defect, x);
  for (double x : tsq) st.tension_sq += x;
  st.tension_sq *= g.h() * g.h();
  return st;
}

}  // namespace

MapField step(const MapField& phi, double ds) {
  check_step(phi.grid(), ds);
  MapField out = phi;
  explicit_step(phi, out, nullptr, nullptr, ds);
  return out;
}

void step_with_tangent(MapField& phi, TangentField& v, double ds) {
  check_step(phi.grid(), ds);
  MapField out = phi;
  TangentField vout = v;
  explicit_step(phi, out, &v, &vout, ds);
  phi = std::move(out);
  v = std::move(vout);
}

MapField duhamel_step(const MapField& phi, double ds, int picard_iterations) {
  check_step(phi.grid(), ds);
  const int d = phi.dim();
  auto nonlinearity = [d](const MapField& p) {
    const auto grads = std::array<Field, 2>{grid::diff(p, 0), grid::diff(p, 1)};
    Field out(p.grid(), d);
    for (int k = 0; k < p.nodes(); ++k) {
      const double e = kern::mink(grads[0].at(k), grads[0].at(k), d) + kern::mink(grads[1].at(k), grads[1].at(k), d);
      for (int c = 0; c < d; ++c) out.at(k)[c] = -e * p.at(k)[c];
    }
    return out;
  };
  auto normalized = [&](Field f) {
    for (int k = 0; k < f.nodes(); ++k) kern::normalize_point(f.at(k), d);
    MapField m(f.grid(), d - 1);
    static_cast<Field&>(m) = std::move(f);
    return m;
  };
  const Field free = grid::heat_propagate(phi, ds);
  const Field g0 = nonlinearity(phi);
  const Field g0_prop = grid::heat_propagate(g0, ds);
  Field pred = phi;
  {
    Field tmp = g0;
    tmp *= ds;
    pred += tmp;
  }
  MapField iterate = normalized(grid::heat_propagate(pred, ds));
  for (int it = 0; it < picard_iterations; ++it) {
    Field next = free;
    Field corr = g0_prop + nonlinearity(iterate);
    corr *= 0.5 * ds;
    next += corr;
    iterate = normalized(std::move(next));
  }
  iterate.set_tail(phi.at_infinity(), std::nullopt);
  return iterate;
}

// ===========================================================================
// Flow driver

namespace {

struct Event {
  std::size_t rung;
  EventRole role;
};

Snapshot make_snapshot(double s, const MapField& phi, const TangentField* v) {
  Snapshot snap{s, phi, tension(phi), std::nullopt};
  if (v) snap.dphi_dt = *v;
  return snap;
}

}  // namespace

HeatFlowTrace run(const MapField& phi0, const HeatFlowConfig& cfg, const TangentField* velocity,
                  FlowObserver* observer) {
  cfg.validate();
  const Grid2D& g = phi0.grid();
  phi0.validate();
  if (velocity) {
    velocity->require_compatible(phi0);
    if (velocity->tangency_violation(phi0) > 1e-10) throw FlowError("initial velocity is not tangent");
  }
  const double ds = cfg.ds(g);
  const std::vector<double> ladder = grid::make_ladder(g, cfg.ladder, cfg.s_max);

  // Event schedule: each rung, its companions and its probes.
  std::map<double, std::vector<Event>> schedule;
  // Companions and probes of the last rung may sit just past s_max.
  const double horizon = cfg.s_max * (1 + 1e-12) + std::max(cfg.companions ? ds : 0.0, cfg.probe_offset);
  auto add_event = [&](double s, std::size_t rung, EventRole role) {
    if (s < 0 || s > horizon) return;
    auto it = schedule.lower_bound(s - 1e-13 * std::max(1.0, s));
    if (it != schedule.end() && std::abs(it->first - s) <= 1e-13 * std::max(1.0, s)) {
      it->second.push_back({rung, role});
      return;
    }
    schedule[s].push_back({rung, role});
  };
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    const double s = ladder[j];
    add_event(s, j, EventRole::Centre);
    if (cfg.companions) {
      if (s > 0) add_event(s - ds, j, EventRole::Before);
      add_event(s + ds, j, EventRole::After);
    }
    if (cfg.probe_offset > 0) {
      if (s > 0) add_event(s - cfg.probe_offset, j, EventRole::ProbeBefore);
      add_event(s + cfg.probe_offset, j, EventRole::ProbeAfter);
    }
  }

  HeatFlowTrace trace;
  trace.grid = g;
  trace.config = cfg;
  trace.rungs.resize(ladder.size());
  std::vector<bool> centre_seen(ladder.size(), false);

  MapField phi = phi0;
  std::optional<TangentField> vel;
  if (velocity) vel = *velocity;
  if (observer) observer->on_start(phi);

  trace.initial_sup_grad = grid::sup_norm(gradient_magnitude(phi0));
  const double tail_abs = cfg.tail_eps * trace.initial_sup_grad;
  double energy = cfg.monitor_energy ? dirichlet_energy(phi) : 0.0;
  double s = 0;
  std::optional<std::size_t> last_rung;  // set once the tail criterion fires

  auto fire = [&](const std::vector<Event>& events, double at) {
    for (const Event& ev : events) {
      if (last_rung && ev.rung > *last_rung) continue;
      if (observer) observer->on_event(ev.rung, ev.role, at, phi, vel ? &*vel : nullptr);
      Rung& r = trace.rungs[ev.rung];
      switch (ev.role) {
        case EventRole::Centre: {
          r.centre = make_snapshot(at, phi, vel ? &*vel : nullptr);
          centre_seen[ev.rung] = true;
          const double sup = grid::sup_norm(gradient_magnitude(phi));
          if (!trace.sup_grad.empty() && trace.sup_grad.back() > 0 && sup > kBlowupFactor * trace.sup_grad.back()) {
            std::ostringstream os;
            os << "blow-up detector fired at s = " << at << ": sup|d_x phi| grew from " << trace.sup_grad.back()
               << " to " << sup;
            throw FlowError(os.str());
          }
          trace.sup_grad.push_back(sup);
          trace.energy.push_back(dirichlet_energy(phi));
          if (!last_rung && cfg.tail_eps > 0 && sup <= tail_abs) {
            trace.tail_met = true;
            last_rung = ev.rung;
          }
          break;
        }
        case EventRole::Before: r.before = make_snapshot(at, phi, vel ? &*vel : nullptr); break;
        case EventRole::After: r.after = make_snapshot(at, phi, vel ? &*vel : nullptr); break;
        default: break;
      }
    }
  };

  auto pending = [&](std::map<double, std::vector<Event>>::const_iterator it) {
    for (; it != schedule.end(); ++it)
      for (const Event& ev : it->second)
        if (!last_rung || ev.rung <= *last_rung) return it;
    return schedule.cend();
  };

  auto it = schedule.cbegin();
  if (it != schedule.cend() && it->first == 0.0) {
    fire(it->second, 0.0);
    ++it;
  }
  MapField next = phi;
  std::optional<TangentField> vnext;
  if (vel) vnext = *vel;
  for (it = pending(it); it != schedule.cend(); it = pending(std::next(it))) {
    const double target = it->first;
    while (s < target) {
      const double remaining = target - s;
      const double h_step = remaining <= ds * (1 + 1e-12) ? remaining : ds;
      StepStats st;
      if (cfg.scheme == Scheme::ExplicitProjected) {
        st = explicit_step(phi, next, vel ? &*vel : nullptr, vnext ? &*vnext : nullptr, h_step);
      } else {
        if (vel) throw FlowError("the Duhamel scheme does not track tangent fields");
        const TangentField tau = tension(phi);
        st.tension_sq = grid::lp_norm(tau, 2);
        st.tension_sq *= st.tension_sq;
        static_cast<Field&>(next) = duhamel_step(phi, h_step);
      }
      const double s_new = h_step == remaining ? target : s + h_step;
      trace.dissipation += h_step * st.tension_sq;
      trace.max_preprojection_defect = std::max(trace.max_preprojection_defect, st.defect);
      if (observer) observer->on_step(s, s_new, phi, next, vel ? &*vel : nullptr);
      std::swap(phi, next);
      if (vel) std::swap(*vel, *vnext);
      s = s_new;
      trace.step_ends.push_back(s);
      ++trace.steps;
      if (cfg.monitor_energy) {
        const double e_new = dirichlet_energy(phi);
        trace.max_energy_increase = std::max(trace.max_energy_increase, e_new - energy);
        energy = e_new;
      }
    }
    fire(it->second, target);
  }

  // Keep only rungs that were reached.
  std::size_t keep = 0;
  while (keep < trace.rungs.size() && centre_seen[keep]) ++keep;
  trace.rungs.resize(keep);
  trace.energy.resize(keep);
  trace.sup_grad.resize(keep);
  for (auto& r : trace.rungs) r.centre.phi.set_tail(phi0.at_infinity(), std::nullopt);
  return trace;
}

// ===========================================================================
// Energy densities and Bochner residuals

Field energy_density(const MapField& phi, int k) {
  if (k < 1 || k > 3) throw FlowError("energy densities are available for k = 1, 2, 3");
  const int d = phi.dim();
  // level holds the tangent fields D_{i1}...D_{i(k-1)} d_{ik} phi for all index tuples.
  std::vector<TangentField> level;
  for (auto& f : covariant_gradient(phi)) level.push_back(std::move(f));
  for (int order = 2; order <= k; ++order) {
    std::vector<TangentField> next;
    for (int i = 0; i < 2; ++i)
      for (const auto& f : level) {
        TangentField df(grid::diff(f, i));
        df.project_onto(phi);
        next.push_back(std::move(df));
      }
    level = std::move(next);
  }
  Field out(phi.grid(), 1);
  for (int node = 0; node < phi.nodes(); ++node) {
    double s = 0;
    for (const auto& f : level) s += kern::mink(f.at(node), f.at(node), d);
    out.at(node)[0] = s;
  }
  return out;
}

std::vector<Field> energy_density(const HeatFlowTrace& trace, int k) {
  std::vector<Field> out;
  for (const auto& r : trace.rungs) out.push_back(energy_density(r.centre.phi, k));
  return out;
}

namespace {

Field wedge_energy(const MapField& phi) {
  const auto dphi = covariant_gradient(phi);
  const int d = phi.dim();
  Field out(phi.grid(), 1);
  for (int k = 0; k < phi.nodes(); ++k) {
    const double a = kern::mink(dphi[0].at(k), dphi[0].at(k), d);
    const double b = kern::mink(dphi[1].at(k), dphi[1].at(k), d);
    const double c = kern::mink(dphi[0].at(k), dphi[1].at(k), d);
    out.at(k)[0] = 4.0 * (a * b - c * c);
  }
  return out;
}

}  // namespace

BochnerResidual bochner_residual(const HeatFlowTrace& trace, std::size_t rung, int k) {
  if (k < 1 || k > 2) throw FlowError("Bochner residuals are available for k = 1, 2");
  if (rung >= trace.rungs.size()) throw FlowError("rung index out of range");
  const Rung& r = trace.rungs[rung];
  if (!r.before || !r.after) throw FlowError("Bochner residual needs companion snapshots on both sides of the rung");
  const Field em = energy_density(r.before->phi, k);
  const Field e0 = energy_density(r.centre.phi, k);
  const Field ep = energy_density(r.after->phi, k);
  const Field lap = grid::laplacian(e0);
  const Field enext = energy_density(r.centre.phi, k + 1);
  const double a = r.centre.s - r.before->s, b = r.after->s - r.centre.s;
  Field res(e0.grid(), 1), dse(e0.grid(), 1), env(e0.grid(), 1);
  const Field wedge = k == 1 ? wedge_energy(r.centre.phi) : Field(e0.grid(), 1);
  const Field e1 = k == 2 ? energy_density(r.centre.phi, 1) : Field(e0.grid(), 1);
  for (int node = 0; node < e0.nodes(); ++node) {
    const double ds_e = grid::three_point_derivative(em.at(node)[0], e0.at(node)[0], ep.at(node)[0], a, b);
    dse.at(node)[0] = ds_e;
    res.at(node)[0] = ds_e - lap.at(node)[0] + 2.0 * enext.at(node)[0] + wedge.at(node)[0];
    env.at(node)[0] = 3.0 * e1.at(node)[0] * e0.at(node)[0];
  }
  return {grid::lp_norm(res, 2), grid::lp_norm(dse, 2), k == 2 ? grid::lp_norm(env, 2) : 0.0};
}

// ===========================================================================
// Comparison principle

std::vector<Field> scheme_semigroup(const HeatFlowTrace& trace, const Field& f0) {
  if (!(f0.grid() == trace.grid)) throw FlowError("field and trace live on different grids");
  std::vector<Field> out;
  out.reserve(trace.rungs.size());
  Field u = f0;
  double s = 0;
  auto step_it = trace.step_ends.begin();
  for (const auto& r : trace.rungs) {
    while (s < r.centre.s && step_it != trace.step_ends.end()) {
      Field du = grid::laplacian(u);
      du *= *step_it - s;
      u += du;
      s = *step_it++;
    }
    out.push_back(u);
  }
  return out;
}

ComparisonReport comparison_check(const HeatFlowTrace& trace) {
  ComparisonReport rep;
  if (trace.rungs.empty()) return rep;
  const MapField& phi0 = trace.rungs.front().centre.phi;
  const int d = phi0.dim();
  const Field mag0 = gradient_magnitude(phi0);
  const grid::HeatSemigroup semi(mag0);

  // Linear lift log_o(phi0) for the equality-case measurement.
  AmbientVec o(static_cast<std::size_t>(d));
  if (phi0.at_infinity()) o = *phi0.at_infinity();
  else o = AmbientVec(std::span<const double>(phi0.at(0), static_cast<std::size_t>(d)));
  Field lift(phi0.grid(), d);
  for (int k = 0; k < phi0.nodes(); ++k) kern::log_map(o.data(), phi0.at(k), lift.at(k), d);

  const std::vector<Field> bounds = scheme_semigroup(trace, mag0);
  const std::vector<Field> lifts = scheme_semigroup(trace, lift);
  for (std::size_t j = 0; j < trace.rungs.size(); ++j) {
    const Rung& r = trace.rungs[j];
    const Field& bound = bounds[j];
    const Field mag = gradient_magnitude(r.centre.phi);
    const Field cont = semi.at(r.centre.s);
    const auto gl = grid::grad(lifts[j]);
    double worst = 0, worst_scheme = 0;
    for (int k = 0; k < mag.nodes(); ++k) {
      const double m = mag.at(k)[0];
      worst = std::max(worst, m - cont.at(k)[0]);
      rep.max_slack = std::max(rep.max_slack, cont.at(k)[0] - m);
      worst_scheme = std::max(worst_scheme, m - bound.at(k)[0]);
      const double lm = std::sqrt(std::max(
          0.0, kern::mink(gl[0].at(k), gl[0].at(k), d) + kern::mink(gl[1].at(k), gl[1].at(k), d)));
      rep.saturation_gap = std::max(rep.saturation_gap, std::abs(m - lm));
    }
    rep.violation_per_rung.push_back(worst);
    rep.scheme_violation_per_rung.push_back(worst_scheme);
    rep.max_violation = std::max(rep.max_violation, worst);
    rep.scheme_violation = std::max(rep.scheme_violation, worst_scheme);
  }
  return rep;
}

// ===========================================================================
// Near-harmonicity

std::array<double, 2> near_harmonicity(const MapField& phi, const std::array<double, 4>& eta) {
  const double a = eta[0], b = eta[1], c = eta[2], dd = eta[3];
  if (std::abs(b - c) > 1e-14 * std::max(1.0, std::abs(b)) || !(a > 0) || !(a * dd - b * c > 0))
    throw FlowError("eta must be symmetric positive definite");
  const int d = phi.dim();
  const Field d11 = grid::diff2(phi, 0);
  const Field d22 = grid::diff2(phi, 1);
  const Field d12 = grid::diff(grid::diff(phi, 0), 1);
  Field first(phi.grid(), 1);
  std::vector<double> t(static_cast<std::size_t>(d));
  for (int k = 0; k < phi.nodes(); ++k) {
    for (int q = 0; q < d; ++q) t[q] = a * d11.at(k)[q] + 2.0 * b * d12.at(k)[q] + dd * d22.at(k)[q];
    kern::tangent_project(phi.at(k), t.data(), d);
    first.at(k)[0] = std::sqrt(std::max(0.0, kern::mink(t.data(), t.data(), d)));
  }
  return {grid::l1loc_norm(first), grid::l1loc_norm(gradient_magnitude(phi))};
}

}  // namespace caloricflow::heat
