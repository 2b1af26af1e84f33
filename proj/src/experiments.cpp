#include "caloricflow/experiments.hpp"

#include "caloricflow/energy_space.hpp"
#include "caloricflow/field_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

namespace caloricflow::cli {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
auto timed(RunReport& r, const char* stage, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto out = f();
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  r.timings.emplace_back(stage, dt.count());
  return out;
}

RunReport start(const ExperimentConfig& c, const char* experiment) {
  RunReport r;
  r.experiment = experiment;
  r.config = c.to_json();
  return r;
}

/// a / b, with 0 / 0 = 0.
double relative(double a, double b) {
  if (b > 0) return a / b;
  return a == 0 ? 0.0 : kInf;
}

const char* comparator_name(Comparator c) {
  switch (c) {
    case Comparator::AtMost: return "<=";
    case Comparator::AtLeast: return ">=";
    case Comparator::Finite: return "finite";
    case Comparator::Report: return "report";
  }
  return "report";
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

OrthoFrame e_inf(const ExperimentConfig& c) { return OrthoFrame::standard(c.m); }

heat::HeatFlowConfig short_flow(double s_max) {
  heat::HeatFlowConfig f;
  f.s_max = s_max;
  f.tail_eps = 0;
  return f;
}

gauge::GaugeConfig truncated_gauge(double s_max) {
  gauge::GaugeConfig g;
  g.flow = short_flow(s_max);
  g.require_tail = false;
  return g;
}

/// Embedding ladder of energy_space with the run length, tail and scheme taken from the configuration.
gauge::GaugeConfig embedding(const ExperimentConfig& c, const Grid2D& g) {
  gauge::GaugeConfig e = energy::default_embedding(g);
  e.flow.ds_factor = c.flow.ds_factor;
  e.flow.s_max = c.flow.s_max;
  e.flow.tail_eps = c.flow.tail_eps;
  e.flow.scheme = c.flow.scheme;
  e.flow.ladder.s_min = e.flow.ds(g);
  e.frame_tail_tol = c.gauge.frame_tail_tol;
  e.require_tail = c.gauge.require_tail;
  e.drift_tol = c.gauge.drift_tol;
  return e;
}

double max_constraint(const std::vector<wave::WaveState>& states) {
  double w = 0;
  for (const auto& s : states) w = std::max(w, s.phi.constraint_violation());
  return w;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- functional-inequality corpus ---------------------------------------------------------

struct Ratio {
  const char* name;
  const char* anchor;
  std::function<double(const Field&)> eval;
};

}  // namespace

RunReport cmd_inequalities(const ExperimentConfig& c) {
  RunReport r = start(c, "inequalities");
  const std::vector<Ratio> ratios{
      {"gn_k1_p2", "||d u||_2^2 <= C ||u||_2 ||d^2 u||_2",
       [](const Field& u) { return grid::gn_ratio(u, grid::GNVariant::Gag1, 1, 2.0); }},
      {"gn_sup_l2_h2", "||u||_inf^2 <= C ||u||_2 ||d^2 u||_2",
       [](const Field& u) { return grid::gn_ratio(u, grid::GNVariant::Gag2); }},
      {"gn_l2_l1_w21", "||u||_2^2 <= C ||u||_1 ||d^2 u||_1",
       [](const Field& u) { return grid::gn_ratio(u, grid::GNVariant::Gag6); }},
      {"gn_sup_l2_w14", "||u||_inf <= C ||u||_2^{1/3} ||d u||_4^{2/3}",
       [](const Field& u) { return grid::gn_ratio(u, grid::GNVariant::Gag3); }},
      {"gn_l4_l2_h1", "||u||_4^2 <= C ||u||_2 ||d u||_2",
       [](const Field& u) { return grid::gn_ratio(u, grid::GNVariant::Gag4); }},
      {"strichartz_p4", "int s^{-1/2} ||e^{s Lap} u||_4^2 ds <= C ||u||_2^2",
       [](const Field& u) { return grid::strichartz_functional(u, 4.0); }},
      {"strichartz_p6", "int s^{-1/3} ||e^{s Lap} u||_6^2 ds <= C ||u||_2^2",
       [](const Field& u) { return grid::strichartz_functional(u, 6.0); }},
  };
  const Grid2D g(64, 8.0);
  constexpr int kCorpus = 20;
  std::vector<Field> corpus;
  for (int i = 0; i < kCorpus; ++i) corpus.push_back(synth::random_band_limited(g, 6, c.seed * 1000 + i));
  auto& rows = r.csv["inequalities"];
  timed(r, "corpus", [&] {
    for (const Ratio& q : ratios) {
      double lo = kInf, hi = 0;
      for (int i = 0; i < kCorpus; ++i) {
        const double v = q.eval(corpus[static_cast<std::size_t>(i)]);
        rows.push_back({{}, {}, std::string(q.name) + "[" + std::to_string(i) + "]", v});
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      r.report(std::string(q.name) + "_max", q.anchor, hi);
      r.require(std::string(q.name) + "_spread", q.anchor, hi / lo, 10.0, Comparator::AtMost);
    }
    return 0;
  });
  return r;
}

namespace {

// ---- metric oracles on random resolutions ----------------------------------------------

energy::LPResolution random_resolution(const Grid2D& g, int m, std::size_t rungs, std::mt19937_64& rng) {
  std::vector<double> s{0.0};
  for (std::size_t j = 1; j < rungs; ++j) s.push_back(0.01 * std::pow(1.5, static_cast<double>(j)));
  energy::LPResolution res = energy::LPResolution::zero(g, m, s);
  std::normal_distribution<double> nd;
  for (Field& f : res.psi_s)
    for (double& v : f.values()) v = nd(rng);
  for (double& v : res.psi_t0.values()) v = nd(rng);
  return res;
}

/// |closed-form distance - grid-search distance| over a few random pairs, m = 2, 10^5 angles.
double alignment_oracle_gap(std::mt19937_64& rng) {
  const Grid2D g(8, 2.0);
  double worst = 0;
  for (int trial = 0; trial < 3; ++trial) {
    const auto a = random_resolution(g, 2, 5, rng), b = random_resolution(g, 2, 5, rng);
    const Eigen::MatrixXd M = energy::cross_pairing(a, b);
    const double na = energy::lp_norm(a), nb = energy::lp_norm(b);
    double best = kInf;
    constexpr int kAngles = 100000;
    for (int i = 0; i < kAngles; ++i) {
      const double t = 2 * std::numbers::pi * i / kAngles;
      const double co = std::cos(t), si = std::sin(t);
      const double tr = co * M(0, 0) + si * M(1, 0) - si * M(0, 1) + co * M(1, 1);
      best = std::min(best, na * na + nb * nb - 2 * tr);
    }
    worst = std::max(worst, std::abs(std::sqrt(std::max(best, 0.0)) - energy::lp_distance(a, b)));
  }
  return worst;
}

double triangle_violation(int m, std::mt19937_64& rng) {
  const Grid2D g(8, 2.0);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_resolution(g, m, 4, rng), b = random_resolution(g, m, 4, rng),
               x = random_resolution(g, m, 4, rng);
    const double excess = energy::lp_distance(a, b) - energy::lp_distance(a, x) - energy::lp_distance(x, b);
    worst = std::max(worst, excess);
  }
  return worst;
}

// ---- refinement studies -----------------------------------------------------------------

struct StudySpec {
  const char* anchor;
  double floor;
  double ceiling;
};

StudySpec study_spec(const std::string& check) {
  if (check == "laplacian") return {"Lap_h f = Lap f + O(h^2)", 1.8, 2.2};
  if (check == "heat_geodesic") return {"phi(s) = exp_o(e^{s Lap} f E_1) for geodesic data", 1.5, kInf};
  if (check == "comparison") return {"|psi_x(s)| <= e^{s Lap} |psi_x(0)|", 1.5, kInf};
  if (check == "saturation") return {"|d_x phi(s)| = |grad e^{s Lap} log_o phi(0)| for geodesic data", 1.5, kInf};
  if (check == "torsion") return {"D_1 psi_2 = D_2 psi_1", 1.9, kInf};
  if (check == "curvature") return {"d_1 A_2 - d_2 A_1 + [A_1, A_2] = -psi_1 ^ psi_2", 1.5, kInf};
  if (check == "ps_frame") return {"psi_s = D_i psi_i", 1.5, kInf};
  if (check == "energy_drift") return {"E(t) = E(0)", 1.5, kInf};
  if (check == "dalembert") return {"phi(t) = exp_o(u(t) E_1) with u_tt = Lap u for geodesic data", 1.8, kInf};
  if (check == "stress_divergence") return {"d^a T_ab = 0", 0.9, kInf};
  if (check == "wave_tension") return {"w(t, 0, x) = 0", 1.5, kInf};
  if (check == "travelling") return {"d_t phi + v . d_x phi = 0", 1.8, kInf};
  if (check == "self_similar") return {"t d_t phi + x . d_x phi = 0", 1.8, kInf};
  if (check == "hopf") return {"r^2 T_00 + t x_i T_0i = -G/2", 0.9, kInf};
  throw ConfigError("unknown convergence check '" + check + "'");
}

double max_node_distance(const MapField& a, const MapField& b) {
  double w = 0;
  for (int k = 0; k < a.nodes(); ++k) w = std::max(w, kern::dist(a.at(k), b.at(k), a.dim()));
  return w;
}

double max_abs_diff(const Field& a, const Field& b) {
  double w = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) w = std::max(w, std::abs(a.values()[i] - b.values()[i]));
  return w;
}

double gaussian(double r2, const ExperimentConfig& c) {
  return std::exp(-r2 / (2 * c.data.sigma * c.data.sigma));
}

double study_residual(const ExperimentConfig& c, const std::string& check, const Grid2D& g) {
  const double h = g.h();
  const double sigma = c.data.sigma, amp = c.data.amplitude;
  if (check == "laplacian") {
    // Periodic images keep the sampled Gaussian smooth across the torus seam.
    auto images = [&](double x, double y, auto&& profile) {
      double v = 0;
      for (int k = -3; k <= 3; ++k)
        for (int l = -3; l <= 3; ++l) {
          const double a = x + 2 * g.L * k, b = y + 2 * g.L * l;
          v += profile(a * a + b * b);
        }
      return v;
    };
    const Field f = synth::sample_scalar(g, [&](double x, double y) {
      return images(x, y, [&](double r2) { return gaussian(r2, c); });
    });
    const Field exact = synth::sample_scalar(g, [&](double x, double y) {
      return images(x, y, [&](double r2) { return (r2 / std::pow(sigma, 4) - 2 / (sigma * sigma)) * gaussian(r2, c); });
    });
    return max_abs_diff(grid::laplacian(f), exact);
  }
  if (check == "heat_geodesic") {
    const Field f = synth::sample_scalar(g, [&](double x, double y) { return amp * gaussian(x * x + y * y, c); });
    const auto trace = heat::run(synth::geodesic_map(f, c.m, 1), short_flow(0.5));
    return max_node_distance(trace.rungs.back().centre.phi, synth::geodesic_map(grid::heat_propagate(f, 0.5), c.m, 1));
  }
  if (check == "dalembert") {
    const double T = c.wave.duration;
    // Sum over periodic images so that the exact solution lives on the same torus as the scheme.
    auto periodic = [&](double x) {
      double v = 0;
      for (int k = -3; k <= 3; ++k) v += amp * gaussian((x + 2 * g.L * k) * (x + 2 * g.L * k), c);
      return v;
    };
    const MapField phi0 = synth::geodesic_map(synth::sample_scalar(g, [&](double x, double) { return periodic(x); }), c.m, 1);
    const auto tr = wave::evolve(wave::WaveState(0, ClassicalData(phi0)), T, c.wave.evolution);
    const MapField exact = synth::geodesic_map(
        synth::sample_scalar(g, [&](double x, double) { return 0.5 * (periodic(x - T) + periodic(x + T)); }), c.m, 1);
    return max_abs_diff(exact, tr.states.back().phi);
  }
  if (check == "travelling") {
    const std::array<double, 2> v{0.5, 0.2};
    const ClassicalData d = synth::travelling_sample(g, c.m, amp, 2.0, v, 0.3, 0.25 * h);
    return wave::travelling_diag(wave::WaveState(0.3, d), v);
  }
  if (check == "self_similar") {
    const ClassicalData d = synth::self_similar_sample(g, c.m, amp, -1.5, 0.25 * h);
    return wave::selfsim_diag(wave::WaveState(-1.5, d), 1.35);
  }
  if (check == "hopf") {
    const ClassicalData d = synth::self_similar_sample(g, c.m, amp, -1.5, 0.25 * h);
    return wave::hopf_quantities(wave::WaveState(-1.5, d)).selfsim_residual;
  }

  const ClassicalData data = synth::make_data(g, c.recipe());
  if (check == "comparison" || check == "saturation") {
    const auto rep = heat::comparison_check(heat::run(data.phi0, short_flow(1.0)));
    return check == "comparison" ? rep.scheme_violation : rep.saturation_gap;
  }
  if (check == "torsion" || check == "curvature" || check == "ps_frame") {
    const auto G = gauge::build_caloric_gauge(data.phi0, e_inf(c), truncated_gauge(0.3), &data.phi1);
    const auto sr = gauge::structure_residual(G.state(G.rungs() - 1));
    return check == "torsion" ? sr.torsion : check == "curvature" ? sr.curvature : sr.ps_frame;
  }
  if (check == "energy_drift")
    return wave::evolve(wave::WaveState(0, data), c.wave.duration, c.wave.evolution).max_relative_drift;
  if (check == "stress_divergence") {
    const auto tr = wave::evolve(wave::WaveState(0, data), c.wave.duration, c.wave.evolution);
    if (tr.states.size() < 3) throw ConfigError("wave.duration is too short for a centered stress divergence");
    return wave::stress_divergence(tr, tr.states.size() / 2);
  }
  if (check == "wave_tension") {
    const auto tr = wave::evolve(wave::WaveState(0, data), 2 * c.wave.evolution.dt_factor * h, c.wave.evolution);
    gauge::GaugeConfig gc = truncated_gauge(8 * h * h);
    gc.probe_fraction = 0;
    const auto dg = wave::build_dynamic_gauge(tr, 1, e_inf(c), gc);
    return wave::wave_tension(dg, 1).l1;
  }
  throw ConfigError("unknown convergence check '" + check + "'");
}

}  // namespace

// ---- RunReport -----------------------------------------------------------------------

bool RunReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void RunReport::require(std::string name, std::string anchor, double value, double threshold, Comparator cmp) {
  bool pass = false;
  if (cmp == Comparator::AtMost) pass = value <= threshold;
  if (cmp == Comparator::AtLeast) pass = value >= threshold;
  if (cmp == Comparator::Finite) pass = std::isfinite(value);
  if (cmp == Comparator::Report) pass = !std::isnan(value);
  checks.push_back({std::move(name), std::move(anchor), value, threshold, cmp, pass});
}

void RunReport::require_finite(std::string name, std::string anchor, double value) {
  require(std::move(name), std::move(anchor), value, kInf, Comparator::Finite);
}

void RunReport::report(std::string name, std::string anchor, double value) {
  require(std::move(name), std::move(anchor), value, kInf, Comparator::Report);
}

void RunReport::merge(const RunReport& other, const std::string& prefix) {
  for (Check c : other.checks) {
    c.name = prefix + c.name;
    checks.push_back(std::move(c));
  }
  for (const auto& [stage, seconds] : other.timings) timings.emplace_back(prefix + stage, seconds);
  for (const auto& [family, rows] : other.csv) {
    auto& dst = csv[family];
    dst.insert(dst.end(), rows.begin(), rows.end());
  }
  fields.insert(fields.end(), other.fields.begin(), other.fields.end());
  for (const auto& item : other.tables.items()) tables[prefix + item.key()] = item.value();
}

json RunReport::to_json() const {
  json rows = json::array();
  for (const Check& c : checks)
    rows.push_back({{"name", c.name},
                    {"anchor", c.anchor},
                    {"value", number(c.value)},
                    {"threshold", number(c.threshold)},
                    {"comparator", comparator_name(c.comparator)},
                    {"pass", c.pass}});
  json times = json::object();
  for (const auto& [stage, seconds] : timings) times[stage] = seconds;
  json files = json::array();
  for (const auto& item : csv) files.push_back(item.first + ".csv");
  json field_files = json::array();
  for (const auto& f : fields) field_files.push_back(f.stem);
  return {{"experiment", experiment}, {"config", config},       {"all_pass", all_pass()},
          {"checks", rows},           {"tables", tables},       {"csv_files", files},
          {"field_files", field_files}, {"timings_seconds", times}};
}

// ---- commands --------------------------------------------------------------------------

RunReport cmd_heatflow(const ExperimentConfig& c) {
  RunReport r = start(c, "heatflow");
  const Grid2D g = c.make_grid();
  const ClassicalData data = synth::make_data(g, c.recipe());
  const auto trace = timed(r, "flow", [&] { return heat::run(data.phi0, c.flow); });
  const auto comp = timed(r, "comparison", [&] { return heat::comparison_check(trace); });

  r.require("energy_monotone", "dE/ds = -int |tau|^2 <= 0", trace.max_energy_increase, 1e-10, Comparator::AtMost);
  const double drop = trace.energy.front() - trace.energy.back();
  r.require("dissipation_balance", "E(0) - E(s) = int_0^s int |tau|^2", relative(std::abs(drop - trace.dissipation), drop),
            0.05 + g.h() * g.h(), Comparator::AtMost);
  double constraint = 0;
  for (const auto& rung : trace.rungs) constraint = std::max(constraint, rung.centre.phi.constraint_violation());
  r.require("constraint", "<phi, phi> = -1", constraint, 1e-10, Comparator::AtMost);
  r.require("comparison", "|psi_x(s)| <= e^{s Lap} |psi_x(0)|", comp.scheme_violation, 1e-6 + g.h() * g.h(),
            Comparator::AtMost);
  double late = 0;
  for (std::size_t j = 0; j < trace.rungs.size(); ++j)
    if (trace.rungs[j].centre.s >= 0.2) late = std::max(late, comp.violation_per_rung[j]);
  r.report("comparison_continuum_late", "|psi_x(s)| <= e^{s Lap} |psi_x(0)| for s >= 0.2", late);
  r.report("comparison_saturation_gap", "|d_x phi(s)| = |grad e^{s Lap} log_o phi(0)| for geodesic data",
           comp.saturation_gap);
  if (c.flow.tail_eps > 0)
    r.require("tail", "sup |d_x phi(s)| -> 0 as s -> infinity", relative(trace.sup_grad.back(), trace.initial_sup_grad),
              c.flow.tail_eps, Comparator::AtMost);

  std::vector<double> s, sup;
  double bound = 0;
  for (std::size_t j = 0; j < trace.rungs.size(); ++j) {
    const double sj = trace.rungs[j].centre.s;
    if (sj < 1.0 || sj > 64.0) continue;
    s.push_back(sj);
    sup.push_back(trace.sup_grad[j]);
    bound = std::max(bound, std::sqrt(sj) * trace.sup_grad[j]);
  }
  if (trace.initial_sup_grad > 0 && s.size() >= 3 && sup.back() > 0) {
    r.report("decay_bound", "sup_{1 <= s <= 64} s^{1/2} ||psi_x(s)||_inf", bound);
    r.require("decay_slope", "||psi_x(s)||_inf <= C s^{-1/2}", grid::loglog_slope(s, sup), -0.45, Comparator::AtMost);
  }

  auto& rows = r.csv["heatflow"];
  for (std::size_t j = 0; j < trace.rungs.size(); ++j) {
    const double sj = trace.rungs[j].centre.s;
    rows.push_back({{}, sj, "energy", trace.energy[j]});
    rows.push_back({{}, sj, "sup_grad", trace.sup_grad[j]});
    rows.push_back({{}, sj, "comparison_violation", comp.violation_per_rung[j]});
    rows.push_back({{}, sj, "comparison_scheme_violation", comp.scheme_violation_per_rung[j]});
  }
  r.fields.push_back({"heatflow_phi_initial", data.phi0, data.phi0.at_infinity()});
  const MapField& last = trace.rungs.back().centre.phi;
  r.fields.push_back({"heatflow_phi_final", last, last.at_infinity()});
  return r;
}

RunReport cmd_gauge(const ExperimentConfig& c) {
  RunReport r = start(c, "gauge");
  const Grid2D g = c.make_grid();
  const ClassicalData data = synth::make_data(g, c.recipe());
  const auto G =
      timed(r, "gauge", [&] { return gauge::build_caloric_gauge(data.phi0, e_inf(c), c.gauge_config(), &data.phi1); });
  const auto structure = timed(r, "structure", [&] { return gauge::structure_residuals(G); });
  const auto psis = timed(r, "psis_comparison", [&] { return gauge::psis_comparison(G); });
  const auto scan = timed(r, "connection_scan", [&] { return gauge::connection_bound_scan(G); });

  r.require("caloric_condition", "A_s = 0", G.max_as_residual(), 1e-6, Comparator::AtMost);
  double ortho = 0;
  for (std::size_t j = 0; j < G.rungs(); ++j) ortho = std::max(ortho, G.frame(j).orthonormality_defect());
  r.require("frame_orthonormality", "<e_a, e_b> = delta_ab", ortho, 1e-10, Comparator::AtMost);
  r.require("frame_tail", "phi(s) -> const, e(s) -> e_inf as s -> infinity", G.tail_defect(), c.gauge.frame_tail_tol,
            Comparator::AtMost);
  double tor = 0, cur = 0, ps = 0;
  for (const auto& sr : structure) {
    tor = std::max(tor, relative(sr.torsion, sr.torsion_scale));
    cur = std::max(cur, relative(sr.curvature, sr.curvature_scale));
    ps = std::max(ps, relative(sr.ps_frame, sr.ps_scale));
  }
  r.report("torsion_relative", "D_1 psi_2 = D_2 psi_1", tor);
  r.report("curvature_relative", "d_1 A_2 - d_2 A_1 + [A_1, A_2] = -psi_1 ^ psi_2", cur);
  r.report("ps_frame_relative", "psi_s = D_i psi_i", ps);
  r.require("psis_comparison", "|psi_s(s)| <= e^{s Lap} |psi_s(0)|", psis.scheme_violation, 1e-6 + g.h() * g.h(),
            Comparator::AtMost);
  r.report("connection_reconstruction", "A_x(s) = int_s^infinity psi_s ^ psi_x ds'",
           relative(scan.reconstruction_gap, scan.reconstruction_scale));
  r.require_finite("connection_decay", "sup_s s^{1/2} ||A_x(s)||_inf < infinity", scan.sup_sqrt_s_Ainf);

  auto& rows = r.csv["gauge"];
  const auto& as = G.as_residual();
  for (std::size_t j = 0; j < G.rungs(); ++j) {
    const double sj = G.trace().rungs[j].centre.s;
    if (j < as.size()) rows.push_back({{}, sj, "as_residual", grid::sup_norm(as[j])});
    rows.push_back({{}, sj, "torsion", structure[j].torsion});
    rows.push_back({{}, sj, "curvature", structure[j].curvature});
    rows.push_back({{}, sj, "ps_frame", structure[j].ps_frame});
    rows.push_back({{}, sj, "psis_violation", psis.violation_per_rung[j]});
    if (j < scan.sqrt_s_Ainf.size()) rows.push_back({{}, sj, "sqrt_s_A_inf", scan.sqrt_s_Ainf[j]});
  }
  r.fields.push_back({"gauge_alignment", G.alignment(), {}});
  r.fields.push_back({"gauge_psi_s0", G.state(0).psi_s, {}});
  return r;
}

RunReport cmd_energyspace(const ExperimentConfig& c) {
  RunReport r = start(c, "energyspace");
  const Grid2D g = c.make_grid();
  const ClassicalData data = synth::make_data(g, c.recipe());
  auto embed = [&](const ClassicalData& d) { return energy::lp_embed(d, e_inf(c), embedding(c, d.grid())); };
  const auto res = timed(r, "embed", [&] { return embed(data); });
  const double E = energy::energy(data), N = energy::lp_norm(res);
  r.report("energy", "E(Phi) = int T_00", E);
  r.report("lp_norm", "d(iota(Phi), 0)", N);
  r.require("energy_identity", "E(Phi) = d(iota(Phi), 0)^2", relative(std::abs(N * N - E), E), 0.02,
            Comparator::AtMost);

  std::mt19937_64 rng(c.seed);
  timed(r, "metric_oracles", [&] {
    r.require("quotient_alignment", "closed-form SO(2) alignment = grid search", alignment_oracle_gap(rng), 1e-6,
              Comparator::AtMost);
    r.require("triangle_inequality", "d(a, b) <= d(a, c) + d(c, b)", triangle_violation(c.m, rng), 1e-10,
              Comparator::AtMost);
    return 0;
  });

  auto& rows = r.csv["energyspace"];
  rows.push_back({{}, {}, "energy", E});
  rows.push_back({{}, {}, "lp_norm_sq", N * N});
  if (c.energyspace.symmetries) {
    synth::Recipe pair = c.recipe();
    pair.amplitude *= c.energyspace.pair_amplitude;
    pair.velocity_amplitude *= c.energyspace.pair_amplitude;
    const ClassicalData other = synth::make_data(g, pair);
    const double d0 = energy::lp_distance(res, timed(r, "embed_pair", [&] { return embed(other); }));
    rows.push_back({{}, {}, "pair_distance", d0});
    struct Case {
      const char* name;
      const char* anchor;
      energy::Symmetry action;
      double tol;
    };
    const std::vector<Case> cases{
        {"translation_invariance", "d(iota(T Phi), iota(T Psi)) = d(iota(Phi), iota(Psi)), T a translation",
         energy::Translation{c.energyspace.translation[0], c.energyspace.translation[1]}, 1e-10},
        {"time_reversal_invariance", "d(iota(R Phi), iota(R Psi)) = d(iota(Phi), iota(Psi)), R time reversal",
         energy::TimeReversal{}, 1e-10},
        {"dilation_invariance", "d(iota(D Phi), iota(D Psi)) = d(iota(Phi), iota(Psi)), D = Dil_2",
         energy::Dilation{1}, 1e-2},
    };
    for (const Case& k : cases) {
      const double d = timed(r, k.name, [&] {
        return energy::lp_distance(embed(energy::apply_symmetry(data, k.action)),
                                   embed(energy::apply_symmetry(other, k.action)));
      });
      rows.push_back({{}, {}, std::string(k.name) + "_distance", d});
      r.require(k.name, k.anchor, relative(std::abs(d - d0), d0), k.tol, Comparator::AtMost);
    }
  }
  for (std::size_t j = 0; j < res.s.size(); ++j) {
    const double l2 = grid::lp_norm(res.psi_s[j], 2.0);
    rows.push_back({{}, res.s[j], "weight", res.weights[j]});
    rows.push_back({{}, res.s[j], "psi_s_sq", l2 * l2});
  }
  r.fields.push_back({"data_phi0", data.phi0, data.phi0.at_infinity()});
  r.fields.push_back({"data_phi1", data.phi1, {}});
  r.fields.push_back({"lp_psi_t0", res.psi_t0, {}});
  return r;
}

RunReport cmd_wavemap(const ExperimentConfig& c) {
  RunReport r = start(c, "wavemap");
  const Grid2D g = c.make_grid();
  const ClassicalData data = synth::make_data(g, c.recipe());
  const auto trace =
      timed(r, "evolve", [&] { return wave::evolve(wave::WaveState(0, data), c.wave.duration, c.wave.evolution); });
  if (trace.states.size() < 3) throw ConfigError("wave.duration must cover at least two recorded steps");
  r.require("energy_conservation", "E(t) = E(0)", trace.max_relative_drift, c.wave.evolution.drift_budget,
            Comparator::AtMost);
  r.require("constraint", "<phi, phi> = -1", max_constraint(trace.states), 1e-10, Comparator::AtMost);

  auto& rows = r.csv["wavemap"];
  for (std::size_t k = 0; k < trace.states.size(); ++k) rows.push_back({trace.states[k].t, {}, "energy", trace.energy[k]});
  const std::size_t mid = trace.states.size() / 2;
  timed(r, "stress_divergence", [&] {
    for (std::size_t k = 1; k + 1 < trace.states.size(); ++k) {
      const double div = wave::stress_divergence(trace, k);
      rows.push_back({trace.states[k].t, {}, "stress_divergence", div});
      if (k == mid) r.report("stress_divergence", "d^a T_ab = 0", div);
    }
    return 0;
  });

  gauge::GaugeConfig gc = c.gauge_config();
  gc.probe_fraction = 0;
  const auto dg = timed(r, "dynamic_gauge", [&] { return wave::build_dynamic_gauge(trace, mid, e_inf(c), gc); });
  const auto scan = timed(r, "wave_tension", [&] { return wave::wave_tension_scan(dg); });
  r.report("wave_tension_boundary", "w(t, 0, x) = 0", scan.l1.front());
  r.require_finite("wave_tension_sup", "sup_s ||w(t, s)||_L1 < infinity", scan.sup_l1);
  for (std::size_t j = 0; j < scan.s.size(); ++j) rows.push_back({dg.t, scan.s[j], "wave_tension_l1", scan.l1[j]});

  const wave::WaveState& last = trace.states.back();
  r.fields.push_back({"wave_phi_final", last.phi, last.phi.at_infinity()});
  r.fields.push_back({"wave_phi_t_final", last.phi_t, {}});
  return r;
}

RunReport cmd_verify_all(const ExperimentConfig& c) {
  RunReport r = start(c, "verify");
  r.merge(cmd_heatflow(c), "heatflow.");
  r.merge(cmd_gauge(c), "gauge.");
  r.merge(cmd_energyspace(c), "energyspace.");
  r.merge(cmd_wavemap(c), "wavemap.");
  r.merge(cmd_inequalities(c), "inequalities.");
  return r;
}

OrderTable convergence_table(const ExperimentConfig& c, const std::string& check) {
  const StudySpec spec = study_spec(check);
  if (c.converge.resolutions.size() < 3) throw ConfigError("a refinement study needs at least three resolutions");
  OrderTable t;
  t.check = check;
  t.anchor = spec.anchor;
  t.floor = spec.floor;
  t.ceiling = spec.ceiling;
  t.resolutions = c.converge.resolutions;
  for (int n : t.resolutions) {
    const Grid2D g(n, c.grid.L);
    t.h.push_back(g.h());
    t.values.push_back(study_residual(c, check, g));
  }
  if (std::all_of(t.values.begin(), t.values.end(), [](double v) { return v == 0.0; })) {
    t.order = std::numeric_limits<double>::quiet_NaN();
    t.pass = true;
    return t;
  }
  try {
    t.order = grid::loglog_slope(t.h, t.values);
  } catch (const GridError&) {
    t.order = std::numeric_limits<double>::quiet_NaN();
  }
  t.pass = t.order >= t.floor && t.order <= t.ceiling;
  return t;
}

RunReport cmd_convergence(const ExperimentConfig& c, const std::string& check) {
  RunReport r = start(c, "converge");
  const OrderTable t = timed(r, "study", [&] { return convergence_table(c, check); });
  Check row{check + "_order", t.anchor, t.order, t.floor, Comparator::AtLeast, t.pass};
  r.checks.push_back(row);
  json rows = json::array();
  auto& csv = r.csv["convergence"];
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    rows.push_back({{"n", t.resolutions[i]}, {"h", t.h[i]}, {"value", number(t.values[i])}});
    csv.push_back({{}, {}, check + "[n=" + std::to_string(t.resolutions[i]) + "]", t.values[i]});
  }
  csv.push_back({{}, {}, check + "_order", t.order});
  r.tables[check] = {{"anchor", t.anchor},
                     {"rows", rows},
                     {"order", number(t.order)},
                     {"floor", t.floor},
                     {"ceiling", number(t.ceiling)},
                     {"pass", t.pass}};
  return r;
}

RunReport run_experiment(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::HeatFlow: return cmd_heatflow(c);
    case Experiment::Gauge: return cmd_gauge(c);
    case Experiment::EnergySpace: return cmd_energyspace(c);
    case Experiment::WaveMap: return cmd_wavemap(c);
    case Experiment::Verify: return cmd_verify_all(c);
    case Experiment::Converge: return cmd_convergence(c, c.converge.check);
  }
  throw ConfigError("unknown experiment");
}

std::string csv_text(const std::vector<CsvRow>& rows) {
  std::string out = "t,s,quantity,value\n";
  for (const CsvRow& row : rows) {
    if (row.t) out += format_number(*row.t);
    out += ',';
    if (row.s) out += format_number(*row.s);
    out += ',';
    out += row.quantity;
    out += ',';
    out += format_number(row.value);
    out += '\n';
  }
  return out;
}

void write_artifacts(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [family, rows] : r.csv) io::write_text_atomic(dir / (family + ".csv"), csv_text(rows));
  for (const FieldArtifact& f : r.fields) io::write_field(dir / f.stem, f.field, f.at_infinity);
  io::write_text_atomic(dir / "report.json", r.to_json().dump(2) + "\n");
}

}  // namespace caloricflow::cli
