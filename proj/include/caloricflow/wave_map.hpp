/// @file wave_map.hpp
/// @brief Wave maps into H^m: constrained leapfrog evolution, heat extension at each wave time,
/// the wave-tension field and the travelling, self-similar and Hopf diagnostics.
///
/// The extrinsic equation is phi_tt = Lap phi + (|phi_t|^2 - |d_x phi|^2) phi with Minkowski norms.
/// The discrete evolution is the constrained Stormer-Verlet (RATTLE) scheme for the Lagrangian
/// 1/2 |phi_t|^2 - (edge-form Dirichlet energy) on the hyperboloid, so its energy is the edge-form
/// energy plus the kinetic term and is conserved up to O(dt^2) oscillations.
#pragma once

#include "caloricflow/caloric_gauge.hpp"
#include "caloricflow/classical_data.hpp"
#include "caloricflow/energy_space.hpp"

#include <array>
#include <stdexcept>
#include <vector>

namespace caloricflow::wave {

class WaveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WaveState {
  double t = 0;
  MapField phi;
  TangentField phi_t;

  WaveState() = default;
  WaveState(double t0, MapField p, TangentField v);
  WaveState(double t0, const ClassicalData& d) : WaveState(t0, d.phi0, d.phi1) {}
  ClassicalData data() const { return ClassicalData(phi, phi_t); }
  const Grid2D& grid() const { return phi.grid(); }
};

struct WaveConfig {
  double dt_factor = 0.25;    ///< dt = dt_factor * h, at most 1/2
  double drift_budget = 1e-3;  ///< relative energy drift over the run; 10x this aborts
  int record_every = 1;        ///< keep every k-th state in the trace
  void validate() const;
};

/// One RATTLE step. Throws WaveError if dt > h/2.
WaveState wave_step(const WaveState& state, double dt);

struct WaveTrace {
  Grid2D grid;
  double dt = 0;                  ///< spacing of the recorded states
  std::vector<WaveState> states;  ///< equally spaced in t
  std::vector<double> energy;     ///< per recorded state
  double max_relative_drift = 0;  ///< over every step, recorded or not
};

/// Evolves for the given duration with dt = dt_factor * h rounded down to divide it.
WaveTrace evolve(const WaveState& initial, double duration, const WaveConfig& cfg = {});

double wave_energy(const WaveState& s);

/// L1 norm of -d_t T_{0b} + d_i T_{ib} summed over b = 0, 1, 2, centered in t and x. Needs 0 < k < last.
double stress_divergence(const WaveTrace& trace, std::size_t k);

// ---- heat extension and the wave-tension field -----------------------------------

/// Caloric gauges of three consecutive wave states, built with the same e_inf and tracking phi_t.
struct DynamicGauge {
  double t = 0, dt = 0;
  gauge::CaloricGauge minus, centre, plus;
};
DynamicGauge build_dynamic_gauge(const WaveState& minus, const WaveState& centre, const WaveState& plus,
                                 const OrthoFrame& e_inf, const gauge::GaugeConfig& cfg);
DynamicGauge build_dynamic_gauge(const WaveTrace& trace, std::size_t k, const OrthoFrame& e_inf,
                                 const gauge::GaugeConfig& cfg);

/// w = -D_t psi_t + psi_s at one rung and role, with d_t by centered wave-time differences and A_t read off the
/// centered difference of the frames.
struct WaveTension {
  double s = 0;
  Field w;                      ///< m comps
  double l1 = 0;                ///< int |w|
  Field A_t;                    ///< m*m comps, from frame differences
  double A_t_scale = 0;         ///< L2 norm of A_t
  double quadrature_gap = -1;   ///< L2 distance to the A_t integrated along the flow (-1 if unavailable)
};
WaveTension wave_tension(const DynamicGauge& g, std::size_t rung,
                         heat::EventRole role = heat::EventRole::Centre);

struct TensionScan {
  std::vector<double> s, l1;
  double sup_l1 = 0;
};
TensionScan wave_tension_scan(const DynamicGauge& g);

/// L1 residual of d_s w = D_i D_i w - (w ^ psi_i) psi_i + c (psi_t ^ psi_i) D_t psi_i at a rung with companions.
/// With the wedge and connection conventions of caloric_gauge.hpp the identity holds with c = 4.
/// fitted_coefficient is the least-squares c (NaN when the wedge term vanishes, e.g. for geodesic data).
struct TensionEvolution {
  double s = 0;
  double residual = 0;
  double scale = 0;  ///< L1 norm of d_s w
  double fitted_coefficient = 0;
};
TensionEvolution wave_tension_evolution_residual(const DynamicGauge& g, std::size_t rung, double coefficient = 4.0);

// ---- travelling and self-similar diagnostics ------------------------------------

/// L2 norm of phi_t + v . d_x phi.
double travelling_diag(const WaveState& s, std::array<double, 2> v);
/// L2 norm over |x| <= radius of t phi_t + x . d_x phi (the s = 0 value of psi_X).
double selfsim_diag(const WaveState& s, double radius);
/// L2 norm over |x| <= radius of t psi_t + x . psi_x + 2 s psi_s at one rung of a gauge tracking phi_t.
double selfsim_diag(const gauge::CaloricGauge& g, double t, std::size_t rung, double radius);

struct HopfQuantities {
  Field G;                    ///< zero outside the light cone |x| < |t|
  std::vector<double> radii;  ///< r_k = k h inside the cone
  std::vector<double> F;      ///< theta-integral of G on each ring
  double identity_residual = 0;  ///< L1 of x_i T_0i + t T_ii - <phi_t, t phi_t + x . d_x phi>
  double selfsim_residual = 0;   ///< L1 over the cone of r^2 T_00 + t x_i T_0i + G / 2
  double selfsim_scale = 0;      ///< L1 over the cone of G / 2
};
/// Requires t < 0 and the cone inside the grid.
HopfQuantities hopf_quantities(const WaveState& s);

struct ShellIntegral {
  double integral = 0;  ///< int over t in [-2, -1] of int_{|t| - 2 eps <= |x| <= |t| - eps} |d_theta phi|^2
  double energy = 0;
  double ratio = 0;  ///< integral / (eps E)
};
ShellIntegral angular_energy_shell(const WaveTrace& trace, double eps);

}  // namespace caloricflow::wave
