/// @file heat_flow.hpp
/// @brief Harmonic map heat flow into H^m, energy densities and the Bochner/comparison checks.
#pragma once

#include "caloricflow/grid.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace caloricflow::heat {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { ExplicitProjected, DuhamelPicard };

struct HeatFlowConfig {
  double ds_factor = 0.125;  ///< ds = ds_factor * h^2
  double s_max = 64.0;
  /// Stop at the first rung where sup|d_x phi| < tail_eps * (initial sup). Zero disables the stop.
  double tail_eps = 1e-6;
  grid::LadderSpec ladder;
  Scheme scheme = Scheme::ExplicitProjected;
  /// Record extra snapshots at s_j -/+ ds for centered s-derivatives.
  bool companions = false;
  /// Offset of observer-only probe events around each rung (0 disables).
  double probe_offset = 0.0;
  bool monitor_energy = true;

  double ds(const Grid2D& g) const { return ds_factor * g.h() * g.h(); }
  void validate() const;
};

struct Snapshot {
  double s = 0;
  MapField phi;
  TangentField dphi_ds;
  std::optional<TangentField> dphi_dt;  ///< linearised flow of an initial velocity, if tracked
};

struct Rung {
  Snapshot centre;
  std::optional<Snapshot> before, after;
};

struct HeatFlowTrace {
  Grid2D grid;
  HeatFlowConfig config;
  std::vector<Rung> rungs;
  std::vector<double> energy;    ///< Dirichlet energy at each rung
  std::vector<double> sup_grad;  ///< sup |d_x phi| at each rung
  double initial_sup_grad = 0;
  std::size_t steps = 0;
  double max_energy_increase = 0;     ///< max over steps of E(after) - E(before)
  double dissipation = 0;             ///< sum over steps of ds * integral |tau|^2
  double max_preprojection_defect = 0;  ///< max |<a,a> + 1| before renormalisation
  bool tail_met = false;
  std::vector<double> step_ends;  ///< s after every step, in order


  std::vector<double> s_values() const;
  double s_final() const { return rungs.empty() ? 0.0 : rungs.back().centre.s; }
  /// Index of the rung whose s is closest to the request.
  std::size_t rung_near(double s) const;
};

enum class EventRole { Centre, Before, After, ProbeBefore, ProbeAfter };

/// Receives every step and every scheduled event of a run.
class FlowObserver {
 public:
  virtual ~FlowObserver() = default;
  virtual void on_start(const MapField& /*phi0*/) {}
  /// velocity is the tracked tangent field at s0 (null when none is tracked).
  virtual void on_step(double /*s0*/, double /*s1*/, const MapField& /*before*/, const MapField& /*after*/,
                       const TangentField* /*velocity*/) {}
  virtual void on_event(std::size_t /*rung*/, EventRole /*role*/, double /*s*/, const MapField& /*phi*/,
                        const TangentField* /*velocity*/) {}
};

// ---- pointwise operators ---------------------------------------------------

/// Delta phi - |d_x phi|^2 phi, tangent-projected.
TangentField tension(const MapField& phi);
/// Tangent-projected centered derivatives (D_1 phi, D_2 phi).
std::array<TangentField, 2> covariant_gradient(const MapField& phi);
/// |d_x phi| per node from the centered derivatives.
Field gradient_magnitude(const MapField& phi);
/// Edge form 1/2 sum over grid edges of the chord norm; decreases along the discrete flow.
double dirichlet_energy(const MapField& phi);

/// One explicit projected Euler step. Throws FlowError on ds > h^2/4.
MapField step(const MapField& phi, double ds);
/// Explicit step that also advances a tangent field by the derivative of the step map.
void step_with_tangent(MapField& phi, TangentField& v, double ds);
/// Exponential-trapezoid step (spectral heat propagator plus Picard corrector).
MapField duhamel_step(const MapField& phi, double ds, int picard_iterations = 2);

/// Runs the flow, landing exactly on every ladder rung.
HeatFlowTrace run(const MapField& phi0, const HeatFlowConfig& cfg, const TangentField* velocity = nullptr,
                  FlowObserver* observer = nullptr);

// ---- diagnostics ---------------------------------------------------------

/// e_k, k in {1, 2, 3}, per node at one snapshot.
Field energy_density(const MapField& phi, int k);
/// e_k at every rung of a trace.
std::vector<Field> energy_density(const HeatFlowTrace& trace, int k);

struct BochnerResidual {
  double residual = 0;  ///< L2 norm of lhs - rhs
  double scale = 0;     ///< L2 norm of d_s e_k, for relative reporting
  double envelope = 0;  ///< k = 2: L2 norm of the cubic remainder envelope 3 e_1 e_2
};
/// Residual of d_s e_k = Lap e_k - 2 e_{k+1} (- wedge term for k = 1) at a rung with companions.
BochnerResidual bochner_residual(const HeatFlowTrace& trace, std::size_t rung, int k);

/// Explicit five-point heat evolution of f0 replayed on the trace's step sequence, sampled at every rung.
std::vector<Field> scheme_semigroup(const HeatFlowTrace& trace, const Field& f0);

/// The bound e^{s Lap}|d_x phi(0)| is evaluated twice: with the continuum semigroup, and with the
/// five-point explicit semigroup replayed on the flow's own step sequence (the scheme-matched bound).
struct ComparisonReport {
  double max_violation = 0;      ///< max (|d_x phi(s)| - e^{s Lap}|d_x phi(0)|)_+, continuum semigroup
  double max_slack = 0;          ///< max (e^{s Lap}|d_x phi(0)| - |d_x phi(s)|)_+, continuum semigroup
  double scheme_violation = 0;   ///< as max_violation with the scheme-matched semigroup
  /// max | |d_x phi(s)| - |grad S(s) log_o phi(0)| |, o = phi(infinity), S the scheme-matched semigroup
  double saturation_gap = 0;
  std::vector<double> violation_per_rung;         ///< continuum
  std::vector<double> scheme_violation_per_rung;  ///< scheme-matched
};
ComparisonReport comparison_check(const HeatFlowTrace& trace);

/// (||eta^{ij} D_i d_j phi||_{L1loc}, ||d_x phi||_{L1loc}).
std::array<double, 2> near_harmonicity(const MapField& phi, const std::array<double, 4>& eta);

}  // namespace caloricflow::heat
