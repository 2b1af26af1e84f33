/// @file caloric_gauge.hpp
/// @brief Caloric gauge: frames parallel along heat time, aligned to a fixed frame at s = infinity,
/// the differentiated fields psi and connection fields A read in that frame, and their identities.
///
/// Conventions.
///  - A frame field stores the m columns e_1..e_m (each 1+m ambient components) per node, column-major.
///  - psi_alpha has components psi^a = <d_alpha phi, e_a>.
///  - Connection matrices act on component vectors: (A_i)_{ab} = <D_i e_b, e_a>, so the covariant
///    derivative of u = u^b e_b reads D_i u = d_i u + A_i u. Matrices are stored row-major (m*m comps).
///  - (X ^ Y) denotes the matrix X Y^T - Y X^T, i.e. Z -> X<Y,Z> - Y<X,Z>.
#pragma once

#include "caloricflow/heat_flow.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace caloricflow::gauge {

class GaugeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// m orthonormal tangent columns per node.
class FrameField : public Field {
 public:
  FrameField() = default;
  FrameField(const Grid2D& g, int m) : Field(g, m * (m + 1)), m_(m) {}
  int m() const { return m_; }
  int dim() const { return m_ + 1; }
  double* col(int node, int a) { return at(node) + a * dim(); }
  const double* col(int node, int a) const { return at(node) + a * dim(); }
  /// max |<e_a, e_b> - delta_ab| over nodes.
  double orthonormality_defect() const;

 private:
  int m_ = 0;
};

struct GaugeConfig {
  heat::HeatFlowConfig flow;
  /// Largest spread of phi(s_final) around its limit point, in geodesic distance.
  double frame_tail_tol = 1e-4;
  /// Offset of the A_s probes around each rung, in units of ds (0 disables the probes).
  double probe_fraction = 1.0 / 16.0;
  /// Require the flow's tail criterion (disable only for diagnostics on truncated runs).
  bool require_tail = true;
  /// Largest tolerated frame orthonormality drift before renormalisation.
  double drift_tol = 1e-8;
};

/// Differentiated and connection fields at one heat time.
struct GaugeState {
  double s = 0;
  std::array<Field, 2> psi_x;  ///< m comps each
  Field psi_s;                 ///< m comps
  std::optional<Field> psi_t;  ///< m comps, when a time derivative is tracked
  std::array<Field, 2> A_x;    ///< m*m comps each, antisymmetric
  std::optional<Field> A_t;    ///< m*m comps; only at rung centres
};

class CaloricGauge {
 public:
  const heat::HeatFlowTrace& trace() const { return trace_; }
  std::size_t rungs() const { return trace_.rungs.size(); }
  const OrthoFrame& e_inf() const { return e_inf_; }
  int m() const { return e_inf_.m(); }

  /// Aligned frame at a rung (role Centre, Before or After).
  const FrameField& frame(std::size_t rung, heat::EventRole role = heat::EventRole::Centre) const;
  /// Fields in the caloric gauge at a rung.
  GaugeState state(std::size_t rung, heat::EventRole role = heat::EventRole::Centre) const;
  bool has_companions(std::size_t rung) const;

  /// Per-node Frobenius norm of the measured A_s at each rung (empty when probes are disabled).
  const std::vector<Field>& as_residual() const { return as_residual_; }
  double max_as_residual() const;
  /// Largest orthonormality drift seen before per-step renormalisation.
  double max_frame_drift() const { return max_drift_; }
  /// sup_x dist(phi(s_final, x), limit point).
  double tail_defect() const { return tail_defect_; }
  /// The s-independent rotation U(x) (m*m comps, row-major) applied to the transported frames.
  const Field& alignment() const { return alignment_; }

 private:
  friend CaloricGauge build_caloric_gauge(const MapField&, const OrthoFrame&, const GaugeConfig&,
                                          const TangentField*);
  explicit CaloricGauge(OrthoFrame e_inf) : e_inf_(std::move(e_inf)) {}
  struct RungFrames {
    FrameField centre;
    std::optional<FrameField> before, after;
  };
  heat::HeatFlowTrace trace_;
  OrthoFrame e_inf_;
  std::vector<RungFrames> frames_;
  std::vector<Field> a_t_;  ///< per rung centre, when psi_t is tracked
  std::vector<Field> as_residual_;
  Field alignment_;
  double max_drift_ = 0;
  double tail_defect_ = 0;
};

/// Runs the heat flow of phi0 (and the linearised flow of phi1, if given) while transporting a seeded frame
/// parallel in s, then rotates every frame by the U(x) that makes the s_final frame, transported to the base of
/// e_inf, equal to e_inf. Throws GaugeError if the tail criterion or frame_tail_tol is unmet.
CaloricGauge build_caloric_gauge(const MapField& phi0, const OrthoFrame& e_inf, const GaugeConfig& cfg,
                                 const TangentField* phi1 = nullptr);

/// Gram-Schmidt of the tangent-projected axes E_1..E_m (then E_0 as a fallback), positively oriented.
void seed_frame(const double* p, double* frame, int m);

// ---- identities ---------------------------------------------------------

/// L2 residuals of one rung: torsion D_1 psi_2 - D_2 psi_1, curvature d_1 A_2 - d_2 A_1 + [A_1, A_2] + psi_1 ^ psi_2,
/// and psi_s - D_i psi_i. Scales are the L2 norms of the largest term, for relative reporting.
struct StructureResidual {
  double torsion = 0, curvature = 0, ps_frame = 0;
  double torsion_scale = 0, curvature_scale = 0, ps_scale = 0;
};
StructureResidual structure_residual(const GaugeState& st);
std::vector<StructureResidual> structure_residuals(const CaloricGauge& g);

/// Heat-time evolution residuals at a rung with companions (L2 norms, centered s-differences).
struct EvolutionResidual {
  double s = 0;
  double psi_evolve = 0;  ///< d_s psi_x - D_x psi_s
  double sax = 0;         ///< d_s A_x + psi_s ^ psi_x
  double psix_heat = 0;   ///< d_s psi_x - D_i D_i psi_x + (psi_x ^ psi_i) psi_i
  double psis_heat = 0;   ///< d_s psi_s - D_i D_i psi_s + (psi_s ^ psi_i) psi_i
  double dst = -1;        ///< d_s psi_t - D_i D_i psi_t + (psi_t ^ psi_i) psi_i   (-1 if untracked)
  double psi_evolve_scale = 0, sax_scale = 0, psix_scale = 0, psis_scale = 0, dst_scale = 0;
};
EvolutionResidual evolution_residual(const CaloricGauge& g, std::size_t rung);
std::vector<EvolutionResidual> evolution_residuals(const CaloricGauge& g);

/// |psi_s(s)| against the heat evolution of |psi_s(0)| (continuum and scheme-matched), as in the comparison check.
struct PsisComparison {
  double max_violation = 0;         ///< continuum semigroup, all rungs
  double scheme_violation = 0;      ///< scheme-matched semigroup
  std::vector<double> violation_per_rung;
  std::vector<double> scheme_violation_per_rung;
};
PsisComparison psis_comparison(const CaloricGauge& g);

struct ConnectionScan {
  double sup_sqrt_s_Ainf = 0;       ///< sup_s s^{1/2} ||A_x(s)||_inf over rungs with s > 0
  double sup_A2 = 0;                ///< sup_s ||A_x(s)||_2
  double reconstruction_gap = 0;    ///< max over rungs of ||A_x(s) - int_s^{s_final} psi_s ^ psi_x||_2
  double reconstruction_scale = 0;  ///< max over rungs of ||A_x(s)||_2
  std::vector<double> sqrt_s_Ainf;
};
ConnectionScan connection_bound_scan(const CaloricGauge& g);

/// Covariant heat evolution du/ds = D_i D_i u - (u ^ psi_i) psi_i in the gauge background, with the background
/// held at the rung value on each rung interval. Uses orthogonal Cayley links, so |u| obeys the discrete
/// comparison principle exactly.
struct CovariantHeatResult {
  std::vector<Field> u;                 ///< at each rung
  double max_energy_increase = 0;       ///< max per step of ||u||^2(after) - ||u||^2(before)
  double scheme_violation = 0;          ///< max (|u(s)| - S(s)|u0|)_+ with the matching explicit semigroup
  std::vector<double> continuum_violation_per_rung;  ///< (|u(s)| - e^{s Lap}|u0|)_+ per rung
};
CovariantHeatResult covariant_heat_solve(const CaloricGauge& g, const Field& u0);

// ---- small matrix helpers on fields ---------------------------------------

/// Matrix-vector action of an m*m field on an m field, nodewise.
Field apply(const Field& A, const Field& u);
/// (X ^ Y) as an m*m field.
Field wedge(const Field& X, const Field& Y);
/// (X ^ Y) Z nodewise.
Field wedge_apply(const Field& X, const Field& Y, const Field& Z);
/// D_i u = d_i u + A_i u with centered differences.
Field covariant_diff(const Field& u, const Field& A, int axis);

}  // namespace caloricflow::gauge
