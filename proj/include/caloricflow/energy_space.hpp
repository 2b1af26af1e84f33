/// @file energy_space.hpp
/// @brief Gram and stress-energy algebra of classical data, the caloric (Littlewood-Paley) resolution and
/// its rotation-quotient metric, symmetry actions and the shift-degeneracy functionals.
#pragma once

#include "caloricflow/caloric_gauge.hpp"
#include "caloricflow/classical_data.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <variant>
#include <vector>

namespace caloricflow::energy {

class EnergyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric 3x3 matrix per node over the indices (0, 1, 2) = (t, x1, x2), stored as the six entries
/// 00, 01, 02, 11, 12, 22.
class SymField : public Field {
 public:
  SymField() = default;
  explicit SymField(const Grid2D& g) : Field(g, 6) {}
  static int slot(int a, int b);
  double get(int node, int a, int b) const { return at(node)[slot(a, b)]; }
  void set(int node, int a, int b, double v) { at(node)[slot(a, b)] = v; }
  /// Smallest eigenvalue at each node.
  Field min_eigenvalue() const;
};

/// Gamma_ab = <d_a phi, d_b phi> with d_0 phi = phi1 and centered spatial derivatives.
SymField gram(const ClassicalData& data);
/// T_ab = Gamma_ab - 1/2 g_ab g^cd Gamma_cd, g = diag(-1, 1, 1).
SymField stress(const SymField& gram);
SymField stress(const ClassicalData& data);
/// Inverse of stress: Gamma = T - g tr_g(T).
SymField destress(const SymField& T);
/// Edge-form Dirichlet energy of phi0 (the functional the discrete heat flow dissipates) plus 1/2 int |phi1|^2.
double energy(const ClassicalData& data);
/// T_00 = 1/2 (|phi1|^2 + |d_x phi0|^2) per node with centered derivatives.
Field energy_density(const ClassicalData& data);

// ---- the resolution ------------------------------------------------------

struct LPResolution {
  Grid2D grid;
  std::vector<double> s;        ///< heat times of the ladder
  std::vector<double> weights;  ///< quadrature weights in s
  std::vector<Field> psi_s;     ///< m components per rung
  Field psi_t0;                 ///< e(0)^* phi1, m components

  int m() const { return psi_t0.components(); }
  /// The same resolution with every field multiplied by U (m x m) componentwise.
  LPResolution rotated(const Eigen::MatrixXd& U) const;
  LPResolution scaled(double c) const;
  /// Resolution with all fields zero on the given ladder.
  static LPResolution zero(const Grid2D& g, int m, std::vector<double> s);
};

/// Gauge configuration used by lp_embed by default: the flow to the tail with a ladder starting at ds
/// and refined by 2^{1/8}, so that the first rungs resolve the initial transient of |psi_s|^2.
gauge::GaugeConfig default_embedding(const Grid2D& g);

LPResolution lp_embed(const ClassicalData& data, const OrthoFrame& e_inf, const gauge::GaugeConfig& cfg);
LPResolution lp_embed(const ClassicalData& data, const OrthoFrame& e_inf);

double lp_norm(const LPResolution& r);
/// Cross-pairing M = sum_j w_j int psi_b psi_a^T + 1/2 int psi_t0_b psi_t0_a^T.
Eigen::MatrixXd cross_pairing(const LPResolution& a, const LPResolution& b);
/// The rotation U in SO(m) minimising ||U a - b||.
Eigen::MatrixXd lp_alignment(const LPResolution& a, const LPResolution& b);
/// min over U in SO(m) of ||U a - b||_L.
double lp_distance(const LPResolution& a, const LPResolution& b);

// ---- symmetries ----------------------------------------------------------

struct Translation {
  int di = 0, dj = 0;  ///< whole grid cells
};
struct TimeReversal {};
/// Isometry of H^m: a (1+m)x(1+m) row-major matrix in SO(m,1) preserving the upper sheet.
struct TargetIsometry {
  std::vector<double> matrix;
};
/// x -> lambda x with lambda = 2^k. The grid keeps n and scales L (h' = lambda h), so the samples are copied.
struct Dilation {
  int k = 1;
};
using Symmetry = std::variant<Translation, TimeReversal, TargetIsometry, Dilation>;

ClassicalData apply_symmetry(const ClassicalData& data, const Symmetry& which);

/// Boost of rapidity eta in the (0, axis) plane followed by a rotation by angle theta in the (1, 2) plane.
TargetIsometry lorentz(int m, double eta, int axis, double theta);

// ---- degeneracy --------------------------------------------------------------

/// (int |phi1 + v . grad phi0|^2, int |w . grad phi0|^2) with w the unit vector orthogonal to v.
std::array<double, 2> degeneracy_functionals(const ClassicalData& data, std::array<double, 2> v);

/// phi0 = exp_o(k^{-1/2} eta(x1, x2 / k) E_1) with eta a bump of radius R, and phi1 = -D_1 phi0.
ClassicalData stretched_travelling_data(const Grid2D& g, int m, double k, double amplitude, double radius);

// ---- continuity probe ------------------------------------------------------

struct PairDistance {
  std::size_t i = 0, j = 0;
  double lp = 0;       ///< lp_distance of the resolutions
  double gram_l1 = 0;  ///< int |Gamma_i - Gamma_j| (Frobenius per node)
};
struct ContinuityReport {
  std::vector<PairDistance> pairs;
  double max_ratio = 0;  ///< max gram_l1 / lp over pairs with lp > 0
};
/// L1 distance between Gram fields.
double gram_distance(const SymField& a, const SymField& b);
ContinuityReport gram_continuity_probe(const std::vector<ClassicalData>& data, const OrthoFrame& e_inf,
                                       const gauge::GaugeConfig& cfg);

}  // namespace caloricflow::energy
