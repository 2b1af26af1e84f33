/// @file synthetic.hpp
/// @brief Deterministic synthetic data families used by tests, acceptance runs and the CLI.
#pragma once

#include "caloricflow/classical_data.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace caloricflow::synth {

/// Smooth compactly supported bump: exp(1 - 1/(1 - (r/R)^2)) for r < R, 0 beyond; equals 1 at r = 0.
double bump(double r, double R);

/// Samples g(x1, x2) on the grid.
Field sample_scalar(const Grid2D& g, const std::function<double(double, double)>& fn);

/// exp_o(f(x) E_axis) with f a scalar field; axis in [1, m].
MapField geodesic_map(const Field& f, int m, int axis = 1, std::optional<double> support = {});

/// exp_o(sum_a f_a(x) E_a) with f a field carrying m components.
MapField exp_field(const Field& f, std::optional<double> support = {});

/// Gaussian geodesic data A exp(-|x|^2/(2 sigma^2)) along E_1.
MapField gaussian_geodesic(const Grid2D& g, int m, double amplitude, double sigma);

/// Compact bump along E_1, radius R about the origin.
MapField bump_geodesic(const Grid2D& g, int m, double amplitude, double R);

/// Two offset bumps along E_1 and E_2 (rank-2 differential where they overlap).
/// For m = 1 both bumps point along E_1.
MapField generic_bump(const Grid2D& g, int m, double amplitude, double R);

/// Tangent velocity P_phi(W) with W a smooth compactly supported ambient field.
TangentField generic_velocity(const MapField& phi, double amplitude, double R);

/// Smooth counterpart of generic_bump: the same two offsets with Gaussian profiles of width sigma (no compact tail).
MapField generic_gaussian(const Grid2D& g, int m, double amplitude, double sigma);

/// Tangent velocity P_phi(W) with W a Gaussian ambient field of width sigma.
TangentField gaussian_velocity(const MapField& phi, double amplitude, double sigma);

/// Random band-limited scalar field: Fourier modes with |k| <= kmax, seeded, zero mean, unit L2 norm.
Field random_band_limited(const Grid2D& g, int kmax, std::uint64_t seed);

/// Named recipes shared with the CLI. Known names:
/// constant, gaussian_geodesic, bump_geodesic, generic_bump, generic_moving, gaussian_moving.
struct Recipe {
  std::string name = "generic_bump";
  int m = 2;
  double amplitude = 1.0;
  double radius = 1.5;
  double sigma = 1.0;
  double velocity_amplitude = 0.0;
};
ClassicalData make_data(const Grid2D& g, const Recipe& r);

// ---- wave-time families -----------------------------------------------------

/// Profile used for self-similar and travelling samples: exp_o(b(|y|)(c0 + c1 y1) E_1 + b(|y|) c2 y2 E_2).
HPoint profile(double y1, double y2, int m, double amplitude);

/// phi(t, x) = P(x / t), with the time derivative taken by a centered difference of step dt.
ClassicalData self_similar_sample(const Grid2D& g, int m, double amplitude, double t, double dt);

/// phi(t, x) = P((x - v t)/scale), time derivative by a centered difference of step dt.
ClassicalData travelling_sample(const Grid2D& g, int m, double amplitude, double scale, std::array<double, 2> v,
                                double t, double dt);

}  // namespace caloricflow::synth
