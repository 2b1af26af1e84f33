#pragma once

#include "caloricflow/grid.hpp"

namespace caloricflow {

/// Initial data (phi0, phi1): a map and a tangent velocity on the same grid.
struct ClassicalData {
  MapField phi0;
  TangentField phi1;

  ClassicalData() = default;
  ClassicalData(MapField p0, TangentField p1) : phi0(std::move(p0)), phi1(std::move(p1)) { validate(); }
  /// Static data: phi1 = 0.
  explicit ClassicalData(MapField p0) : phi0(std::move(p0)), phi1(phi0) {}

  const Grid2D& grid() const { return phi0.grid(); }
  int m() const { return phi0.m(); }
  void validate(double tol = 1e-10) const {
    phi0.require_compatible(phi1);
    if (phi1.tangency_violation(phi0) > tol) throw GeometryError("velocity is not tangent to the map");
  }
};

}  // namespace caloricflow
