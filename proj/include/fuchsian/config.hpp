#pragma once

#include <cstddef>

namespace fuchsian {

/// Tolerances shared by every module. One record so a run can echo exactly
/// what it used.
struct Tolerances {
  double algebraic = 1e-12;       // Minkowski-norm and orthogonality invariants
  double geometric = 1e-9;        // residuals of constructed geometry
  double tangent_angle = 1e-7;    // |angle| this close to 0 or pi counts as tangent
  double vertex_hit = 1e-9;       // exit this close to a corner counts as a vertex hit
  double sample_margin = 1e-7;    // samplers reject draws this close to degeneracy
  double cycle_sum = 1e-9;        // link-cycle angle sums
  std::size_t window_cap = 64;    // k_max for good-window growth
  double crossing_angle_floor = 1e-4;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

}  // namespace fuchsian
