#pragma once

#include <vector>

#include "warptrack/tracker_state.hpp"

namespace warptrack {

struct ShapeSolverConfig {
  int iterations = 2;
  double lambda_phi = 0.05;   // pulls offsets toward zero
  double lambda_nbr = 0.5;    // smoothness against neighbor offsets
  double lambda_w = 1e-2;     // damping on the per-vertex 3x3 system
  double diag_floor = 1e-9;
};

/// Regularized residual of Eq-style shape fitting:
/// r^ = r + lambda_phi |phi|^2 + lambda_nbr sum |phi - phi_n|^2.
/// Neighbor offsets are read from the previous iterate.
double shape_residual(double r, const Vec3& phi_i, const std::vector<int>& nbrs,
                      const std::vector<Vec3>& phi_prev, const ShapeSolverConfig& cfg);

/// Gradient of the regularized residual in phi_i. `dr_dphi` is the data-term
/// gradient (zero when the vertex has no observation).
Vec3 shape_gradient(const Vec3& dr_dphi, const Vec3& phi_i, const std::vector<int>& nbrs,
                    const std::vector<Vec3>& phi_prev, const ShapeSolverConfig& cfg);

struct VertexShapeStep {
  Vec3 delta = Vec3::Zero();
  bool singular = false;
};

/// One vertex of the decoupled shape problem, neighbors frozen at the
/// previous iterate.
struct VertexShapeProblem {
  Vec3 dr_dphi = Vec3::Zero();   // data-term gradient; zero when unobserved
  double r = 0.0;                // point-plane residual; zero when unobserved
  Vec3 phi = Vec3::Zero();       // current offset
  Vec3 nbr_delta = Vec3::Zero(); // sum over neighbors of (phi - phi_n)
  int nbr_count = 0;
};

/// Damped 3x3 Gauss-Newton step of the stacked regularized residual (the
/// point-plane row plus the magnitude and smoothness penalty rows). The step
/// never increases the frozen-neighbor objective r^2 + lambda_phi |phi|^2 +
/// lambda_nbr sum |phi - phi_n|^2 for any lambda_w >= 0; the caller applies
/// phi_i <- phi_i - x.
VertexShapeStep solve_vertex(const VertexShapeProblem& problem, const ShapeSolverConfig& cfg);

struct ShapeIterStats {
  int iteration = 0;
  double mean_phi = 0.0;
  double max_phi = 0.0;
  double mean_abs_r_before = 0.0;
  double mean_abs_r_after = 0.0;
  int singular = 0;
};

/// Jacobi-style shape refinement: every iteration re-skins, re-associates and
/// solves all vertices against the previous Phi, then swaps buffers.
/// Unobserved vertices still relax under the regularizers.
void optimize_shape(TrackerState& state, const CloudFrame& frame, const Intrinsics& intr,
                    const ShapeSolverConfig& cfg, const AssocConfig& assoc_cfg, int threads,
                    std::vector<ShapeIterStats>* stats = nullptr);

}  // namespace warptrack
