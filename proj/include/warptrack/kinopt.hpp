#pragma once

#include <utility>
#include <vector>

#include "warptrack/tracker_state.hpp"

namespace warptrack {

struct KinSolverConfig {
  int iterations = 12;
  double lambda_k = 1e-2;     // damped least squares factor on diag(JtJ)
  double lambda_s = 1e-4;     // default-pose prior weight
  double diag_floor = 1e-9;   // absolute diagonal floor
  int assoc_refresh = 1;      // re-associate every N iterations
  bool clamp_limits = false;  // optional post-step clamp
  double limit = 0.0;         // symmetric joint limit when clamping
};

/// Dense normal equations of the pose problem.
struct NormalSystem {
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
};

/// Chain pieces that depend only on (skeleton, pose): world transforms, bind
/// offsets and the nonzero d_link_offset blocks per link.
struct PoseDerivatives {
  std::vector<DualQuat> fk;
  std::vector<DualQuat> offsets;
  std::vector<std::vector<std::pair<int, Vec8>>> dchain;  // per link: (theta, dH_jD/dtheta)
};

PoseDerivatives compute_pose_derivatives(const Skeleton& skel, const Pose& pose);

/// One row of dr/dTheta for vertex i: (-n_i) through the normalized-blend
/// transform, the weight blocks and the link-offset derivatives.
Eigen::VectorXd vertex_jacobian(const SkinnedMesh& mesh, int i, const PosedMesh& posed,
                                const PoseDerivatives& pd, const Skeleton& skel);

/// Diagonal of S: per joint, the number of vertices whose weighted links have
/// that joint as an ancestor. Depends only on the model.
Eigen::VectorXd influence_counts(const Skeleton& skel, const SkinnedMesh& mesh);

/// JtJ / Jtr over all associated vertices plus the (lambda_s S)^2 prior.
/// Deterministic for any thread count (fixed-block reduction).
NormalSystem accumulate_normal_system(const SkinnedMesh& mesh, const PosedMesh& posed,
                                      const AssociationResult& assoc, const PoseDerivatives& pd,
                                      const Skeleton& skel, const Eigen::VectorXd& s_diag,
                                      const KinSolverConfig& cfg, const Pose& pose, int threads);

/// Solves (JtJ + lambda_k diag(JtJ) + floor I) x = Jtr by Cholesky; the
/// caller applies theta <- theta - x. Throws NotPositiveDefinite on failure.
Eigen::VectorXd solve_step(const NormalSystem& sys, const KinSolverConfig& cfg);

struct KinIterStats {
  int iteration = 0;
  double residual_sum = 0.0;  // sum of squared point-plane residuals
  double step_norm = 0.0;     // |delta theta|
  int associated = 0;         // vertices with observations
  bool solver_skipped = false;
};

/// Runs `iterations` rounds of skin / associate / accumulate / solve on one
/// frame, updating state.theta in place. Solver degeneracies skip the
/// iteration, never abort the frame.
void optimize_pose(TrackerState& state, const CloudFrame& frame, const Intrinsics& intr,
                   const KinSolverConfig& cfg, const AssocConfig& assoc_cfg, int threads,
                   std::vector<KinIterStats>* stats = nullptr);

}  // namespace warptrack
