#include "warptrack/kinopt.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "warptrack/parallel.hpp"

namespace warptrack {

PoseDerivatives compute_pose_derivatives(const Skeleton& skel, const Pose& pose) {
  PoseDerivatives pd;
  pd.fk = forward_kinematics(skel, pose);
  pd.offsets = link_offsets(skel, pd.fk);
  pd.dchain.resize(static_cast<std::size_t>(skel.link_count()));
  for (int j = 0; j < skel.link_count(); ++j) {
    const auto& anc = skel.ancestors(j);
    auto& blocks = pd.dchain[static_cast<std::size_t>(j)];
    blocks.reserve(anc.size());
    for (int k : anc) blocks.emplace_back(k, d_link_offset(skel, pose, pd.fk, j, k));
  }
  return pd;
}

namespace {

// Fills a dense |Theta| row for vertex i; returns false when the vertex
// cannot contribute (invalid or degenerate blend).
bool fill_row(const SkinnedMesh& mesh, std::size_t i, const PosedMesh& posed,
              const PoseDerivatives& pd, Eigen::VectorXd& row) {
  row.setZero();
  if (!posed.valid[i]) return false;
  const BlendResult b = blend(pd.offsets, mesh.weights[i]);
  if (!b.ok) return false;

  const Vec3 rest = mesh.v0[i] + mesh.phi[i];
  const Mat38 dv_dh = d_normalized_transform(b.raw, rest);
  const Eigen::Matrix<double, 1, 8> r8 = -posed.n[i].transpose() * dv_dh;

  const VertexWeights& w = mesh.weights[i];
  for (int s = 0; s < w.count; ++s) {
    const double coeff = w.entry[static_cast<std::size_t>(s)].w * b.sign[static_cast<std::size_t>(s)];
    const auto& blocks = pd.dchain[static_cast<std::size_t>(w.entry[static_cast<std::size_t>(s)].link)];
    for (const auto& [k, d8] : blocks) row[k] += coeff * (r8 * d8)(0, 0);
  }
  return true;
}

}  // namespace

Eigen::VectorXd vertex_jacobian(const SkinnedMesh& mesh, int i, const PosedMesh& posed,
                                const PoseDerivatives& pd, const Skeleton& skel) {
  Eigen::VectorXd row(skel.joint_count());
  fill_row(mesh, static_cast<std::size_t>(i), posed, pd, row);
  return row;
}

Eigen::VectorXd influence_counts(const Skeleton& skel, const SkinnedMesh& mesh) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(skel.joint_count());
  std::vector<char> hit(static_cast<std::size_t>(skel.joint_count()));
  for (const VertexWeights& w : mesh.weights) {
    std::fill(hit.begin(), hit.end(), 0);
    for (int e = 0; e < w.count; ++e)
      for (int k : skel.ancestors(w.entry[static_cast<std::size_t>(e)].link))
        hit[static_cast<std::size_t>(k)] = 1;
    for (int k = 0; k < skel.joint_count(); ++k)
      if (hit[static_cast<std::size_t>(k)]) s[k] += 1.0;
  }
  return s;
}

NormalSystem accumulate_normal_system(const SkinnedMesh& mesh, const PosedMesh& posed,
                                      const AssociationResult& assoc, const PoseDerivatives& pd,
                                      const Skeleton& skel, const Eigen::VectorXd& s_diag,
                                      const KinSolverConfig& cfg, const Pose& pose, int threads) {
  const int nt = skel.joint_count();
  const std::size_t nv = mesh.v0.size();
  constexpr std::size_t kGrain = 256;
  const std::size_t nblocks = block_count(nv, kGrain);

  std::vector<Eigen::MatrixXd> block_jtj(nblocks);
  std::vector<Eigen::VectorXd> block_jtr(nblocks);

  parallel_blocks(nv, kGrain, threads, [&](std::size_t bi, std::size_t lo, std::size_t hi) {
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(nt, nt);
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(nt);
    Eigen::VectorXd row(nt);
    std::vector<int> support;
    for (std::size_t i = lo; i < hi; ++i) {
      if (assoc.count[i] == 0) continue;
      if (!fill_row(mesh, i, posed, pd, row)) continue;
      support.clear();
      for (int k = 0; k < nt; ++k)
        if (row[k] != 0.0) support.push_back(k);
      const double r = assoc.residual[i];
      for (int a : support) {
        jtr[a] += row[a] * r;
        for (int b : support) jtj(a, b) += row[a] * row[b];
      }
    }
    block_jtj[bi] = std::move(jtj);
    block_jtr[bi] = std::move(jtr);
  });

  NormalSystem sys;
  sys.jtj = Eigen::MatrixXd::Zero(nt, nt);
  sys.jtr = Eigen::VectorXd::Zero(nt);
  for (std::size_t b = 0; b < nblocks; ++b) {  // fixed order: thread-count independent
    sys.jtj += block_jtj[b];
    sys.jtr += block_jtr[b];
  }

  for (int k = 0; k < nt; ++k) {
    const double p = cfg.lambda_s * s_diag[k];
    sys.jtj(k, k) += p * p;
    sys.jtr[k] += p * p * pose[k];
  }
  return sys;
}

Eigen::VectorXd solve_step(const NormalSystem& sys, const KinSolverConfig& cfg) {
  Eigen::MatrixXd a = sys.jtj;
  a.diagonal() += cfg.lambda_k * sys.jtj.diagonal();
  a.diagonal().array() += cfg.diag_floor;
  if (!a.allFinite()) throw NotPositiveDefinite("normal equations contain non-finite values");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("Cholesky factorization of the damped system failed");
  return llt.solve(sys.jtr);
}

void optimize_pose(TrackerState& state, const CloudFrame& frame, const Intrinsics& intr,
                   const KinSolverConfig& cfg, const AssocConfig& assoc_cfg, int threads,
                   std::vector<KinIterStats>* stats) {
  const Skeleton& skel = *state.skeleton;
  const Eigen::VectorXd s_diag = influence_counts(skel, state.mesh);
  AssociationResult assoc;

  for (int it = 0; it < cfg.iterations; ++it) {
    const PoseDerivatives pd = compute_pose_derivatives(skel, state.theta);
    const PosedMesh posed = skin(state.mesh, pd.offsets, threads);
    const int refresh = std::max(1, cfg.assoc_refresh);
    if (it % refresh == 0) {
      assoc = associate(frame, intr, posed, assoc_cfg.window_radius, assoc_cfg.cutoff, threads);
    } else {
      // Correspondences are kept, but the residuals must follow the surface
      // as it moves between refreshes.
      for (std::size_t i = 0; i < assoc.residual.size(); ++i)
        if (assoc.count[i] > 0)
          assoc.residual[i] = posed.n[i].dot(assoc.p_tilde[i] - posed.v[i]);
    }

    KinIterStats st;
    st.iteration = it;
    st.residual_sum = assoc.residual_squared_sum();
    st.associated = assoc.associated_vertices();

    const NormalSystem sys =
        accumulate_normal_system(state.mesh, posed, assoc, pd, skel, s_diag, cfg, state.theta, threads);
    try {
      const Eigen::VectorXd x = solve_step(sys, cfg);
      state.theta -= x;
      if (cfg.clamp_limits && cfg.limit > 0.0)
        state.theta = state.theta.cwiseMax(-cfg.limit).cwiseMin(cfg.limit);
      st.step_norm = x.norm();
    } catch (const NotPositiveDefinite&) {
      st.solver_skipped = true;
    }
    if (stats) stats->push_back(st);
  }
}

}  // namespace warptrack
