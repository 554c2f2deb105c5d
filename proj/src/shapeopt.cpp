#include "warptrack/shapeopt.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "warptrack/kinopt.hpp"
#include "warptrack/parallel.hpp"

namespace warptrack {

double shape_residual(double r, const Vec3& phi_i, const std::vector<int>& nbrs,
                      const std::vector<Vec3>& phi_prev, const ShapeSolverConfig& cfg) {
  double r_hat = r + cfg.lambda_phi * phi_i.squaredNorm();
  for (int n : nbrs) r_hat += cfg.lambda_nbr * (phi_i - phi_prev[static_cast<std::size_t>(n)]).squaredNorm();
  return r_hat;
}

Vec3 shape_gradient(const Vec3& dr_dphi, const Vec3& phi_i, const std::vector<int>& nbrs,
                    const std::vector<Vec3>& phi_prev, const ShapeSolverConfig& cfg) {
  Vec3 g = dr_dphi + 2.0 * cfg.lambda_phi * phi_i;
  for (int n : nbrs) g += 2.0 * cfg.lambda_nbr * (phi_i - phi_prev[static_cast<std::size_t>(n)]);
  return g;
}

VertexShapeStep solve_vertex(const VertexShapeProblem& p, const ShapeSolverConfig& cfg) {
  VertexShapeStep step;
  // Stacked residual rows: the point-plane term with gradient dr_dphi, then
  // sqrt(lambda_phi) phi and sqrt(lambda_nbr) (phi - phi_n) per neighbor,
  // whose Jacobians are multiples of the identity.
  Mat3 a = p.dr_dphi * p.dr_dphi.transpose();
  const double reg = cfg.lambda_phi + cfg.lambda_nbr * p.nbr_count;
  a.diagonal().array() += reg;
  a.diagonal() += cfg.lambda_w * a.diagonal();
  a.diagonal().array() += cfg.diag_floor;

  const Vec3 b = p.dr_dphi * p.r + cfg.lambda_phi * p.phi + cfg.lambda_nbr * p.nbr_delta;
  if (!a.allFinite() || !b.allFinite()) {
    step.singular = true;
    return step;
  }
  Eigen::LLT<Mat3> llt(a);
  if (llt.info() != Eigen::Success) {
    step.singular = true;
    return step;
  }
  step.delta = llt.solve(b);
  return step;
}

void optimize_shape(TrackerState& state, const CloudFrame& frame, const Intrinsics& intr,
                    const ShapeSolverConfig& cfg, const AssocConfig& assoc_cfg, int threads,
                    std::vector<ShapeIterStats>* stats) {
  const Skeleton& skel = *state.skeleton;
  const std::size_t nv = state.mesh.v0.size();
  const std::size_t stats_base = stats ? stats->size() : 0;
  std::vector<Vec3> next(nv);

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::vector<DualQuat> offsets = link_offsets(skel, state.theta);
    const PosedMesh posed = skin(state.mesh, offsets, threads);
    const AssociationResult assoc =
        associate(frame, intr, posed, assoc_cfg.window_radius, assoc_cfg.cutoff, threads);

    ShapeIterStats st;
    st.iteration = it;
    double abs_r = 0.0;
    int observed = 0;
    for (std::size_t i = 0; i < nv; ++i)
      if (assoc.count[i] > 0) {
        abs_r += std::abs(assoc.residual[i]);
        ++observed;
      }
    st.mean_abs_r_before = observed > 0 ? abs_r / observed : 0.0;

    const std::vector<Vec3>& phi_prev = state.mesh.phi;
    std::vector<std::uint8_t> singular(nv, 0);

    parallel_for(nv, threads, [&](std::size_t i) {
      const std::vector<int>& nbrs = state.mesh.neighbors[i];
      VertexShapeProblem problem;
      problem.phi = phi_prev[i];
      problem.nbr_count = static_cast<int>(nbrs.size());
      for (int n : nbrs) problem.nbr_delta += phi_prev[i] - phi_prev[static_cast<std::size_t>(n)];
      if (assoc.count[i] > 0 && posed.valid[i]) {
        // dr/dphi = -(R^T n): the data term moves the vertex through the
        // rotation of its normalized blend.
        const BlendResult b = blend(offsets, state.mesh.weights[i]);
        if (b.ok) {
          problem.dr_dphi = -(rotation_matrix(b.raw).transpose() * posed.n[i]);
          problem.r = assoc.residual[i];
        }
      }
      const VertexShapeStep step = solve_vertex(problem, cfg);
      next[i] = phi_prev[i] - step.delta;
      singular[i] = step.singular;
    });

    state.mesh.phi.swap(next);  // simultaneous (Jacobi) update

    for (std::size_t i = 0; i < nv; ++i) st.singular += singular[i];
    double sum_phi = 0.0;
    for (const Vec3& p : state.mesh.phi) {
      const double n = p.norm();
      sum_phi += n;
      st.max_phi = std::max(st.max_phi, n);
    }
    st.mean_phi = nv > 0 ? sum_phi / static_cast<double>(nv) : 0.0;

    if (stats) stats->push_back(st);
  }

  if (stats && stats->size() > stats_base) {
    // One extra measurement pass so the last iteration reports its effect.
    const std::vector<DualQuat> offsets = link_offsets(skel, state.theta);
    const PosedMesh posed = skin(state.mesh, offsets, threads);
    const AssociationResult assoc =
        associate(frame, intr, posed, assoc_cfg.window_radius, assoc_cfg.cutoff, threads);
    double abs_r = 0.0;
    int observed = 0;
    for (std::size_t i = 0; i < nv; ++i)
      if (assoc.count[i] > 0) {
        abs_r += std::abs(assoc.residual[i]);
        ++observed;
      }
    const double after = observed > 0 ? abs_r / observed : 0.0;
    for (std::size_t s = stats_base; s + 1 < stats->size(); ++s)
      (*stats)[s].mean_abs_r_after = (*stats)[s + 1].mean_abs_r_before;
    stats->back().mean_abs_r_after = after;
  }
}

}  // namespace warptrack
