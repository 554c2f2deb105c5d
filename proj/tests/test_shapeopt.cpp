#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "warptrack/shapeopt.hpp"
#include "warptrack/synth.hpp"
#include "warptrack/tracker.hpp"

using namespace warptrack;

TEST_CASE("shape_residual hand arithmetic") {
  ShapeSolverConfig cfg;
  cfg.lambda_phi = 1.0;
  cfg.lambda_nbr = 1.0;
  std::vector<Vec3> phi(5, Vec3::Zero());
  const std::vector<int> nbrs = {1, 2, 3, 4};

  // Phi = 0 everywhere: regularizers vanish.
  CHECK(shape_residual(0.123, Vec3::Zero(), nbrs, phi, cfg) == doctest::Approx(0.123));

  // r=0, phi_i=(0.1,0,0), neighbors zero: 0.01 + 4 * 0.01 = 0.05.
  CHECK(shape_residual(0.0, Vec3(0.1, 0, 0), nbrs, phi, cfg) == doctest::Approx(0.05));

  // Constant field: the neighbor term is invariant.
  std::vector<Vec3> shifted(5, Vec3(0.3, -0.2, 0.1));
  CHECK(shape_residual(0.0, Vec3(0.3, -0.2, 0.1), nbrs, shifted, cfg) ==
        doctest::Approx(cfg.lambda_phi * Vec3(0.3, -0.2, 0.1).squaredNorm()));
}

TEST_CASE("shape_gradient matches finite differences of the residual") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> uni(-0.05, 0.05);
  ShapeSolverConfig cfg;
  cfg.lambda_phi = 2.0;
  cfg.lambda_nbr = 5.0;

  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Vec3> phi(6);
    for (Vec3& p : phi) p = Vec3(uni(rng), uni(rng), uni(rng));
    const std::vector<int> nbrs = {1, 3, 4, 5};
    const Vec3 dr_dphi(uni(rng) * 20, uni(rng) * 20, uni(rng) * 20);
    const double r = uni(rng);

    const Vec3 got = shape_gradient(dr_dphi, phi[0], nbrs, phi, cfg);
    for (int c = 0; c < 3; ++c) {
      const double want = oracle::central_difference(
          [&](double x) {
            Vec3 p = phi[0];
            p[c] = x;
            // The data term is linear in phi along dr_dphi.
            const double r_shift = r + dr_dphi[c] * (x - phi[0][c]);
            return shape_residual(r_shift, p, nbrs, phi, cfg);
          },
          phi[0][c]);
      CHECK(std::abs(got[c] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("solve_vertex: rank-one system lands on the observed plane") {
  ShapeSolverConfig cfg;
  cfg.lambda_phi = 0.0;
  cfg.lambda_nbr = 0.0;
  cfg.lambda_w = 0.0;
  cfg.diag_floor = 1e-12;

  // Identity pose: dr/dphi = -n with n = (0,0,1); r = 0.5.
  VertexShapeProblem p;
  p.dr_dphi = Vec3(0, 0, -1);
  p.r = 0.5;
  p.nbr_count = 4;
  const VertexShapeStep step = solve_vertex(p, cfg);
  REQUIRE_FALSE(step.singular);
  const Vec3 new_phi = Vec3::Zero() - step.delta;
  CHECK(new_phi.isApprox(Vec3(0, 0, 0.5), 1e-6));
}

TEST_CASE("solve_vertex: zero residual and zero phi is a fixed point") {
  ShapeSolverConfig cfg;
  const VertexShapeStep step = solve_vertex(VertexShapeProblem{}, cfg);
  CHECK(step.delta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("per-vertex step never increases the local objective") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(-0.03, 0.03);

  for (double lambda_w : {0.0, 1e-2, 1.0}) {
    ShapeSolverConfig cfg;
    cfg.lambda_phi = 1.0;
    cfg.lambda_nbr = 2.0;
    cfg.lambda_w = lambda_w;

    int worse = 0;
    for (int rep = 0; rep < 500; ++rep) {
      std::vector<Vec3> phi(5);
      for (Vec3& p : phi) p = Vec3(uni(rng), uni(rng), uni(rng));
      const std::vector<int> nbrs = {1, 2, 3, 4};
      Vec3 n(uni(rng), uni(rng), uni(rng) + 0.5);
      n.normalize();
      const double gap = uni(rng) * 2;

      auto objective = [&](const Vec3& p) {
        // r is linear in phi along n for a frozen target plane.
        const double r = gap - n.dot(p - phi[0]);
        double obj = r * r + cfg.lambda_phi * p.squaredNorm();
        for (int nb : nbrs)
          obj += cfg.lambda_nbr * (p - phi[static_cast<std::size_t>(nb)]).squaredNorm();
        return obj;
      };

      VertexShapeProblem problem;
      problem.dr_dphi = -n;
      problem.r = gap;
      problem.phi = phi[0];
      problem.nbr_count = 4;
      for (int nb : nbrs) problem.nbr_delta += phi[0] - phi[static_cast<std::size_t>(nb)];
      const VertexShapeStep step = solve_vertex(problem, cfg);
      REQUIRE_FALSE(step.singular);
      if (objective(phi[0] - step.delta) > objective(phi[0]) + 1e-12) ++worse;
    }
    CHECK(worse == 0);
  }
}

namespace {

CloudFrame empty_frame(const Intrinsics& intr) {
  CloudFrame f;
  f.width = intr.width;
  f.height = intr.height;
  f.points.assign(static_cast<std::size_t>(intr.width) * intr.height, Vec3::Zero());
  f.valid.assign(f.points.size(), 0);
  return f;
}

}  // namespace

TEST_CASE("optimize_shape relaxes phi toward zero without associations") {
  ModelBundle sphere = make_sphere_rig(0.15, 12, 16, 1.2);
  Intrinsics intr;
  TrackerState state = make_tracker(sphere, sphere.skeleton.zero_pose());
  for (Vec3& p : state.mesh.phi) p = Vec3(0.01, -0.005, 0.02);

  ShapeSolverConfig cfg;
  cfg.iterations = 1;
  const CloudFrame frame = empty_frame(intr);
  double prev = 1e9;
  for (int it = 0; it < 150; ++it) {
    optimize_shape(state, frame, intr, cfg, AssocConfig{}, 1, nullptr);
    double mean = 0;
    for (const Vec3& p : state.mesh.phi) mean += p.norm();
    mean /= static_cast<double>(state.mesh.phi.size());
    CHECK(mean < prev);
    prev = mean;
  }
  CHECK(prev < 0.005);
}

TEST_CASE("optimize_shape shrinks offsets only mildly when observations sit on the surface") {
  // Observations exactly on the current (warped) surface: the only pull on
  // phi comes from the regularizers, bounded by the closed-form single-step
  // shrinkage of the damped rank-one system.
  ModelBundle sphere = make_sphere_rig(0.15, 16, 24, 1.2);
  Intrinsics intr;
  TrackerState state = make_tracker(sphere, sphere.skeleton.zero_pose());
  const Vec3 center(0, 0, 1.2);
  const double bump = 0.01;
  for (std::size_t i = 0; i < state.mesh.phi.size(); ++i)
    state.mesh.phi[i] = (state.mesh.v0[i] - center).normalized() * bump;

  const CloudFrame frame = render_frame(sphere, sphere.skeleton.zero_pose(), state.mesh.phi,
                                        intr, NoiseSpec{});
  ShapeSolverConfig cfg;
  cfg.iterations = 1;

  // Measure the residual actually seen (raster discretization, not zero).
  const PosedMesh posed = skin(state.mesh, link_offsets(sphere.skeleton, state.theta));
  const AssociationResult assoc = associate(frame, intr, posed, 5, 0.10);
  double max_r = 0.0;
  for (std::size_t i = 0; i < assoc.residual.size(); ++i)
    if (assoc.count[i] > 0) max_r = std::max(max_r, std::abs(assoc.residual[i]));
  double max_nbr = 0.0;
  for (std::size_t i = 0; i < state.mesh.phi.size(); ++i) {
    Vec3 d = Vec3::Zero();
    for (int n : state.mesh.neighbors[i])
      d += state.mesh.phi[i] - state.mesh.phi[static_cast<std::size_t>(n)];
    max_nbr = std::max(max_nbr, d.norm());
  }

  std::vector<Vec3> before = state.mesh.phi;
  optimize_shape(state, frame, intr, cfg, AssocConfig{}, 1, nullptr);

  // Per-step bound: |delta| <= (|r| + lambda_phi |phi| + lambda_nbr |sum
  // nbr delta|) / (smallest eigenvalue of the damped system).
  double worst = 0.0;
  for (std::size_t i = 0; i < state.mesh.phi.size(); ++i)
    worst = std::max(worst, (state.mesh.phi[i] - before[i]).norm());
  const double reg = cfg.lambda_phi + 4 * cfg.lambda_nbr;
  const double analytic = (max_r + cfg.lambda_phi * bump + cfg.lambda_nbr * max_nbr) / reg;
  CHECK(worst <= analytic + 1e-9);
  CHECK(worst <= 0.002);  // and it is small in absolute terms
}

TEST_CASE("jacobi updates are independent of vertex processing order") {
  // Permuting the vertex storage (and mesh data with it) must not change the
  // resulting phi values: updates only read the previous iterate.
  ModelBundle sphere = make_sphere_rig(0.12, 10, 14, 1.1);
  Intrinsics intr;
  const CloudFrame frame =
      render_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, NoiseSpec{});

  // Reference run.
  TrackerState a = make_tracker(sphere, sphere.skeleton.zero_pose());
  ShapeSolverConfig cfg;
  cfg.iterations = 2;
  optimize_shape(a, frame, intr, cfg, AssocConfig{}, 1, nullptr);

  // Permuted run: reverse vertex order.
  ModelBundle perm = sphere;
  const std::size_t nv = sphere.mesh.v0.size();
  std::vector<int> remap(nv);
  for (std::size_t i = 0; i < nv; ++i) remap[i] = static_cast<int>(nv - 1 - i);
  ModelBundle& p = perm;
  for (std::size_t i = 0; i < nv; ++i) {
    p.mesh.v0[static_cast<std::size_t>(remap[i])] = sphere.mesh.v0[i];
    p.mesh.weights[static_cast<std::size_t>(remap[i])] = sphere.mesh.weights[i];
  }
  p.mesh.polys.clear();
  for (const auto& poly : sphere.mesh.polys) {
    std::vector<int> q;
    for (int vi : poly) q.push_back(remap[static_cast<std::size_t>(vi)]);
    p.mesh.polys.push_back(q);
  }
  p.mesh.phi.clear();
  p.mesh.finalize();
  p.mesh.neighbors.assign(nv, {});
  for (std::size_t i = 0; i < nv; ++i) {
    std::vector<int> nb;
    for (int x : sphere.mesh.neighbors[i]) nb.push_back(remap[static_cast<std::size_t>(x)]);
    p.mesh.neighbors[static_cast<std::size_t>(remap[i])] = nb;
  }

  TrackerState b = make_tracker(perm, perm.skeleton.zero_pose());
  optimize_shape(b, frame, intr, cfg, AssocConfig{}, 1, nullptr);

  double worst = 0.0;
  for (std::size_t i = 0; i < nv; ++i)
    worst = std::max(worst,
                     (a.mesh.phi[i] - b.mesh.phi[static_cast<std::size_t>(remap[i])]).norm());
  CHECK(worst <= 1e-12);
}

TEST_CASE("dented sphere: shape optimization reduces reconstruction error") {
  ModelBundle sphere = make_sphere_rig(0.15, 20, 28, 1.2);
  Intrinsics intr;

  PhiAnimation dents;
  dents.dents.push_back({Vec3(0, 0, -1), 0.02, 0.5});
  const std::vector<Vec3> target_phi = dents.eval(sphere.mesh, 0, 1);
  const CloudFrame frame =
      render_frame(sphere, sphere.skeleton.zero_pose(), target_phi, intr, NoiseSpec{});

  TrackerState state = make_tracker(sphere, sphere.skeleton.zero_pose());
  ShapeSolverConfig cfg;

  auto mean_abs_residual = [&]() {
    const PosedMesh posed =
        skin(state.mesh, link_offsets(sphere.skeleton, state.theta));
    const AssociationResult assoc = associate(frame, intr, posed, 5, 0.10);
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < assoc.residual.size(); ++i)
      if (assoc.count[i] > 0) {
        sum += std::abs(assoc.residual[i]);
        ++n;
      }
    return n ? sum / n : 0.0;
  };

  const double before = mean_abs_residual();
  for (int f = 0; f < 10; ++f) optimize_shape(state, frame, intr, cfg, AssocConfig{}, 2, nullptr);
  const double after = mean_abs_residual();
  CHECK(after < before);
  CHECK(after < 0.002);
}
