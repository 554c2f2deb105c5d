#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "warptrack/skeleton.hpp"

using namespace warptrack;

namespace {

DualQuat translation(double x, double y, double z) {
  DualQuat h;
  h.dual = {0, x * 0.5, y * 0.5, z * 0.5};
  return h;
}

Link make_link(const std::string& name, int parent, const DualQuat& offset, JointKind kind,
               const Axis& axis, int theta) {
  Link l;
  l.name = name;
  l.parent = parent;
  l.parent_offset = offset;
  l.joint = {kind, axis, theta};
  return l;
}

Skeleton chain2() {
  return Skeleton::build({
      make_link("a", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
      make_link("b", 0, translation(1, 0, 0), JointKind::hinge, Axis(0, 0, 1), 1),
  });
}

// Random tree: each link's parent is a random earlier link; mixed joints,
// random unit axes and offsets.
Skeleton random_tree(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Link> links;
  for (int j = 0; j < n; ++j) {
    Vec3 ax(uni(rng), uni(rng), uni(rng));
    while (ax.norm() < 1e-3) ax = Vec3(uni(rng), uni(rng), uni(rng));
    const JointKind kind = (rng() & 3u) == 0 ? JointKind::prismatic : JointKind::hinge;
    DualQuat offset = translation(uni(rng), uni(rng), uni(rng));
    if (j > 0) offset = compose(offset, hinge(uni(rng), Axis::normalized(Vec3(uni(rng), uni(rng), 1.5))));
    const int parent = j == 0 ? -1 : static_cast<int>(rng() % static_cast<unsigned>(j));
    links.push_back(make_link("l" + std::to_string(j), parent, offset, kind,
                              Axis::normalized(ax), j));
  }
  return Skeleton::build(std::move(links));
}

Pose random_pose(std::mt19937& rng, const Skeleton& s) {
  std::uniform_real_distribution<double> uni(-0.8, 0.8);
  Pose p = s.zero_pose();
  for (int i = 0; i < p.size(); ++i) p[i] = uni(rng);
  return p;
}

// Matrix-chain oracle for FK.
Mat4 fk_matrix(const Skeleton& s, const Pose& pose, int j) {
  const Link& l = s.link(j);
  const Mat4 local = oracle::dq_matrix(l.parent_offset) *
                     oracle::dq_matrix(joint_transform(l.joint, pose[l.joint.theta_index]));
  return l.parent < 0 ? local : fk_matrix(s, pose, l.parent) * local;
}

}  // namespace

TEST_CASE("fk at zero reproduces the bind pose") {
  std::mt19937 rng(3);
  const Skeleton s = random_tree(rng, 8);
  const auto fk = forward_kinematics(s, s.zero_pose());
  for (int j = 0; j < s.link_count(); ++j)
    CHECK((to_vec8(fk[j]) - to_vec8(s.bind_pose()[j])).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-link chain geometry") {
  const Skeleton s = chain2();
  Pose pose = s.zero_pose();
  pose[1] = std::numbers::pi / 2;
  const auto fk = forward_kinematics(s, pose);

  // End link origin at (1,0,0), yawed 90 degrees: local (1,0,0) -> world (1,1,0).
  const Vec3 origin = transform_point(fk[1], Vec3::Zero());
  CHECK(origin.isApprox(Vec3(1, 0, 0), 1e-12));
  const Vec3 tip = transform_point(fk[1], Vec3(1, 0, 0));
  CHECK(tip.isApprox(Vec3(1, 1, 0), 1e-12));
}

TEST_CASE("prismatic child placement") {
  Skeleton s = Skeleton::build({
      make_link("a", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
      make_link("b", 0, translation(0.5, 0, 0), JointKind::prismatic, Axis(0, 0, 1), 1),
  });
  Pose pose = s.zero_pose();
  pose[0] = 0.4;  // parent rotation
  pose[1] = 0.2;  // child translation along z
  const auto fk = forward_kinematics(s, pose);
  const Vec3 got = transform_point(fk[1], Vec3::Zero());
  const Vec3 want = oracle::matrix_apply(fk_matrix(s, pose, 1), Vec3::Zero());
  CHECK(got.isApprox(want, 1e-12));
  // Parent rotation applied to (offset + theta * axis).
  Eigen::AngleAxisd aa(0.4, Eigen::Vector3d(0, 0, 1));
  CHECK(got.isApprox(aa.toRotationMatrix() * Vec3(0.5, 0, 0.2), 1e-12));
}

TEST_CASE("fk matches the matrix-chain oracle on random trees") {
  std::mt19937 rng(5);
  for (int it = 0; it < 20; ++it) {
    const Skeleton s = random_tree(rng, 10);
    const Pose pose = random_pose(rng, s);
    const auto fk = forward_kinematics(s, pose);
    for (int j = 0; j < s.link_count(); ++j) {
      CHECK(fk[j].is_unit(1e-9));
      CHECK((to_matrix(fk[j]) - fk_matrix(s, pose, j)).cwiseAbs().maxCoeff() <= 1e-12);
      // Composition consistency.
      const Link& l = s.link(j);
      const DualQuat local = compose(l.parent_offset, joint_transform(l.joint, pose[l.joint.theta_index]));
      const DualQuat want = l.parent < 0 ? local : compose(fk[l.parent], local);
      CHECK((to_vec8(fk[j]) - to_vec8(want)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("link offsets are identity at zero and consistent with fk") {
  std::mt19937 rng(7);
  const Skeleton s = random_tree(rng, 9);
  const auto off0 = link_offsets(s, s.zero_pose());
  for (const DualQuat& h : off0)
    CHECK((to_vec8(h) - to_vec8(DualQuat::identity())).cwiseAbs().maxCoeff() <= 1e-12);

  const Pose pose = random_pose(rng, s);
  const auto fk = forward_kinematics(s, pose);
  const auto off = link_offsets(s, fk);
  for (int j = 0; j < s.link_count(); ++j) {
    // compose(H_jD, bind_j) = H_{0,j}
    const DualQuat recon = compose(off[j], s.bind_pose()[j]);
    CHECK((to_vec8(recon) - to_vec8(fk[j])).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("ancestors") {
  const Skeleton chain = Skeleton::build({
      make_link("a", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
      make_link("b", 0, translation(1, 0, 0), JointKind::hinge, Axis(0, 0, 1), 1),
      make_link("c", 1, translation(1, 0, 0), JointKind::hinge, Axis(0, 0, 1), 2),
  });
  CHECK(chain.ancestors(0) == std::vector<int>{0});
  CHECK(chain.ancestors(2) == std::vector<int>{0, 1, 2});

  const Skeleton tree = Skeleton::build({
      make_link("root", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
      make_link("left", 0, translation(1, 0, 0), JointKind::hinge, Axis(0, 0, 1), 1),
      make_link("right", 0, translation(-1, 0, 0), JointKind::hinge, Axis(0, 0, 1), 2),
  });
  const auto& anc = tree.ancestors(1);
  CHECK(std::find(anc.begin(), anc.end(), 2) == anc.end());  // sibling never appears
}

TEST_CASE("skeleton validation") {
  CHECK_THROWS_AS(Skeleton::build({}), ValidationError);

  // Forward parent / cycle.
  CHECK_THROWS_WITH_AS(
      Skeleton::build({
          make_link("a", 1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
          make_link("b", 0, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 1),
      }),
      doctest::Contains("cycle"), ValidationError);

  // Duplicate theta index.
  CHECK_THROWS_AS(Skeleton::build({
                      make_link("a", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
                      make_link("b", 0, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
                  }),
                  ValidationError);

  // Two roots.
  CHECK_THROWS_AS(Skeleton::build({
                      make_link("a", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
                      make_link("b", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 1),
                  }),
                  ValidationError);
}

TEST_CASE("d_link_offset: trivial cases") {
  const Skeleton tree = Skeleton::build({
      make_link("root", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0),
      make_link("left", 0, translation(1, 0, 0), JointKind::hinge, Axis(0, 1, 0), 1),
      make_link("right", 0, translation(-1, 0, 0), JointKind::hinge, Axis(1, 0, 0), 2),
  });
  const Pose pose = tree.zero_pose();
  const auto fk = forward_kinematics(tree, pose);

  // Non-ancestor block is zero.
  CHECK(d_link_offset(tree, pose, fk, 1, 2).cwiseAbs().maxCoeff() == 0.0);

  // Single link with identity bind at theta=0 collapses to d_hinge.
  const Skeleton single = Skeleton::build(
      {make_link("only", -1, DualQuat::identity(), JointKind::hinge, Axis(0, 0, 1), 0)});
  const auto fk1 = forward_kinematics(single, single.zero_pose());
  const Vec8 got = d_link_offset(single, single.zero_pose(), fk1, 0, 0);
  CHECK((got - d_hinge(0.0, Axis(0, 0, 1))).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("d_link_offset matches finite differences on random 10-link trees") {
  std::mt19937 rng(11);
  for (int it = 0; it < 6; ++it) {
    const Skeleton s = random_tree(rng, 10);
    const Pose pose = random_pose(rng, s);
    const auto fk = forward_kinematics(s, pose);
    for (int j = 0; j < s.link_count(); ++j) {
      for (int k = 0; k < s.joint_count(); ++k) {
        const Vec8 got = d_link_offset(s, pose, fk, j, k);
        const Vec8 want = oracle::central_difference(
            [&](double x) {
              Pose p = pose;
              p[k] = x;
              return to_vec8(link_offsets(s, p)[j]);
            },
            pose[k]);
        const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
        CHECK((got - want).cwiseAbs().maxCoeff() / scale <= 1e-6);
      }
    }
  }
}

TEST_CASE("fk is deterministic") {
  std::mt19937 rng(13);
  const Skeleton s = random_tree(rng, 10);
  const Pose pose = random_pose(rng, s);
  const auto a = forward_kinematics(s, pose);
  const auto b = forward_kinematics(s, pose);
  for (int j = 0; j < s.link_count(); ++j)
    CHECK((to_vec8(a[j]) - to_vec8(b[j])).cwiseAbs().maxCoeff() == 0.0);
}
