#pragma once

#include <string>
#include <vector>

#include "warptrack/dualquat.hpp"

namespace warptrack {

enum class JointKind { hinge, prismatic };

/// Single-axis joint; the axis is fixed, only theta changes over time.
/// Multi-DOF joints are modeled as chains of these with zero-length offsets.
struct Joint {
  JointKind kind = JointKind::hinge;
  Axis axis{0, 0, 1};
  int theta_index = -1;
};

struct Link {
  std::string name;
  int parent = -1;            // -1 for the root
  DualQuat parent_offset;     // fixed offset from the parent frame
  Joint joint;
};

using Pose = Eigen::VectorXd;

/// Kinematic tree. Links are stored topologically sorted (parent before
/// child); there is exactly one root and one pose value per link.
class Skeleton {
 public:
  Skeleton() = default;

  /// Validates structure, computes the bind pose as FK at theta = 0 and the
  /// ancestor joint lists. Throws ValidationError on a malformed tree.
  static Skeleton build(std::vector<Link> links);

  const std::vector<Link>& links() const { return links_; }
  const Link& link(int j) const { return links_[static_cast<std::size_t>(j)]; }
  int link_count() const { return static_cast<int>(links_.size()); }
  int joint_count() const { return static_cast<int>(links_.size()); }

  const std::vector<DualQuat>& bind_pose() const { return bind_pose_; }

  /// Joint (theta) indices on the root-to-j path, inclusive of j's own joint.
  const std::vector<int>& ancestors(int link_index) const {
    return ancestors_[static_cast<std::size_t>(link_index)];
  }

  /// Link driven by a given theta index.
  int link_of_joint(int theta_index) const {
    return theta_to_link_[static_cast<std::size_t>(theta_index)];
  }

  Pose zero_pose() const { return Pose::Zero(joint_count()); }

 private:
  std::vector<Link> links_;
  std::vector<DualQuat> bind_pose_;
  std::vector<std::vector<int>> ancestors_;
  std::vector<int> theta_to_link_;
};

/// Joint transform of one link at a given theta.
DualQuat joint_transform(const Joint& joint, double theta);

/// World transform H_{0,j} of every link, in link order.
std::vector<DualQuat> forward_kinematics(const Skeleton& skel, const Pose& pose);

/// Offsets from the bind pose, H_{jD} = H_{0,j} * inverse(bind_j); identity
/// for every link at theta = 0.
std::vector<DualQuat> link_offsets(const Skeleton& skel, const std::vector<DualQuat>& fk);
std::vector<DualQuat> link_offsets(const Skeleton& skel, const Pose& pose);

/// Derivative of H_{jD} with respect to theta_k as an 8-vector; zero when
/// theta_k is not an ancestor of link j.
Vec8 d_link_offset(const Skeleton& skel, const Pose& pose, const std::vector<DualQuat>& fk,
                   int link_index, int theta_index);

}  // namespace warptrack
