#include "warptrack/skeleton.hpp"

#include <algorithm>

namespace warptrack {

Skeleton Skeleton::build(std::vector<Link> links) {
  if (links.empty()) throw ValidationError("skeleton has no links");
  const int n = static_cast<int>(links.size());

  int roots = 0;
  std::vector<char> theta_seen(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    const Link& l = links[static_cast<std::size_t>(j)];
    if (l.parent < 0) {
      ++roots;
    } else {
      if (l.parent >= j)
        throw ValidationError("link '" + l.name +
                              "': links are not topologically sorted (cycle or forward parent)");
    }
    if (l.joint.theta_index < 0 || l.joint.theta_index >= n)
      throw ValidationError("link '" + l.name + "': theta index out of range");
    if (theta_seen[static_cast<std::size_t>(l.joint.theta_index)])
      throw ValidationError("link '" + l.name + "': duplicate theta index " +
                            std::to_string(l.joint.theta_index));
    theta_seen[static_cast<std::size_t>(l.joint.theta_index)] = 1;
  }
  if (roots != 1)
    throw ValidationError("skeleton must have exactly one root, found " + std::to_string(roots));

  Skeleton s;
  s.links_ = std::move(links);

  s.theta_to_link_.assign(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j)
    s.theta_to_link_[static_cast<std::size_t>(s.links_[static_cast<std::size_t>(j)].joint.theta_index)] = j;

  s.ancestors_.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::vector<int> path;
    for (int cur = j; cur >= 0; cur = s.links_[static_cast<std::size_t>(cur)].parent)
      path.push_back(s.links_[static_cast<std::size_t>(cur)].joint.theta_index);
    std::reverse(path.begin(), path.end());
    s.ancestors_[static_cast<std::size_t>(j)] = std::move(path);
  }

  s.bind_pose_ = forward_kinematics(s, s.zero_pose());
  return s;
}

DualQuat joint_transform(const Joint& joint, double theta) {
  return joint.kind == JointKind::hinge ? hinge(theta, joint.axis) : prismatic(theta, joint.axis);
}

std::vector<DualQuat> forward_kinematics(const Skeleton& skel, const Pose& pose) {
  if (pose.size() != skel.joint_count())
    throw LengthMismatch("pose has " + std::to_string(pose.size()) + " values, skeleton expects " +
                         std::to_string(skel.joint_count()));
  std::vector<DualQuat> fk(static_cast<std::size_t>(skel.link_count()));
  for (int j = 0; j < skel.link_count(); ++j) {
    const Link& l = skel.link(j);
    const DualQuat hj = joint_transform(l.joint, pose[l.joint.theta_index]);
    const DualQuat local = compose(l.parent_offset, hj);
    fk[static_cast<std::size_t>(j)] =
        l.parent < 0 ? local : compose(fk[static_cast<std::size_t>(l.parent)], local);
  }
  return fk;
}

std::vector<DualQuat> link_offsets(const Skeleton& skel, const std::vector<DualQuat>& fk) {
  std::vector<DualQuat> off(fk.size());
  for (std::size_t j = 0; j < fk.size(); ++j)
    off[j] = compose(fk[j], inverse(skel.bind_pose()[j]));
  return off;
}

std::vector<DualQuat> link_offsets(const Skeleton& skel, const Pose& pose) {
  return link_offsets(skel, forward_kinematics(skel, pose));
}

Vec8 d_link_offset(const Skeleton& skel, const Pose& pose, const std::vector<DualQuat>& fk,
                   int link_index, int theta_index) {
  const auto& anc = skel.ancestors(link_index);
  if (std::find(anc.begin(), anc.end(), theta_index) == anc.end()) return Vec8::Zero();

  const int k = skel.link_of_joint(theta_index);
  const Link& lk = skel.link(k);

  // H_{0,P(k)} * H_{P(k),k} evaluated from the cached world transforms.
  const DualQuat pre = lk.parent < 0
                           ? lk.parent_offset
                           : compose(fk[static_cast<std::size_t>(lk.parent)], lk.parent_offset);

  const double theta = pose[theta_index];
  const Vec8 dj = lk.joint.kind == JointKind::hinge ? d_hinge(theta, lk.joint.axis)
                                                    : d_prismatic(theta, lk.joint.axis);

  // H_{k,j} = inverse(H_{0,k}) * H_{0,j}; identity when j == k.
  const DualQuat k_to_j =
      compose(inverse(fk[static_cast<std::size_t>(k)]), fk[static_cast<std::size_t>(link_index)]);
  const DualQuat bind_inv = inverse(skel.bind_pose()[static_cast<std::size_t>(link_index)]);

  // Composition is bilinear, so threading the (non-unit) joint derivative
  // through the chain yields the exact derivative of H_{jD}.
  const DualQuat d = compose(compose(pre, from_vec8(dj)), compose(k_to_j, bind_inv));
  return to_vec8(d);
}

}  // namespace warptrack
