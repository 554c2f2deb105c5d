#include "warptrack/tracker.hpp"

namespace warptrack {

std::string to_string(TrackMode mode) {
  switch (mode) {
    case TrackMode::dynamic: return "dynamic";
    case TrackMode::shape_match: return "shape-match";
    case TrackMode::smooth_bind: return "smooth-bind";
    case TrackMode::rigid: return "rigid";
  }
  return "?";
}

TrackMode parse_track_mode(const std::string& name) {
  if (name == "dynamic") return TrackMode::dynamic;
  if (name == "shape-match") return TrackMode::shape_match;
  if (name == "smooth-bind") return TrackMode::smooth_bind;
  if (name == "rigid") return TrackMode::rigid;
  throw ValidationError("unknown mode '" + name +
                        "' (expected dynamic|shape-match|smooth-bind|rigid)");
}

ModelBundle rigidify(const ModelBundle& bundle) {
  ModelBundle out = bundle;
  for (std::size_t i = 0; i < out.mesh.weights.size(); ++i) {
    const VertexWeights& w = bundle.mesh.weights[i];
    int dom = 0;
    double best = -1.0;
    for (int s = 0; s < w.count; ++s) {
      const WeightEntry& e = w.entry[static_cast<std::size_t>(s)];
      if (e.w > best || (e.w == best && e.link < dom)) {
        best = e.w;
        dom = e.link;
      }
    }
    VertexWeights hard;
    hard.add(dom, 1.0);
    out.mesh.weights[i] = hard;
  }
  std::fill(out.mesh.phi.begin(), out.mesh.phi.end(), Vec3::Zero());
  return out;
}

TrackerState make_tracker(const ModelBundle& bundle, const Pose& init) {
  TrackerState state;
  state.skeleton = &bundle.skeleton;
  state.mesh = bundle.mesh;
  state.theta = init.size() == bundle.skeleton.joint_count() ? init
                                                             : bundle.skeleton.zero_pose();
  return state;
}

FrameStats track_frame(TrackerState& state, const CloudFrame& frame, const Intrinsics& intr,
                       const TrackConfig& cfg) {
  FrameStats stats;
  stats.frame = state.frame_index;

  optimize_pose(state, frame, intr, cfg.kin, cfg.assoc, cfg.threads, &stats.kin);

  const bool shape_now = cfg.mode == TrackMode::dynamic ||
                         (cfg.mode == TrackMode::shape_match && state.frame_index == 0);
  if (shape_now)
    optimize_shape(state, frame, intr, cfg.shape, cfg.assoc, cfg.threads, &stats.shape);

  ++state.frame_index;
  return stats;
}

TrackOutputs run_tracking(const ModelBundle& bundle, SequenceReader& reader,
                          const TrackConfig& cfg, const Pose& init,
                          const FrameCallback& callback) {
  TrackerState state = make_tracker(bundle, init);
  const Intrinsics intr = reader.header().intrinsics();

  TrackOutputs out;
  for (const Link& l : bundle.skeleton.links()) out.estimate.joint_names.push_back(l.name);

  for (int f = 0; f < reader.frame_count(); ++f) {
    const CloudFrame cloud = reader.read_frame(f);
    out.stats.push_back(track_frame(state, cloud, intr, cfg));

    const std::vector<DualQuat> fk = forward_kinematics(bundle.skeleton, state.theta);
    std::vector<Vec3> joints(fk.size());
    for (std::size_t j = 0; j < fk.size(); ++j) joints[j] = transform_point(fk[j], Vec3::Zero());
    out.estimate.theta.push_back(state.theta);
    out.estimate.joints.push_back(std::move(joints));
    out.estimate.visible.emplace_back(fk.size(), 1);

    if (callback) callback(state, f, cloud);
  }
  out.final_phi = state.mesh.phi;
  return out;
}

}  // namespace warptrack
