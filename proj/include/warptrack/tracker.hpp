#pragma once

#include <functional>

#include "warptrack/kinopt.hpp"
#include "warptrack/seqio.hpp"
#include "warptrack/shapeopt.hpp"

namespace warptrack {

std::string to_string(TrackMode mode);
TrackMode parse_track_mode(const std::string& name);

struct TrackConfig {
  TrackMode mode = TrackMode::dynamic;
  KinSolverConfig kin;
  ShapeSolverConfig shape;
  AssocConfig assoc;
  int threads = 1;
};

/// Replaces every weight row by its dominant link at weight one; the rigid
/// mesh-segment condition.
ModelBundle rigidify(const ModelBundle& bundle);

TrackerState make_tracker(const ModelBundle& bundle, const Pose& init);

struct FrameStats {
  int frame = 0;
  std::vector<KinIterStats> kin;
  std::vector<ShapeIterStats> shape;
};

/// One frame of the pipeline: pose optimization, then (mode dependent) shape
/// optimization. Advances state.frame_index.
FrameStats track_frame(TrackerState& state, const CloudFrame& frame, const Intrinsics& intr,
                       const TrackConfig& cfg);

struct TrackOutputs {
  GroundTruth estimate;  // per-frame theta and FK joint positions (vis = 1)
  std::vector<FrameStats> stats;
  std::vector<Vec3> final_phi;
};

using FrameCallback =
    std::function<void(const TrackerState& state, int frame, const CloudFrame& cloud)>;

/// Tracks the whole sequence from the given initial pose. The callback runs
/// after each frame with the updated state (used for per-frame evaluation).
TrackOutputs run_tracking(const ModelBundle& bundle, SequenceReader& reader,
                          const TrackConfig& cfg, const Pose& init,
                          const FrameCallback& callback = nullptr);

}  // namespace warptrack
