#pragma once

#include "warptrack/association.hpp"
#include "warptrack/skeleton.hpp"
#include "warptrack/skinmesh.hpp"

namespace warptrack {

enum class TrackMode { dynamic, shape_match, smooth_bind, rigid };

struct AssocConfig {
  int window_radius = 5;   // pixels
  double cutoff = 0.10;    // meters
};

/// Mutable tracking state. The mesh is a working copy of the template whose
/// phi field the shape optimizer updates; theta carries over between frames.
struct TrackerState {
  const Skeleton* skeleton = nullptr;
  SkinnedMesh mesh;
  Pose theta;
  int frame_index = 0;
};

}  // namespace warptrack
