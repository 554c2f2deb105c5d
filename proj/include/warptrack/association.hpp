#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "warptrack/skinmesh.hpp"

namespace warptrack {

struct Intrinsics {
  double fx = 365.456, fy = 365.456;
  double cx = 256.0, cy = 212.0;
  int width = 512, height = 424;
};

/// Organized point cloud: one point per pixel of a depth frame, camera frame,
/// meters. Invalid entries are never read; valid points have z > 0.
struct CloudFrame {
  int width = 0, height = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(u);
  }
  int valid_count() const;
};

struct PixelCoord {
  int u = 0, v = 0;
};

/// Pinhole projection to the nearest integer pixel bucket; empty when the
/// point is behind the camera or lands outside the grid.
std::optional<PixelCoord> project(const Intrinsics& intr, const Vec3& p);

/// Per-pixel vertex lists in CSR form; entries within a bucket are sorted by
/// vertex index. Invalid and back-facing vertices (n . v > 0) are excluded.
struct VertexBuckets {
  int width = 0, height = 0;
  std::vector<int> offsets;
  std::vector<int> items;
};

VertexBuckets bucket_occupancy(const PosedMesh& posed, const Intrinsics& intr);

struct AssociationResult {
  std::vector<Vec3> p_tilde;      // mean of the observations won by each vertex
  std::vector<int> count;         // observations per vertex
  std::vector<double> residual;   // point-plane residual, defined where count > 0

  double residual_squared_sum() const;
  int associated_vertices() const;
};

/// Projective data association: buckets the visible vertices by pixel, then
/// finds for every valid observation the Euclidean-nearest bucketed vertex in
/// a (2w+1)^2 pixel window, ignoring matches beyond `cutoff`. Observations
/// won by a vertex are averaged and reduced to a point-plane residual
/// r_i = n_i . (p~_i - v_i).
AssociationResult associate(const CloudFrame& frame, const Intrinsics& intr,
                            const PosedMesh& posed, int window_radius, double cutoff,
                            int threads = 1);

/// Winning vertex per observation (-1 when none); exposed for the brute-force
/// oracle tests and reused by associate itself.
std::vector<int> associate_winners(const CloudFrame& frame, const VertexBuckets& buckets,
                                   const PosedMesh& posed, int window_radius, double cutoff,
                                   int threads);

}  // namespace warptrack
