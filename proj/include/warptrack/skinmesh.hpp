#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "warptrack/dualquat.hpp"

namespace warptrack {

struct WeightEntry {
  int link = 0;
  double w = 0.0;
};

/// Sparse skin weights of one vertex: at most four links, weights in [0,1]
/// summing to one.
struct VertexWeights {
  std::array<WeightEntry, 4> entry{};
  int count = 0;

  void add(int link, double w) {
    entry[static_cast<std::size_t>(count++)] = {link, w};
  }
};

/// Template mesh bound to a skeleton. `polys` is the authored polygon list
/// (triangles and quads); `triangles` is derived from it and drives posing,
/// association and rendering. `phi` holds the per-vertex warp offsets applied
/// in the template frame before skinning.
struct SkinnedMesh {
  std::vector<Vec3> v0;
  std::vector<std::vector<int>> polys;
  std::vector<VertexWeights> weights;
  std::vector<std::vector<int>> neighbors;
  std::vector<Vec3> phi;

  // Derived by finalize():
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> vertex_tri_offsets;  // CSR vertex -> incident triangles
  std::vector<int> vertex_tri_items;

  int vertex_count() const { return static_cast<int>(v0.size()); }

  /// Triangulates polys (quads split along the shorter diagonal), builds the
  /// vertex/triangle adjacency and fills phi with zeros when absent.
  /// Does not touch `neighbors`; call build_neighbors for that.
  void finalize();
};

struct PosedMesh {
  std::vector<Vec3> v;
  std::vector<Vec3> n;
  std::vector<std::uint8_t> valid;  // blend succeeded and normal has support
};

/// Result of blending link offsets for one vertex. `raw` is the weighted sum
/// after antipodality sign correction (kept for the Jacobian chain), `posed`
/// the normalized unit transform. `sign[s]` is the correction applied to
/// weight entry s.
struct BlendResult {
  DualQuat raw;
  DualQuat posed;
  std::array<double, 4> sign{1, 1, 1, 1};
  bool ok = false;
};

/// Weighted blend of per-link bind offsets for one vertex; sign-flips
/// antipodal contributions against the first weighted link before summing.
BlendResult blend(const std::vector<DualQuat>& offsets, const VertexWeights& w);

/// Poses every vertex as normalize(blend) applied to (v0 + phi) and
/// recomputes unit vertex normals from the posed surface.
PosedMesh skin(const SkinnedMesh& mesh, const std::vector<DualQuat>& offsets, int threads = 1);

/// Same, with an explicit warp field instead of mesh.phi.
PosedMesh skin(const SkinnedMesh& mesh, const std::vector<DualQuat>& offsets,
               const std::vector<Vec3>& phi_override, int threads);

/// Area-weighted vertex normals: normalized sum of incident unnormalized face
/// cross products. Second return marks vertices with nonzero support.
std::pair<std::vector<Vec3>, std::vector<std::uint8_t>> compute_normals(
    const std::vector<Vec3>& v, const std::vector<std::array<int, 3>>& faces);

/// k nearest distinct vertices of every vertex in the default mesh, ties
/// broken by lower index. Exact.
std::vector<std::vector<int>> build_neighbors(const std::vector<Vec3>& v0, int k);

/// Catmull-Clark subdivision of the polygon mesh with skin-weight and phi
/// interpolation using the position scheme; weights are re-truncated to four
/// entries and renormalized. The result is finalized but has no neighbors.
SkinnedMesh subdivide(const SkinnedMesh& mesh, int iterations);

}  // namespace warptrack
