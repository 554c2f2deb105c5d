#include "warptrack/association.hpp"

#include <cmath>
#include <limits>

#include "warptrack/parallel.hpp"

namespace warptrack {

int CloudFrame::valid_count() const {
  int n = 0;
  for (std::uint8_t v : valid) n += v;
  return n;
}

double AssociationResult::residual_squared_sum() const {
  double s = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i)
    if (count[i] > 0) s += residual[i] * residual[i];
  return s;
}

int AssociationResult::associated_vertices() const {
  int n = 0;
  for (int c : count) n += c > 0;
  return n;
}

std::optional<PixelCoord> project(const Intrinsics& intr, const Vec3& p) {
  if (p.z() <= 0.0) return std::nullopt;
  const double u = intr.fx * p.x() / p.z() + intr.cx;
  const double v = intr.fy * p.y() / p.z() + intr.cy;
  const long ui = std::lround(u);
  const long vi = std::lround(v);
  if (ui < 0 || vi < 0 || ui >= intr.width || vi >= intr.height) return std::nullopt;
  return PixelCoord{static_cast<int>(ui), static_cast<int>(vi)};
}

VertexBuckets bucket_occupancy(const PosedMesh& posed, const Intrinsics& intr) {
  const std::size_t npix = static_cast<std::size_t>(intr.width) * static_cast<std::size_t>(intr.height);
  VertexBuckets b;
  b.width = intr.width;
  b.height = intr.height;

  const std::size_t nv = posed.v.size();
  std::vector<int> pixel(nv, -1);
  std::vector<int> counts(npix, 0);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!posed.valid[i]) continue;
    if (posed.n[i].dot(posed.v[i]) > 0.0) continue;  // back-facing in camera frame
    const auto pc = project(intr, posed.v[i]);
    if (!pc) continue;
    const int px = pc->v * intr.width + pc->u;
    pixel[i] = px;
    ++counts[static_cast<std::size_t>(px)];
  }

  b.offsets.assign(npix + 1, 0);
  for (std::size_t p = 0; p < npix; ++p) b.offsets[p + 1] = b.offsets[p] + counts[p];
  b.items.assign(static_cast<std::size_t>(b.offsets[npix]), 0);
  std::vector<int> cursor(b.offsets.begin(), b.offsets.end() - 1);
  for (std::size_t i = 0; i < nv; ++i)
    if (pixel[i] >= 0)
      b.items[static_cast<std::size_t>(cursor[static_cast<std::size_t>(pixel[i])]++)] =
          static_cast<int>(i);
  return b;
}

std::vector<int> associate_winners(const CloudFrame& frame, const VertexBuckets& buckets,
                                   const PosedMesh& posed, int window_radius, double cutoff,
                                   int threads) {
  const std::size_t npts = frame.points.size();
  std::vector<int> winner(npts, -1);
  const double cutoff_sq = cutoff * cutoff;

  parallel_blocks(npts, 2048, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t pi = lo; pi < hi; ++pi) {
      if (!frame.valid[pi]) continue;
      const Vec3& p = frame.points[pi];
      const int pu = static_cast<int>(pi % static_cast<std::size_t>(frame.width));
      const int pv = static_cast<int>(pi / static_cast<std::size_t>(frame.width));

      double best_sq = std::numeric_limits<double>::infinity();
      int best = -1;
      const int u0 = std::max(0, pu - window_radius);
      const int u1 = std::min(buckets.width - 1, pu + window_radius);
      const int v0 = std::max(0, pv - window_radius);
      const int v1 = std::min(buckets.height - 1, pv + window_radius);
      for (int v = v0; v <= v1; ++v) {
        // Buckets of one row are contiguous in the CSR arrays, so the whole
        // window row is a single item span.
        const std::size_t row = static_cast<std::size_t>(v) * static_cast<std::size_t>(buckets.width);
        const int s0 = buckets.offsets[row + static_cast<std::size_t>(u0)];
        const int s1 = buckets.offsets[row + static_cast<std::size_t>(u1) + 1];
        for (int s = s0; s < s1; ++s) {
          const int vi = buckets.items[static_cast<std::size_t>(s)];
          const double d = (posed.v[static_cast<std::size_t>(vi)] - p).squaredNorm();
          if (d > cutoff_sq) continue;
          if (d < best_sq || (d == best_sq && vi < best)) {  // ties go to the lower index
            best_sq = d;
            best = vi;
          }
        }
      }
      winner[pi] = best;
    }
  });
  return winner;
}

AssociationResult associate(const CloudFrame& frame, const Intrinsics& intr,
                            const PosedMesh& posed, int window_radius, double cutoff,
                            int threads) {
  const std::size_t nv = posed.v.size();
  AssociationResult r;
  r.p_tilde.assign(nv, Vec3::Zero());
  r.count.assign(nv, 0);
  r.residual.assign(nv, 0.0);

  const VertexBuckets buckets = bucket_occupancy(posed, intr);
  const std::vector<int> winner =
      associate_winners(frame, buckets, posed, window_radius, cutoff, threads);

  // Sums accumulate in observation index order, keeping the averages
  // independent of the parallel schedule above.
  for (std::size_t pi = 0; pi < winner.size(); ++pi) {
    const int w = winner[pi];
    if (w < 0) continue;
    r.p_tilde[static_cast<std::size_t>(w)] += frame.points[pi];
    ++r.count[static_cast<std::size_t>(w)];
  }
  for (std::size_t i = 0; i < nv; ++i) {
    if (r.count[i] == 0) continue;
    r.p_tilde[i] /= static_cast<double>(r.count[i]);
    r.residual[i] = posed.n[i].dot(r.p_tilde[i] - posed.v[i]);
  }
  return r;
}

}  // namespace warptrack
