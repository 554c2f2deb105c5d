#include "warptrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "warptrack/parallel.hpp"
#include "warptrack/synth.hpp"

namespace warptrack {

std::vector<double> default_thresholds(double max_threshold, int steps) {
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) t[static_cast<std::size_t>(i)] = max_threshold * i / steps;
  return t;
}

AccuracyCurve accuracy_curve(const std::vector<double>& distances,
                             const std::vector<double>& thresholds) {
  if (thresholds.size() < 2) throw LengthMismatch("accuracy curve needs at least two thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw ValidationError("thresholds must be strictly ascending");

  AccuracyCurve curve;
  curve.thresholds = thresholds;
  curve.fraction.resize(thresholds.size(), 0.0);
  if (!distances.empty()) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      std::size_t within = 0;
      for (double d : distances) within += d <= thresholds[i];
      curve.fraction[i] = static_cast<double>(within) / static_cast<double>(distances.size());
    }
  }
  double area = 0.0;
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    area += 0.5 * (curve.fraction[i] + curve.fraction[i - 1]) *
            (thresholds[i] - thresholds[i - 1]);
  curve.auc = area / (thresholds.back() - thresholds.front());
  return curve;
}

std::vector<double> joint_distances(const GroundTruth& estimate, const GroundTruth& truth,
                                    bool mean_subtract) {
  if (estimate.frame_count() != truth.frame_count())
    throw LengthMismatch("estimate has " + std::to_string(estimate.frame_count()) +
                         " frames, ground truth " + std::to_string(truth.frame_count()));
  if (estimate.joint_count() != truth.joint_count())
    throw LengthMismatch("estimate and ground truth label different joint sets");

  std::vector<double> distances;
  for (int f = 0; f < truth.frame_count(); ++f) {
    const auto& est = estimate.joints[static_cast<std::size_t>(f)];
    const auto& ref = truth.joints[static_cast<std::size_t>(f)];
    const auto& vis = truth.visible[static_cast<std::size_t>(f)];

    Vec3 est_mean = Vec3::Zero(), ref_mean = Vec3::Zero();
    if (mean_subtract) {
      int n = 0;
      for (std::size_t j = 0; j < vis.size(); ++j)
        if (vis[j]) {
          est_mean += est[j];
          ref_mean += ref[j];
          ++n;
        }
      if (n > 0) {
        est_mean /= n;
        ref_mean /= n;
      }
    }
    for (std::size_t j = 0; j < vis.size(); ++j)
      if (vis[j]) distances.push_back(((est[j] - est_mean) - (ref[j] - ref_mean)).norm());
  }
  return distances;
}

AccuracyCurve joint_accuracy(const GroundTruth& estimate, const GroundTruth& truth,
                             const std::vector<double>& thresholds, bool mean_subtract) {
  return accuracy_curve(joint_distances(estimate, truth, mean_subtract), thresholds);
}

std::vector<double> ReconError::pooled() const {
  std::vector<double> all;
  for (const auto& f : per_frame) all.insert(all.end(), f.begin(), f.end());
  return all;
}

double ReconError::percentile(double p) const {
  std::vector<double> all = pooled();
  if (all.empty()) return 0.0;
  std::sort(all.begin(), all.end());
  const double idx = p * static_cast<double>(all.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, all.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return all[lo] * (1.0 - frac) + all[hi] * frac;
}

double ReconError::mean() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : per_frame) {
    for (double d : f) sum += d;
    n += f.size();
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

std::vector<double> reconstruction_error_frame(const PosedMesh& posed,
                                               const std::vector<std::array<int, 3>>& triangles,
                                               const CloudFrame& frame, const Intrinsics& intr,
                                               int threads) {
  constexpr double kZTolerance = 1e-3;  // self-occlusion margin, meters
  const RasterResult raster = rasterize(posed.v, triangles, intr);

  std::vector<int> visible;
  for (std::size_t i = 0; i < posed.v.size(); ++i) {
    if (!posed.valid[i]) continue;
    if (posed.n[i].dot(posed.v[i]) > 0.0) continue;
    const auto pc = project(intr, posed.v[i]);
    if (!pc) continue;
    const std::size_t px = static_cast<std::size_t>(pc->v) * intr.width + pc->u;
    if (raster.tri[px] < 0 || posed.v[i].z() > raster.depth[px] + kZTolerance) continue;
    visible.push_back(static_cast<int>(i));
  }

  std::vector<const Vec3*> obs;
  obs.reserve(frame.points.size());
  for (std::size_t p = 0; p < frame.points.size(); ++p)
    if (frame.valid[p]) obs.push_back(&frame.points[p]);

  std::vector<double> dist(visible.size(), 0.0);
  if (obs.empty()) return dist;
  parallel_for(visible.size(), threads, [&](std::size_t s) {
    const Vec3& v = posed.v[static_cast<std::size_t>(visible[s])];
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3* p : obs) best = std::min(best, (*p - v).squaredNorm());
    dist[s] = std::sqrt(best);
  });
  return dist;
}

std::vector<ModeReport> compare_modes(const ModelBundle& bundle,
                                      const std::filesystem::path& sequence_path,
                                      const GroundTruth& truth,
                                      const std::vector<TrackMode>& modes,
                                      const TrackConfig& base_config,
                                      const std::vector<double>& joint_thresholds,
                                      const std::vector<double>& recon_thresholds) {
  std::vector<ModeReport> reports;
  for (TrackMode mode : modes) {
    const ModelBundle tracked = mode == TrackMode::rigid ? rigidify(bundle) : bundle;
    TrackConfig cfg = base_config;
    cfg.mode = mode;

    SequenceReader reader(sequence_path);
    const Intrinsics intr = reader.header().intrinsics();
    const Pose init = truth.theta.empty() ? bundle.skeleton.zero_pose() : truth.theta.front();

    ReconError recon;
    const TrackOutputs out = run_tracking(
        tracked, reader, cfg, init,
        [&](const TrackerState& state, int, const CloudFrame& cloud) {
          const PosedMesh posed =
              skin(state.mesh, link_offsets(*state.skeleton, state.theta), cfg.threads);
          recon.per_frame.push_back(reconstruction_error_frame(
              posed, state.mesh.triangles, cloud, intr, cfg.threads));
        });

    ModeReport report;
    report.mode = mode;
    report.joint_curve = joint_accuracy(out.estimate, truth, joint_thresholds);
    report.recon_curve = accuracy_curve(recon.pooled(), recon_thresholds);
    report.recon_median = recon.percentile(0.5);
    report.recon_mean = recon.mean();
    const std::vector<double> jd = joint_distances(out.estimate, truth);
    report.joint_mean = jd.empty() ? 0.0
                                   : std::accumulate(jd.begin(), jd.end(), 0.0) /
                                         static_cast<double>(jd.size());
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace warptrack
