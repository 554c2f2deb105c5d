#pragma once

#include <vector>

#include "warptrack/seqio.hpp"
#include "warptrack/tracker.hpp"

namespace warptrack {

/// Fraction of samples within each ascending threshold plus the trapezoidal
/// area under the curve normalized by the threshold range.
struct AccuracyCurve {
  std::vector<double> thresholds;
  std::vector<double> fraction;
  double auc = 0.0;
};

AccuracyCurve accuracy_curve(const std::vector<double>& distances,
                             const std::vector<double>& thresholds);

std::vector<double> default_thresholds(double max_threshold, int steps);

/// Joint-position accuracy of an estimate against ground truth. Samples are
/// (frame, joint) pairs with the ground-truth visibility flag set. With
/// mean_subtract, per-frame centroids over the visible joints are removed
/// from both sides before measuring.
AccuracyCurve joint_accuracy(const GroundTruth& estimate, const GroundTruth& truth,
                             const std::vector<double>& thresholds, bool mean_subtract = false);

/// Distances used by joint_accuracy, exposed for reporting.
std::vector<double> joint_distances(const GroundTruth& estimate, const GroundTruth& truth,
                                    bool mean_subtract = false);

struct ReconError {
  std::vector<std::vector<double>> per_frame;

  std::vector<double> pooled() const;
  double percentile(double p) const;  // over pooled samples, p in [0,1]
  double mean() const;
};

/// Distance from each visible vertex to the nearest valid observation.
/// Visibility: front-facing, in frame and winning the z-test against the
/// mesh's own render (within 1 mm). Exact nearest neighbor over the frame.
std::vector<double> reconstruction_error_frame(const PosedMesh& posed,
                                               const std::vector<std::array<int, 3>>& triangles,
                                               const CloudFrame& frame, const Intrinsics& intr,
                                               int threads = 1);

struct ModeReport {
  TrackMode mode;
  AccuracyCurve joint_curve;
  AccuracyCurve recon_curve;
  double recon_median = 0.0;
  double recon_mean = 0.0;
  double joint_mean = 0.0;
};

/// Tracks the sequence once per mode and evaluates joint accuracy and
/// reconstruction error; the desk-scale analogue of the paper-style
/// condition comparison.
std::vector<ModeReport> compare_modes(const ModelBundle& bundle,
                                      const std::filesystem::path& sequence_path,
                                      const GroundTruth& truth,
                                      const std::vector<TrackMode>& modes,
                                      const TrackConfig& base_config,
                                      const std::vector<double>& joint_thresholds,
                                      const std::vector<double>& recon_thresholds);

}  // namespace warptrack
