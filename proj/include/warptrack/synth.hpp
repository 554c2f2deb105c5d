#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "warptrack/seqio.hpp"

namespace warptrack {

enum class CurveType { constant, ramp, sine };

/// Parametric joint-value curve evaluated in seconds.
struct JointCurve {
  int joint = -1;
  CurveType type = CurveType::constant;
  double offset = 0.0;
  double slope = 0.0;      // ramp: offset + slope * t
  double amplitude = 0.0;  // sine: offset + amplitude * sin(2 pi f t + phase)
  double frequency = 0.0;
  double phase = 0.0;

  double eval(double t) const;
};

struct TrajectorySpec {
  int frames = 300;
  double fps = 30.0;
  std::vector<JointCurve> curves;  // joints without a curve stay at zero

  Pose eval(const Skeleton& skel, int frame) const;
};

struct NoiseSpec {
  double sigma = 0.0;         // gaussian depth noise, meters
  double dropout = 0.0;       // probability of invalidating a pixel
  double quantization = 0.0;  // depth rounding step, meters (0 = off)
  std::uint64_t seed = 0;
};

/// Smooth radial dent field on a roughly spherical template, optionally
/// ramping over the sequence. Stands in for time-varying surface deformation.
struct DentSpec {
  Vec3 direction = Vec3(0, 0, -1);  // unit, from the template centroid
  double amplitude = 0.0;           // meters, inward
  double width = 0.5;               // angular sigma, radians
};

struct PhiAnimation {
  std::vector<DentSpec> dents;
  double ramp_start = 1.0;
  double ramp_end = 1.0;

  bool active() const { return !dents.empty(); }
  std::vector<Vec3> eval(const SkinnedMesh& mesh, int frame, int total_frames) const;
};

struct SynthConfig {
  TrajectorySpec trajectory;
  NoiseSpec noise;
  PhiAnimation phi;
};

/// Reads a structured-text (JSON) synth config: trajectory curves by joint
/// name or index, noise block, optional phi animation block.
SynthConfig load_synth_config(const std::filesystem::path& path, const Skeleton& skel);

/// Z-buffer rasterization of posed triangles at the grid resolution; depth is
/// the distance along each pixel's principal ray, tri the winning triangle
/// (-1 where empty).
struct RasterResult {
  std::vector<double> depth;
  std::vector<int> tri;
};

RasterResult rasterize(const std::vector<Vec3>& v, const std::vector<std::array<int, 3>>& tris,
                       const Intrinsics& intr);

/// Renders one frame of the posed, optionally warped model and applies the
/// seeded noise model. Deterministic given (noise.seed, frame_index); matches
/// what a written sequence reloads bit for bit.
CloudFrame render_frame(const ModelBundle& bundle, const Pose& pose, const std::vector<Vec3>& phi,
                        const Intrinsics& intr, const NoiseSpec& noise, int frame_index = 0);

/// Noisy float depth image plus joint visibility flags for one frame;
/// render_frame and generate_sequence are built on this.
struct FrameSynthesis {
  std::vector<float> depth;
  std::vector<std::uint8_t> joint_visible;
};

FrameSynthesis synthesize_frame(const ModelBundle& bundle, const Pose& pose,
                                const std::vector<Vec3>& phi, const Intrinsics& intr,
                                const NoiseSpec& noise, int frame_index);

/// Writes a full sequence and its ground truth (theta, joint positions from
/// FK, visibility from z-buffer occupancy of each link's dominant vertices).
void generate_sequence(const ModelBundle& bundle, const TrajectorySpec& traj,
                       const PhiAnimation& phi_anim, const Intrinsics& intr,
                       const NoiseSpec& noise, const std::filesystem::path& sequence_path,
                       const std::filesystem::path& ground_truth_path, int threads = 1);

// Programmatic test rigs; the tracked human model of the original system is
// licensed, so all desk-scale data comes from these.

/// Single rigid link under a lat-long sphere.
ModelBundle make_sphere_rig(double radius = 0.15, int rings = 24, int segments = 32,
                            double distance = 1.2);

/// Three-link planar arm under one shared capsule, smooth weight blends.
ModelBundle make_arm_rig();

/// Twelve-link humanoid (one prismatic root) over a capsule composite,
/// ~2.5k vertices; subdivides to ~40k.
ModelBundle make_biped_rig();

ModelBundle make_rig(const std::string& name);

}  // namespace warptrack
