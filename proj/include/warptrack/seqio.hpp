#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "warptrack/association.hpp"
#include "warptrack/skeleton.hpp"
#include "warptrack/skinmesh.hpp"

namespace warptrack {

struct ModelMeta {
  std::string name;
  std::string units = "meters";
  double scale = 1.0;
};

struct ModelBundle {
  Skeleton skeleton;
  SkinnedMesh mesh;
  ModelMeta meta;
};

struct ValidationIssue {
  std::string entity;
  std::string message;
};

/// All invariant breaches of a constructed bundle (weights, faces, bind pose,
/// neighbor sets, units of stored transforms). Empty means valid.
std::vector<ValidationIssue> validate_bundle(const ModelBundle& bundle);

/// Loads and fully validates a model bundle (JSON document plus sidecar mesh
/// file). Throws ParseError / VersionError / IoError / ValidationError; the
/// validation message names the offending entity.
ModelBundle load_model(const std::filesystem::path& path);

/// Best-effort load for `validate`: structural failures become issues instead
/// of exceptions where recovery is possible. Returns every issue found.
std::vector<ValidationIssue> validate_model_file(const std::filesystem::path& path);

/// Writes the bundle as <path> (JSON) plus a sidecar mesh next to it.
void save_model(const std::filesystem::path& path, const ModelBundle& bundle);

struct SequenceHeader {
  std::uint32_t version = 1;
  std::uint32_t width = 0, height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  std::uint32_t frame_count = 0;
  double depth_scale = 1.0;  // meters per stored depth unit

  Intrinsics intrinsics() const {
    return Intrinsics{fx, fy, cx, cy, static_cast<int>(width), static_cast<int>(height)};
  }
};

/// Converts one depth image (0 = invalid) to an organized cloud through the
/// inverse pinhole model.
CloudFrame depth_to_cloud(const Intrinsics& intr, const std::vector<float>& depth, double scale);

/// Packed binary depth sequence: fixed header, then row-major little-endian
/// float32 frames. Frames decode lazily.
class SequenceReader {
 public:
  explicit SequenceReader(const std::filesystem::path& path);

  const SequenceHeader& header() const { return header_; }
  int frame_count() const { return static_cast<int>(header_.frame_count); }

  std::vector<float> read_depth(int frame);
  CloudFrame read_frame(int frame);

 private:
  std::ifstream stream_;
  SequenceHeader header_;
  std::streamoff data_begin_ = 0;
  std::filesystem::path path_;
};

class SequenceWriter {
 public:
  SequenceWriter(const std::filesystem::path& path, const SequenceHeader& header);
  ~SequenceWriter();

  void write_depth(const std::vector<float>& depth);
  void close();  // throws if fewer frames than declared were written

 private:
  std::ofstream stream_;
  SequenceHeader header_;
  std::uint32_t written_ = 0;
  bool closed_ = false;
  std::filesystem::path path_;
};

/// Per-frame pose and labeled joint positions with visibility flags. Used for
/// generated ground truth and for tracker estimates alike.
struct GroundTruth {
  std::vector<std::string> joint_names;
  std::vector<Eigen::VectorXd> theta;             // frame -> |Theta|
  std::vector<std::vector<Vec3>> joints;          // frame -> joint -> position
  std::vector<std::vector<std::uint8_t>> visible; // frame -> joint -> flag

  int frame_count() const { return static_cast<int>(theta.size()); }
  int joint_count() const { return static_cast<int>(joint_names.size()); }
};

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// ASCII polygon export (OBJ with vertex normals).
void save_posed_mesh(const std::filesystem::path& path, const PosedMesh& posed,
                     const std::vector<std::array<int, 3>>& triangles);

/// Shortest round-trip decimal representation; all text writers use this.
std::string format_double(double value);

}  // namespace warptrack
