#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "warptrack/seqio.hpp"
#include "warptrack/synth.hpp"

using namespace warptrack;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "warptrack_seqio_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

ModelBundle minimal_bundle() {
  ModelBundle b;
  std::vector<Link> links(1);
  links[0].name = "root";
  links[0].parent = -1;
  links[0].joint = {JointKind::hinge, Axis(0, 0, 1), 0};
  b.skeleton = Skeleton::build(std::move(links));
  b.mesh.v0 = {{0, 0, 1}, {0.1, 0, 1}, {0, 0.1, 1}};
  b.mesh.polys = {{0, 1, 2}};
  VertexWeights w;
  w.add(0, 1.0);
  b.mesh.weights.assign(3, w);
  b.mesh.finalize();
  b.mesh.neighbors = build_neighbors(b.mesh.v0, 2);
  b.meta.name = "minimal";
  return b;
}

}  // namespace

TEST_CASE("model bundle round trip") {
  const fs::path path = temp_dir() / "minimal.json";
  ModelBundle b = minimal_bundle();
  b.mesh.phi[1] = Vec3(0.001, -0.002, 0.0005);
  save_model(path, b);
  const ModelBundle back = load_model(path);

  CHECK(back.meta.name == "minimal");
  REQUIRE(back.mesh.v0.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((back.mesh.v0[i] - b.mesh.v0[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.mesh.phi[i] - b.mesh.phi[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(back.skeleton.link_count() == 1);
  CHECK(back.mesh.polys == b.mesh.polys);
}

TEST_CASE("biped bundle round trips exactly") {
  const fs::path path = temp_dir() / "biped.json";
  const ModelBundle b = make_biped_rig();
  save_model(path, b);
  const ModelBundle back = load_model(path);
  REQUIRE(back.mesh.v0.size() == b.mesh.v0.size());
  for (std::size_t i = 0; i < b.mesh.v0.size(); ++i)
    CHECK((back.mesh.v0[i] - b.mesh.v0[i]).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 0; j < b.skeleton.link_count(); ++j) {
    CHECK(back.skeleton.link(j).name == b.skeleton.link(j).name);
    CHECK((to_vec8(back.skeleton.link(j).parent_offset) -
           to_vec8(b.skeleton.link(j).parent_offset)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("loader rejects a weight row that does not sum to one") {
  const fs::path path = temp_dir() / "badweight.json";
  ModelBundle b = minimal_bundle();
  b.mesh.weights[1].entry[0].w = 0.9;
  save_model(path, b);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("vertex 1"), ValidationError);
}

TEST_CASE("loader rejects a cyclic parent graph") {
  const fs::path path = temp_dir() / "cycle.json";
  {
    std::ofstream out(path);
    out << R"({
  "format": "warptrack-model", "version": 1, "name": "cycle",
  "mesh_file": "cycle.wtm",
  "skeleton": { "links": [
    {"name": "a", "parent": 1, "offset": [1,0,0,0,0,0,0,0],
     "joint": {"kind": "hinge", "axis": [0,0,1], "theta_index": 0}},
    {"name": "b", "parent": 0, "offset": [1,0,0,0,0,0,0,0],
     "joint": {"kind": "hinge", "axis": [0,0,1], "theta_index": 1}}
  ]}})";
  }
  {
    std::ofstream mesh(temp_dir() / "cycle.wtm");
    mesh << "warptrack-mesh 1\nvertices 3\n0 0 1\n0.1 0 1\n0 0.1 1\npolys 1\n3 0 1 2\n"
            "weights 3\n1 0 1\n1 0 1\n1 0 1\nend\n";
  }
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("cycle"), ValidationError);
}

TEST_CASE("loader reports version and parse errors") {
  const fs::path bad_version = temp_dir() / "badversion.json";
  {
    std::ofstream out(bad_version);
    out << R"({"format": "warptrack-model", "version": 99, "mesh_file": "x.wtm",
               "skeleton": {"links": []}})";
  }
  CHECK_THROWS_AS(load_model(bad_version), VersionError);

  const fs::path garbage = temp_dir() / "garbage.json";
  {
    std::ofstream out(garbage);
    out << "not json at all {";
  }
  CHECK_THROWS_AS(load_model(garbage), ParseError);

  CHECK_THROWS_AS(load_model(temp_dir() / "missing.json"), IoError);
}

TEST_CASE("validate_model_file lists every breach") {
  const fs::path path = temp_dir() / "multibad.json";
  ModelBundle b = minimal_bundle();
  b.mesh.weights[0].entry[0].w = 0.8;             // bad sum
  b.mesh.weights[2].entry[0].w = 0.7;             // bad sum
  save_model(path, b);
  // Corrupt a face index directly in the sidecar.
  {
    std::ifstream in(temp_dir() / "multibad.wtm");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = text.find("3 0 1 2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 7, "3 0 1 9");
    std::ofstream out(temp_dir() / "multibad.wtm");
    out << text;
  }
  const auto issues = validate_model_file(path);
  CHECK(issues.size() >= 3);
  int weight_issues = 0, face_issues = 0;
  for (const auto& i : issues) {
    if (i.message.find("sum") != std::string::npos) ++weight_issues;
    if (i.entity.find("face") != std::string::npos) ++face_issues;
  }
  CHECK(weight_issues == 2);
  CHECK(face_issues >= 1);
}

TEST_CASE("depth_to_cloud principal ray inversion") {
  Intrinsics intr;
  intr.width = 8;
  intr.height = 6;
  intr.fx = intr.fy = 10;
  intr.cx = 4;
  intr.cy = 3;
  std::vector<float> depth(48, 0.0f);
  depth[3 * 8 + 4] = 2.0f;  // at the principal point
  const CloudFrame f = depth_to_cloud(intr, depth, 1.0);
  CHECK(f.valid_count() == 1);
  CHECK(f.points[f.index(4, 3)].isApprox(Vec3(0, 0, 2), 1e-12));

  // All-zero frame has no valid points.
  const CloudFrame empty = depth_to_cloud(intr, std::vector<float>(48, 0.0f), 1.0);
  CHECK(empty.valid_count() == 0);
}

TEST_CASE("sequence writer/reader round trip is bitwise") {
  const fs::path path = temp_dir() / "roundtrip.wts";
  SequenceHeader h;
  h.width = 16;
  h.height = 12;
  h.fx = h.fy = 20;
  h.cx = 8;
  h.cy = 6;
  h.frame_count = 3;
  h.depth_scale = 1.0;

  std::mt19937 rng(5);
  std::uniform_real_distribution<float> uni(0.5f, 3.0f);
  std::vector<std::vector<float>> frames;
  {
    SequenceWriter w(path, h);
    for (int f = 0; f < 3; ++f) {
      std::vector<float> d(16 * 12);
      for (float& x : d) x = (rng() & 3u) == 0 ? 0.0f : uni(rng);
      frames.push_back(d);
      w.write_depth(d);
    }
    w.close();
  }
  SequenceReader r(path);
  CHECK(r.header().width == 16);
  CHECK(r.frame_count() == 3);
  for (int f = 0; f < 3; ++f) {
    const std::vector<float> d = r.read_depth(f);
    CHECK(d == frames[static_cast<std::size_t>(f)]);
    const CloudFrame cloud = r.read_frame(f);
    int want_valid = 0;
    for (float x : frames[static_cast<std::size_t>(f)]) want_valid += x > 0;
    CHECK(cloud.valid_count() == want_valid);
  }
}

TEST_CASE("sequence errors: bad magic and truncation") {
  const fs::path bad = temp_dir() / "notaseq.wts";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "garbage data that is long enough to read a header from...";
  }
  CHECK_THROWS_AS(SequenceReader{bad}, HeaderMismatch);

  const fs::path trunc = temp_dir() / "trunc.wts";
  SequenceHeader h;
  h.width = 8;
  h.height = 8;
  h.fx = h.fy = 10;
  h.cx = h.cy = 4;
  h.frame_count = 4;
  {
    SequenceWriter w(trunc, h);
    w.write_depth(std::vector<float>(64, 1.0f));
    w.write_depth(std::vector<float>(64, 1.0f));
    CHECK_THROWS_AS(w.close(), IoError);  // fewer frames than declared
  }
  CHECK_THROWS_WITH_AS(SequenceReader{trunc}, doctest::Contains("frame 2"), TruncatedFile);
}

TEST_CASE("ground truth round trip preserves values and visibility") {
  const fs::path path = temp_dir() / "gt.csv";
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> uni(-2, 2);

  GroundTruth gt;
  gt.joint_names = {"root", "mid", "tip"};
  for (int f = 0; f < 5; ++f) {
    Eigen::VectorXd theta(4);
    for (int k = 0; k < 4; ++k) theta[k] = uni(rng);
    std::vector<Vec3> joints(3);
    std::vector<std::uint8_t> vis(3);
    for (int j = 0; j < 3; ++j) {
      joints[static_cast<std::size_t>(j)] = Vec3(uni(rng), uni(rng), uni(rng));
      vis[static_cast<std::size_t>(j)] = (rng() & 1u) != 0;
    }
    gt.theta.push_back(theta);
    gt.joints.push_back(joints);
    gt.visible.push_back(vis);
  }
  save_ground_truth(path, gt);
  const GroundTruth back = load_ground_truth(path);

  REQUIRE(back.frame_count() == 5);
  REQUIRE(back.joint_names == gt.joint_names);
  for (int f = 0; f < 5; ++f) {
    CHECK((back.theta[static_cast<std::size_t>(f)] - gt.theta[static_cast<std::size_t>(f)])
              .cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.visible[static_cast<std::size_t>(f)] == gt.visible[static_cast<std::size_t>(f)]);
    for (int j = 0; j < 3; ++j)
      CHECK((back.joints[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)] -
             gt.joints[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)])
                .cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("posed mesh export") {
  const fs::path path = temp_dir() / "mesh.obj";
  const ModelBundle b = minimal_bundle();
  const PosedMesh posed = skin(b.mesh, link_offsets(b.skeleton, b.skeleton.zero_pose()));
  save_posed_mesh(path, posed, b.mesh.triangles);

  std::ifstream in(path);
  std::string line;
  int v = 0, vn = 0, f = 0;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("vn ", 0) == 0) ++vn;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  CHECK(v == 3);
  CHECK(vn == 3);
  CHECK(f == 1);
}

TEST_CASE("format_double shortest round trip") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> uni(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = uni(rng) * std::pow(10.0, static_cast<int>(rng() % 7) - 3);
    const std::string s = format_double(x);
    CHECK(std::stod(s) == x);
  }
}
