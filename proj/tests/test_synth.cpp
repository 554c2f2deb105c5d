#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "warptrack/synth.hpp"

using namespace warptrack;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "warptrack_synth_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Intrinsics small_intr(int w = 160, int h = 120, double f = 140.0) {
  Intrinsics intr;
  intr.width = w;
  intr.height = h;
  intr.fx = intr.fy = f;
  intr.cx = w / 2.0;
  intr.cy = h / 2.0;
  return intr;
}

}  // namespace

TEST_CASE("rasterize: axis-aligned square at constant depth") {
  std::vector<Vec3> v = {{-0.5, -0.5, 2}, {0.5, -0.5, 2}, {0.5, 0.5, 2}, {-0.5, 0.5, 2}};
  std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {0, 2, 3}};
  const Intrinsics intr = small_intr();
  const RasterResult r = rasterize(v, tris, intr);
  const std::size_t center = static_cast<std::size_t>(60) * 160 + 80;
  REQUIRE(r.tri[center] >= 0);
  CHECK(r.depth[center] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rasterize: nearer triangle wins contested pixels") {
  std::vector<Vec3> v = {{-0.5, -0.5, 2}, {0.5, -0.5, 2}, {0, 0.5, 2},
                         {-0.5, -0.5, 1.5}, {0.5, -0.5, 1.5}, {0, 0.5, 1.5}};
  std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {3, 4, 5}};
  const Intrinsics intr = small_intr();
  const RasterResult r = rasterize(v, tris, intr);
  const std::size_t center = static_cast<std::size_t>(55) * 160 + 80;
  REQUIRE(r.tri[center] == 1);
  CHECK(r.depth[center] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("rendered sphere depth matches the analytic ray-sphere solution") {
  const double radius = 0.1;
  const double dist = 1.0;
  // Tessellation fine enough that the chord sagitta along the quad diagonal
  // (r * step^2 / 4, about 5e-7 here) stays below the tolerance for rays at
  // moderate incidence.
  const ModelBundle sphere = make_sphere_rig(radius, 700, 1400, dist);
  const Intrinsics intr = small_intr(120, 100, 300.0);

  const CloudFrame frame =
      render_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, NoiseSpec{});
  const Vec3 center(0, 0, dist);
  int checked = 0;
  double worst = 0.0;
  for (int py = 0; py < intr.height; ++py)
    for (int px = 0; px < intr.width; ++px) {
      const std::size_t i = frame.index(px, py);
      if (!frame.valid[i]) continue;
      const Vec3 dir = Vec3((px - intr.cx) / intr.fx, (py - intr.cy) / intr.fy, 1.0).normalized();
      const double b = dir.dot(center);
      const double disc = b * b - center.squaredNorm() + radius * radius;
      REQUIRE(disc >= 0.0);
      const double t = b - std::sqrt(disc);
      const Vec3 hit = dir * t;
      // Restrict to rays at moderate incidence; grazing pixels amplify the
      // tessellation chord error unboundedly.
      const Vec3 n = (hit - center).normalized();
      if (-n.dot(dir) < 0.7) continue;
      worst = std::max(worst, std::abs(frame.points[i].z() - hit.z()));
      ++checked;
    }
  CHECK(checked > 500);
  CHECK(worst <= 1e-6);
}

TEST_CASE("noiseless rendered points lie on the posed surface") {
  const ModelBundle arm = make_arm_rig();
  const Intrinsics intr = small_intr(200, 150, 160.0);
  Pose pose = arm.skeleton.zero_pose();
  pose[1] = 0.3;
  const CloudFrame frame = render_frame(arm, pose, {}, intr, NoiseSpec{});
  REQUIRE(frame.valid_count() > 300);

  const PosedMesh posed = skin(arm.mesh, link_offsets(arm.skeleton, pose));
  std::mt19937 rng(3);
  int samples = 0;
  double worst = 0.0;
  while (samples < 200) {
    const std::size_t i = rng() % frame.points.size();
    if (!frame.valid[i]) continue;
    ++samples;
    const Vec3& p = frame.points[i];
    // Distance to the nearest triangle plane patch, brute force.
    double best = 1e9;
    for (const auto& t : arm.mesh.triangles) {
      const Vec3 &a = posed.v[static_cast<std::size_t>(t[0])],
                 &b = posed.v[static_cast<std::size_t>(t[1])],
                 &c = posed.v[static_cast<std::size_t>(t[2])];
      // Point-triangle distance via clamped barycentric projection.
      const Vec3 ab = b - a, ac = c - a, ap = p - a;
      const double d1 = ab.dot(ap), d2 = ac.dot(ap);
      const double a00 = ab.squaredNorm(), a01 = ab.dot(ac), a11 = ac.squaredNorm();
      const double det = a00 * a11 - a01 * a01;
      double s = std::clamp((a11 * d1 - a01 * d2) / det, 0.0, 1.0);
      double u = std::clamp((a00 * d2 - a01 * d1) / det, 0.0, 1.0);
      if (s + u > 1.0) {
        const double scale = 1.0 / (s + u);
        s *= scale;
        u *= scale;
      }
      best = std::min(best, (a + ab * s + ac * u - p).norm());
    }
    worst = std::max(worst, best);
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("noise model is deterministic and respects the seed") {
  const ModelBundle sphere = make_sphere_rig(0.15, 16, 24, 1.2);
  const Intrinsics intr = small_intr();
  NoiseSpec noise;
  noise.sigma = 0.005;
  noise.dropout = 0.05;
  noise.seed = 42;

  const FrameSynthesis a = synthesize_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, noise, 3);
  const FrameSynthesis b = synthesize_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, noise, 3);
  CHECK(a.depth == b.depth);

  const FrameSynthesis c = synthesize_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, noise, 4);
  CHECK(a.depth != c.depth);  // frame index participates in the stream

  // Dropout knocks out roughly the configured fraction.
  const FrameSynthesis clean =
      synthesize_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, NoiseSpec{}, 3);
  int clean_n = 0, noisy_n = 0;
  for (float d : clean.depth) clean_n += d > 0;
  for (float d : a.depth) noisy_n += d > 0;
  const double frac = 1.0 - static_cast<double>(noisy_n) / clean_n;
  CHECK(frac > 0.02);
  CHECK(frac < 0.09);
}

TEST_CASE("quantization rounds depth to the configured step") {
  const ModelBundle sphere = make_sphere_rig(0.15, 16, 24, 1.2);
  const Intrinsics intr = small_intr();
  NoiseSpec noise;
  noise.quantization = 0.02;
  const FrameSynthesis f =
      synthesize_frame(sphere, sphere.skeleton.zero_pose(), {}, intr, noise, 0);
  for (float d : f.depth) {
    if (d <= 0) continue;
    const double steps = d / 0.02;
    CHECK(std::abs(steps - std::round(steps)) <= 1e-4);  // float32 storage slack
  }
}

TEST_CASE("trajectory evaluation") {
  const ModelBundle arm = make_arm_rig();
  TrajectorySpec traj;
  traj.frames = 60;
  traj.fps = 30;
  JointCurve sine;
  sine.joint = 1;
  sine.type = CurveType::sine;
  sine.amplitude = 0.4;
  sine.frequency = 0.5;
  sine.phase = 0.25;
  traj.curves.push_back(sine);
  JointCurve ramp;
  ramp.joint = 2;
  ramp.type = CurveType::ramp;
  ramp.slope = 0.01;
  traj.curves.push_back(ramp);

  for (int f = 0; f < 60; f += 7) {
    const Pose p = traj.eval(arm.skeleton, f);
    const double t = f / 30.0;
    CHECK(p[0] == 0.0);
    CHECK(p[1] == doctest::Approx(0.4 * std::sin(2 * std::numbers::pi * 0.5 * t + 0.25)));
    CHECK(p[2] == doctest::Approx(0.01 * t));
  }
}

TEST_CASE("generate_sequence writes a reloadable pair with constant-curve rows") {
  const ModelBundle arm = make_arm_rig();
  const Intrinsics intr = small_intr();
  TrajectorySpec traj;
  traj.frames = 4;
  traj.fps = 30;
  JointCurve c;
  c.joint = 0;
  c.type = CurveType::constant;
  c.offset = 0.2;
  traj.curves.push_back(c);

  const fs::path seq = temp_dir() / "arm.wts";
  const fs::path gt = temp_dir() / "arm_gt.csv";
  generate_sequence(arm, traj, PhiAnimation{}, intr, NoiseSpec{}, seq, gt, 2);

  SequenceReader reader(seq);
  CHECK(reader.frame_count() == 4);
  const GroundTruth truth = load_ground_truth(gt);
  REQUIRE(truth.frame_count() == 4);
  for (int f = 1; f < 4; ++f) {
    CHECK((truth.theta[static_cast<std::size_t>(f)] - truth.theta[0]).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < truth.joint_count(); ++j)
      CHECK((truth.joints[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)] -
             truth.joints[0][static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff() == 0.0);
  }

  // Rendered frames equal the in-memory render of the same pose.
  const CloudFrame direct = render_frame(arm, traj.eval(arm.skeleton, 2), {}, intr, NoiseSpec{}, 2);
  const CloudFrame loaded = reader.read_frame(2);
  REQUIRE(direct.valid == loaded.valid);
  for (std::size_t i = 0; i < direct.points.size(); ++i)
    if (direct.valid[i])
      CHECK((direct.points[i] - loaded.points[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generated sequences are identical across thread counts") {
  const ModelBundle sphere = make_sphere_rig(0.15, 12, 18, 1.2);
  const Intrinsics intr = small_intr(100, 80, 90.0);
  TrajectorySpec traj;
  traj.frames = 6;
  NoiseSpec noise;
  noise.sigma = 0.003;
  noise.dropout = 0.03;
  noise.seed = 11;

  const fs::path seq1 = temp_dir() / "t1.wts";
  const fs::path seq4 = temp_dir() / "t4.wts";
  generate_sequence(sphere, traj, PhiAnimation{}, intr, noise, seq1, temp_dir() / "t1.csv", 1);
  generate_sequence(sphere, traj, PhiAnimation{}, intr, noise, seq4, temp_dir() / "t4.csv", 4);

  std::ifstream a(seq1, std::ios::binary), b(seq4, std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
}

TEST_CASE("joint visibility: occluded link is flagged invisible") {
  // Biped at default pose from the front: all major links visible.
  const ModelBundle biped = make_biped_rig();
  Intrinsics intr;  // full 512x424 defaults
  const FrameSynthesis f =
      synthesize_frame(biped, biped.skeleton.zero_pose(), {}, intr, NoiseSpec{}, 0);
  int visible = 0;
  for (std::uint8_t v : f.joint_visible) visible += v;
  CHECK(visible == biped.skeleton.link_count());

  // A sphere dropped between the camera and the arm hides everything.
  const ModelBundle arm = make_arm_rig();
  ModelBundle blocked = arm;
  // Occluder: big wall quad at z=0.8 (in front of the arm at z=1.5), welded
  // into the same mesh, weighted to the root.
  const int base = static_cast<int>(blocked.mesh.v0.size());
  blocked.mesh.v0.push_back(Vec3(-2, -2, 0.8));
  blocked.mesh.v0.push_back(Vec3(2, -2, 0.8));
  blocked.mesh.v0.push_back(Vec3(2, 2, 0.8));
  blocked.mesh.v0.push_back(Vec3(-2, 2, 0.8));
  blocked.mesh.polys.push_back({base, base + 1, base + 2, base + 3});
  VertexWeights w;
  w.add(0, 1.0);
  for (int i = 0; i < 4; ++i) blocked.mesh.weights.push_back(w);
  blocked.mesh.finalize();
  blocked.mesh.neighbors = build_neighbors(blocked.mesh.v0, 4);

  const Intrinsics si = small_intr();
  const FrameSynthesis g =
      synthesize_frame(blocked, blocked.skeleton.zero_pose(), {}, si, NoiseSpec{}, 0);
  // Links 1 and 2 (mid, tip) own no wall vertices and are fully occluded.
  CHECK(g.joint_visible[1] == 0);
  CHECK(g.joint_visible[2] == 0);
}

TEST_CASE("phi animation ramps dent depth over the sequence") {
  const ModelBundle sphere = make_sphere_rig(0.15, 16, 24, 1.2);
  PhiAnimation anim;
  anim.dents.push_back({Vec3(0, 0, -1), 0.02, 0.5});
  anim.ramp_start = 0.25;
  anim.ramp_end = 1.0;

  const auto first = anim.eval(sphere.mesh, 0, 30);
  const auto last = anim.eval(sphere.mesh, 29, 30);
  double max_first = 0, max_last = 0;
  for (const Vec3& p : first) max_first = std::max(max_first, p.norm());
  for (const Vec3& p : last) max_last = std::max(max_last, p.norm());
  CHECK(max_first == doctest::Approx(0.25 * 0.02).epsilon(1e-6));
  CHECK(max_last == doctest::Approx(0.02).epsilon(1e-6));
}

TEST_CASE("synth config file round trip") {
  const ModelBundle arm = make_arm_rig();
  const fs::path path = temp_dir() / "config.json";
  {
    std::ofstream out(path);
    out << R"({
      "trajectory": {"frames": 50, "fps": 25,
        "curves": [{"joint": "mid", "type": "sine", "amplitude": 0.3, "frequency": 0.5}]},
      "noise": {"sigma": 0.004, "dropout": 0.02, "seed": 9},
      "phi_animation": {"ramp_start": 0.5, "ramp_end": 1.0,
        "dents": [{"direction": [0,0,-1], "amplitude": 0.015, "width": 0.6}]}
    })";
  }
  const SynthConfig cfg = load_synth_config(path, arm.skeleton);
  CHECK(cfg.trajectory.frames == 50);
  CHECK(cfg.trajectory.fps == 25);
  REQUIRE(cfg.trajectory.curves.size() == 1);
  CHECK(cfg.trajectory.curves[0].joint == 1);  // "mid" resolves by name
  CHECK(cfg.noise.sigma == 0.004);
  CHECK(cfg.noise.seed == 9);
  REQUIRE(cfg.phi.dents.size() == 1);
  CHECK(cfg.phi.dents[0].amplitude == 0.015);
}
