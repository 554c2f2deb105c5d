#include "warptrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "warptrack/parallel.hpp"

namespace warptrack {

using nlohmann::json;

double JointCurve::eval(double t) const {
  switch (type) {
    case CurveType::constant:
      return offset;
    case CurveType::ramp:
      return offset + slope * t;
    case CurveType::sine:
      return offset + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
  }
  return offset;
}

Pose TrajectorySpec::eval(const Skeleton& skel, int frame) const {
  Pose pose = skel.zero_pose();
  const double t = fps > 0.0 ? frame / fps : static_cast<double>(frame);
  for (const JointCurve& c : curves) {
    if (c.joint < 0 || c.joint >= pose.size())
      throw ValidationError("trajectory curve references joint " + std::to_string(c.joint) +
                            " out of range");
    pose[c.joint] = c.eval(t);
  }
  return pose;
}

std::vector<Vec3> PhiAnimation::eval(const SkinnedMesh& mesh, int frame, int total_frames) const {
  std::vector<Vec3> phi(mesh.v0.size(), Vec3::Zero());
  if (!active()) return phi;
  const double a = total_frames > 1 ? static_cast<double>(frame) / (total_frames - 1) : 0.0;
  const double scale = ramp_start + (ramp_end - ramp_start) * a;

  Vec3 center = Vec3::Zero();
  for (const Vec3& v : mesh.v0) center += v;
  center /= static_cast<double>(mesh.v0.size());

  for (std::size_t i = 0; i < mesh.v0.size(); ++i) {
    const Vec3 d = mesh.v0[i] - center;
    const double len = d.norm();
    if (len < 1e-9) continue;
    const Vec3 dir = d / len;
    double depth = 0.0;
    for (const DentSpec& dent : dents) {
      const double c = std::clamp(dir.dot(dent.direction.normalized()), -1.0, 1.0);
      const double angle = std::acos(c);
      depth += dent.amplitude * std::exp(-(angle * angle) / (dent.width * dent.width));
    }
    phi[i] = -dir * (depth * scale);  // inward dent
  }
  return phi;
}

SynthConfig load_synth_config(const std::filesystem::path& path, const Skeleton& skel) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synth config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("synth config " + path.string() + ": " + e.what());
  }

  auto joint_index = [&](const json& j) -> int {
    if (j.is_number_integer()) return j.get<int>();
    const std::string name = j.get<std::string>();
    for (int l = 0; l < skel.link_count(); ++l)
      if (skel.link(l).name == name) return skel.link(l).joint.theta_index;
    throw ParseError("synth config: unknown joint '" + name + "'");
  };

  SynthConfig cfg;
  try {
    if (doc.contains("trajectory")) {
      const json& jt = doc["trajectory"];
      cfg.trajectory.frames = jt.value("frames", 300);
      cfg.trajectory.fps = jt.value("fps", 30.0);
      for (const json& jc : jt.value("curves", json::array())) {
        JointCurve c;
        c.joint = joint_index(jc.at("joint"));
        const std::string type = jc.value("type", "constant");
        if (type == "constant")
          c.type = CurveType::constant;
        else if (type == "ramp")
          c.type = CurveType::ramp;
        else if (type == "sine")
          c.type = CurveType::sine;
        else
          throw ParseError("synth config: unknown curve type '" + type + "'");
        c.offset = jc.value("offset", 0.0);
        c.slope = jc.value("slope", 0.0);
        c.amplitude = jc.value("amplitude", 0.0);
        c.frequency = jc.value("frequency", 0.0);
        c.phase = jc.value("phase", 0.0);
        cfg.trajectory.curves.push_back(c);
      }
    }
    if (doc.contains("noise")) {
      const json& jn = doc["noise"];
      cfg.noise.sigma = jn.value("sigma", 0.0);
      cfg.noise.dropout = jn.value("dropout", 0.0);
      cfg.noise.quantization = jn.value("quantization", 0.0);
      cfg.noise.seed = jn.value("seed", std::uint64_t{0});
      if (cfg.noise.sigma < 0 || cfg.noise.dropout < 0 || cfg.noise.dropout > 1)
        throw ValidationError("synth config: noise parameters out of range");
    }
    if (doc.contains("phi_animation")) {
      const json& jp = doc["phi_animation"];
      cfg.phi.ramp_start = jp.value("ramp_start", 1.0);
      cfg.phi.ramp_end = jp.value("ramp_end", 1.0);
      for (const json& jd : jp.value("dents", json::array())) {
        DentSpec d;
        const json& dir = jd.at("direction");
        d.direction = Vec3(dir[0].get<double>(), dir[1].get<double>(), dir[2].get<double>());
        d.amplitude = jd.value("amplitude", 0.0);
        d.width = jd.value("width", 0.5);
        cfg.phi.dents.push_back(d);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError("synth config " + path.string() + ": " + e.what());
  }
  return cfg;
}

RasterResult rasterize(const std::vector<Vec3>& v, const std::vector<std::array<int, 3>>& tris,
                       const Intrinsics& intr) {
  const std::size_t npix = static_cast<std::size_t>(intr.width) * static_cast<std::size_t>(intr.height);
  RasterResult out;
  out.depth.assign(npix, std::numeric_limits<double>::infinity());
  out.tri.assign(npix, -1);

  constexpr double kNear = 1e-6;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const Vec3& a = v[static_cast<std::size_t>(tris[t][0])];
    const Vec3& b = v[static_cast<std::size_t>(tris[t][1])];
    const Vec3& c = v[static_cast<std::size_t>(tris[t][2])];
    if (a.z() <= kNear || b.z() <= kNear || c.z() <= kNear) continue;

    const double ua = intr.fx * a.x() / a.z() + intr.cx;
    const double va = intr.fy * a.y() / a.z() + intr.cy;
    const double ub = intr.fx * b.x() / b.z() + intr.cx;
    const double vb = intr.fy * b.y() / b.z() + intr.cy;
    const double uc = intr.fx * c.x() / c.z() + intr.cx;
    const double vc = intr.fy * c.y() / c.z() + intr.cy;

    const double area2 = (ub - ua) * (vc - va) - (vb - va) * (uc - ua);
    if (std::abs(area2) < 1e-12) continue;
    const double inv_area = 1.0 / area2;

    const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({ua, ub, uc}))));
    const int u1 = std::min(intr.width - 1, static_cast<int>(std::floor(std::max({ua, ub, uc}))));
    const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({va, vb, vc}))));
    const int v1 = std::min(intr.height - 1, static_cast<int>(std::floor(std::max({va, vb, vc}))));

    const double iza = 1.0 / a.z(), izb = 1.0 / b.z(), izc = 1.0 / c.z();
    for (int py = v0; py <= v1; ++py) {
      for (int px = u0; px <= u1; ++px) {
        const double pu = px, pv = py;
        const double la = ((ub - pu) * (vc - pv) - (vb - pv) * (uc - pu)) * inv_area;
        const double lb = ((uc - pu) * (va - pv) - (vc - pv) * (ua - pu)) * inv_area;
        const double lc = 1.0 - la - lb;
        if (la < -1e-12 || lb < -1e-12 || lc < -1e-12) continue;
        // 1/z is affine in screen space, so this interpolation is exact for
        // the triangle's supporting plane.
        const double inv_z = la * iza + lb * izb + lc * izc;
        if (inv_z <= 0.0) continue;
        const double z = 1.0 / inv_z;
        const std::size_t pi = static_cast<std::size_t>(py) * intr.width + px;
        if (z < out.depth[pi]) {
          out.depth[pi] = z;
          out.tri[pi] = static_cast<int>(t);
        }
      }
    }
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform01(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Stateless per-pixel noise; identical for any parallel schedule.
double gaussian(std::uint64_t h1, std::uint64_t h2) {
  const double u1 = 1.0 - uniform01(h1);  // (0, 1]
  const double u2 = uniform01(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int> dominant_links(const SkinnedMesh& mesh) {
  std::vector<int> dom(mesh.v0.size(), -1);
  for (std::size_t i = 0; i < mesh.weights.size(); ++i) {
    const VertexWeights& w = mesh.weights[i];
    double best = -1.0;
    for (int s = 0; s < w.count; ++s) {
      const WeightEntry& e = w.entry[static_cast<std::size_t>(s)];
      if (e.w > best || (e.w == best && e.link < dom[i])) {
        best = e.w;
        dom[i] = e.link;
      }
    }
  }
  return dom;
}

}  // namespace

FrameSynthesis synthesize_frame(const ModelBundle& bundle, const Pose& pose,
                                const std::vector<Vec3>& phi, const Intrinsics& intr,
                                const NoiseSpec& noise, int frame_index) {
  const std::vector<DualQuat> offsets = link_offsets(bundle.skeleton, pose);
  const PosedMesh posed = phi.empty() ? skin(bundle.mesh, offsets)
                                      : skin(bundle.mesh, offsets, phi, 1);
  const RasterResult raster = rasterize(posed.v, bundle.mesh.triangles, intr);

  const std::uint64_t base = splitmix64(noise.seed ^ static_cast<std::uint64_t>(frame_index));
  const std::size_t npix = raster.depth.size();

  FrameSynthesis out;
  out.depth.assign(npix, 0.0f);
  for (std::size_t pi = 0; pi < npix; ++pi) {
    if (raster.tri[pi] < 0) continue;
    double z = raster.depth[pi];
    if (noise.dropout > 0.0 &&
        uniform01(splitmix64(base ^ (pi * 3 + 1))) < noise.dropout)
      continue;
    if (noise.sigma > 0.0)
      z += noise.sigma * gaussian(splitmix64(base ^ (pi * 3 + 2)), splitmix64(base ^ (pi * 3 + 3)));
    if (noise.quantization > 0.0)
      z = std::round(z / noise.quantization) * noise.quantization;
    if (z <= 0.0) continue;
    out.depth[pi] = static_cast<float>(z);
  }

  // Joint visibility: a joint is visible when at least one vertex dominated
  // by its link wins a z-buffer pixel.
  const std::vector<int> dom = dominant_links(bundle.mesh);
  std::vector<std::uint8_t> link_visible(static_cast<std::size_t>(bundle.skeleton.link_count()), 0);
  for (std::size_t pi = 0; pi < npix; ++pi) {
    const int t = raster.tri[pi];
    if (t < 0) continue;
    for (int vi : bundle.mesh.triangles[static_cast<std::size_t>(t)]) {
      const int link = dom[static_cast<std::size_t>(vi)];
      if (link >= 0) link_visible[static_cast<std::size_t>(link)] = 1;
    }
  }
  out.joint_visible = std::move(link_visible);
  return out;
}

CloudFrame render_frame(const ModelBundle& bundle, const Pose& pose, const std::vector<Vec3>& phi,
                        const Intrinsics& intr, const NoiseSpec& noise, int frame_index) {
  const FrameSynthesis synth = synthesize_frame(bundle, pose, phi, intr, noise, frame_index);
  return depth_to_cloud(intr, synth.depth, 1.0);
}

void generate_sequence(const ModelBundle& bundle, const TrajectorySpec& traj,
                       const PhiAnimation& phi_anim, const Intrinsics& intr,
                       const NoiseSpec& noise, const std::filesystem::path& sequence_path,
                       const std::filesystem::path& ground_truth_path, int threads) {
  SequenceHeader header;
  header.width = static_cast<std::uint32_t>(intr.width);
  header.height = static_cast<std::uint32_t>(intr.height);
  header.fx = intr.fx;
  header.fy = intr.fy;
  header.cx = intr.cx;
  header.cy = intr.cy;
  header.frame_count = static_cast<std::uint32_t>(traj.frames);
  header.depth_scale = 1.0;
  SequenceWriter writer(sequence_path, header);

  GroundTruth gt;
  for (const Link& l : bundle.skeleton.links()) gt.joint_names.push_back(l.name);

  const int chunk = std::max(1, resolve_threads(threads) * 2);
  std::vector<FrameSynthesis> buffer(static_cast<std::size_t>(chunk));

  for (int begin = 0; begin < traj.frames; begin += chunk) {
    const int end = std::min(traj.frames, begin + chunk);
    parallel_blocks(static_cast<std::size_t>(end - begin), 1, threads,
                    [&](std::size_t, std::size_t lo, std::size_t hi) {
                      for (std::size_t s = lo; s < hi; ++s) {
                        const int f = begin + static_cast<int>(s);
                        const Pose pose = traj.eval(bundle.skeleton, f);
                        const std::vector<Vec3> phi =
                            phi_anim.eval(bundle.mesh, f, traj.frames);
                        buffer[s] = synthesize_frame(bundle, pose, phi, intr, noise, f);
                      }
                    });
    for (int f = begin; f < end; ++f) {
      FrameSynthesis& fs = buffer[static_cast<std::size_t>(f - begin)];
      writer.write_depth(fs.depth);
      const Pose pose = traj.eval(bundle.skeleton, f);
      const std::vector<DualQuat> fk = forward_kinematics(bundle.skeleton, pose);
      std::vector<Vec3> joints(fk.size());
      for (std::size_t j = 0; j < fk.size(); ++j)
        joints[j] = transform_point(fk[j], Vec3::Zero());
      gt.theta.push_back(pose);
      gt.joints.push_back(std::move(joints));
      gt.visible.push_back(std::move(fs.joint_visible));
    }
  }
  writer.close();
  save_ground_truth(ground_truth_path, gt);
}

// ---------------------------------------------------------------------------
// Test rigs

namespace {

DualQuat translation(const Vec3& t) {
  DualQuat h;
  h.real = {1, 0, 0, 0};
  h.dual = {0, t.x() * 0.5, t.y() * 0.5, t.z() * 0.5};
  return h;
}

double smooth01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Lathe solid around the segment p0 -> p1: rings of (height along the axis,
// radius), plus a pole vertex at each end. Produces outward-wound quads and
// pole triangle fans. weight_fn maps the height parameter to skin weights.
template <class WeightFn>
void append_lathe(SkinnedMesh& mesh, const Vec3& p0, const Vec3& axis_dir,
                  const std::vector<std::pair<double, double>>& rings, double y_bottom_pole,
                  double y_top_pole, int segments, WeightFn&& weight_fn) {
  const Vec3 a = axis_dir.normalized();
  const Vec3 ref = std::abs(a.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 0, 1);
  const Vec3 b = a.cross(ref).normalized();
  const Vec3 c = b.cross(a);

  const int base = static_cast<int>(mesh.v0.size());
  auto emit = [&](const Vec3& local, double y) {
    mesh.v0.push_back(p0 + b * local.x() + a * local.y() + c * local.z());
    mesh.weights.push_back(weight_fn(y));
  };

  emit(Vec3(0, y_bottom_pole, 0), y_bottom_pole);  // bottom pole = base
  const int nr = static_cast<int>(rings.size());
  for (int i = 0; i < nr; ++i)
    for (int s = 0; s < segments; ++s) {
      const double ang = 2.0 * std::numbers::pi * s / segments;
      emit(Vec3(rings[static_cast<std::size_t>(i)].second * std::cos(ang),
                rings[static_cast<std::size_t>(i)].first,
                rings[static_cast<std::size_t>(i)].second * std::sin(ang)),
           rings[static_cast<std::size_t>(i)].first);
    }
  emit(Vec3(0, y_top_pole, 0), y_top_pole);  // top pole
  const int top = base + 1 + nr * segments;

  auto ring_vertex = [&](int ring, int s) { return base + 1 + ring * segments + (s % segments); };

  for (int s = 0; s < segments; ++s)
    mesh.polys.push_back({base, ring_vertex(0, s), ring_vertex(0, s + 1)});
  for (int i = 0; i + 1 < nr; ++i)
    for (int s = 0; s < segments; ++s)
      mesh.polys.push_back({ring_vertex(i, s), ring_vertex(i + 1, s), ring_vertex(i + 1, s + 1),
                            ring_vertex(i, s + 1)});
  for (int s = 0; s < segments; ++s)
    mesh.polys.push_back({top, ring_vertex(nr - 1, s + 1), ring_vertex(nr - 1, s)});
}

// Tapered capsule: hemispherical caps of radius r0 and r1 joined by a cone
// frustum. The taper matters for tracking testbeds: on a pure surface of
// revolution, sliding along the axis is invisible to point-plane residuals.
std::vector<std::pair<double, double>> capsule_rings(double length, double r0, double r1,
                                                     int cap_rings, int body_rings) {
  std::vector<std::pair<double, double>> rings;
  for (int i = 1; i <= cap_rings; ++i) {
    const double ang = -std::numbers::pi / 2 + (std::numbers::pi / 2) * i / cap_rings;
    rings.emplace_back(r0 * std::sin(ang), r0 * std::cos(ang));
  }
  for (int j = 1; j <= body_rings; ++j) {
    const double t = static_cast<double>(j) / body_rings;
    rings.emplace_back(length * t, r0 + (r1 - r0) * t);
  }
  for (int i = 1; i < cap_rings; ++i) {
    const double ang = (std::numbers::pi / 2) * i / cap_rings;
    rings.emplace_back(length + r1 * std::sin(ang), r1 * std::cos(ang));
  }
  return rings;
}

template <class WeightFn>
void append_capsule(SkinnedMesh& mesh, const Vec3& p0, const Vec3& p1, double r0, double r1,
                    int segments, int cap_rings, int body_rings, WeightFn&& weight_fn) {
  const double length = (p1 - p0).norm();
  append_lathe(mesh, p0, p1 - p0, capsule_rings(length, r0, r1, cap_rings, body_rings), -r0,
               length + r1, segments, std::forward<WeightFn>(weight_fn));
}

VertexWeights single_weight(int link) {
  VertexWeights w;
  w.add(link, 1.0);
  return w;
}

}  // namespace

ModelBundle make_sphere_rig(double radius, int rings, int segments, double distance) {
  ModelBundle bundle;
  const Vec3 center(0, 0, distance);

  Link root;
  root.name = "root";
  root.parent = -1;
  root.parent_offset = translation(center);
  root.joint = {JointKind::hinge, Axis(0, 0, 1), 0};
  bundle.skeleton = Skeleton::build({root});

  std::vector<std::pair<double, double>> ring_list;
  for (int i = 1; i < rings; ++i) {
    const double ang = std::numbers::pi * i / rings;
    ring_list.emplace_back(-radius * std::cos(ang), radius * std::sin(ang));
  }
  append_lathe(bundle.mesh, center, Vec3(0, 1, 0), ring_list, -radius, radius, segments,
               [](double) { return single_weight(0); });

  bundle.mesh.finalize();
  bundle.mesh.neighbors = build_neighbors(bundle.mesh.v0, 4);
  bundle.meta.name = "sphere";
  return bundle;
}

ModelBundle make_arm_rig() {
  ModelBundle bundle;
  const Vec3 base(-0.45, 0.0, 1.5);
  const double seg_len = 0.3;

  std::vector<Link> links(3);
  links[0].name = "base";
  links[0].parent = -1;
  links[0].parent_offset = translation(base);
  links[0].joint = {JointKind::hinge, Axis(0, 0, 1), 0};
  links[1].name = "mid";
  links[1].parent = 0;
  links[1].parent_offset = translation(Vec3(seg_len, 0, 0));
  links[1].joint = {JointKind::hinge, Axis(0, 0, 1), 1};
  links[2].name = "tip";
  links[2].parent = 1;
  links[2].parent_offset = translation(Vec3(seg_len, 0, 0));
  links[2].joint = {JointKind::hinge, Axis(0, 0, 1), 2};
  bundle.skeleton = Skeleton::build(std::move(links));

  // One shared capsule over all three links, smooth weight transitions at
  // the joint boundaries.
  auto weight_fn = [&](double y) {
    const double b1 = smooth01((y - seg_len) / 0.08 + 0.5);
    const double b2 = smooth01((y - 2 * seg_len) / 0.08 + 0.5);
    VertexWeights w;
    const double w0 = 1.0 - b1;
    const double w1 = b1 * (1.0 - b2);
    const double w2 = b1 * b2;
    if (w0 > 1e-9) w.add(0, w0);
    if (w1 > 1e-9) w.add(1, w1);
    if (w2 > 1e-9) w.add(2, w2);
    double sum = 0;
    for (int s = 0; s < w.count; ++s) sum += w.entry[static_cast<std::size_t>(s)].w;
    for (int s = 0; s < w.count; ++s) w.entry[static_cast<std::size_t>(s)].w /= sum;
    return w;
  };
  append_capsule(bundle.mesh, base, base + Vec3(3 * seg_len, 0, 0), 0.07, 0.045, 20, 4, 24,
                 weight_fn);

  bundle.mesh.finalize();
  bundle.mesh.neighbors = build_neighbors(bundle.mesh.v0, 4);
  bundle.meta.name = "arm";
  return bundle;
}

ModelBundle make_biped_rig() {
  struct Bone {
    const char* name;
    int parent;
    Vec3 offset;          // from parent origin
    JointKind kind;
    Vec3 axis;
    Vec3 dir;             // capsule direction from the link origin
    double length;
    double r0, r1;        // tapered capsule radii
    bool blend_parent;
  };

  const double z = 1.8;
  const std::vector<Bone> bones = {
      {"pelvis", -1, {0, 0, z}, JointKind::prismatic, {0, 0, 1}, {0, 1, 0}, 0.10, 0.100, 0.092, false},
      {"spine", 0, {0, 0.15, 0}, JointKind::hinge, {1, 0, 0}, {0, 1, 0}, 0.15, 0.085, 0.096, true},
      {"chest", 1, {0, 0.15, 0}, JointKind::hinge, {0, 0, 1}, {0, 1, 0}, 0.15, 0.100, 0.088, true},
      {"head", 2, {0, 0.18, 0}, JointKind::hinge, {1, 0, 0}, {0, 1, 0}, 0.16, 0.084, 0.070, true},
      {"l_uparm", 2, {0.16, 0.10, 0}, JointKind::hinge, {0, 0, 1}, {1, 0, 0}, 0.24, 0.046, 0.038, true},
      {"l_forearm", 4, {0.24, 0, 0}, JointKind::hinge, {0, 0, 1}, {1, 0, 0}, 0.22, 0.040, 0.030, true},
      {"r_uparm", 2, {-0.16, 0.10, 0}, JointKind::hinge, {0, 0, 1}, {-1, 0, 0}, 0.24, 0.046, 0.038, true},
      {"r_forearm", 6, {-0.24, 0, 0}, JointKind::hinge, {0, 0, 1}, {-1, 0, 0}, 0.22, 0.040, 0.030, true},
      {"l_thigh", 0, {0.09, -0.04, 0}, JointKind::hinge, {1, 0, 0}, {0, -1, 0}, 0.30, 0.065, 0.048, true},
      {"l_shin", 8, {0, -0.30, 0}, JointKind::hinge, {1, 0, 0}, {0, -1, 0}, 0.28, 0.055, 0.038, true},
      {"r_thigh", 0, {-0.09, -0.04, 0}, JointKind::hinge, {1, 0, 0}, {0, -1, 0}, 0.30, 0.065, 0.048, true},
      {"r_shin", 10, {0, -0.30, 0}, JointKind::hinge, {1, 0, 0}, {0, -1, 0}, 0.28, 0.055, 0.038, true},
  };

  ModelBundle bundle;
  std::vector<Link> links;
  std::vector<Vec3> origins;
  for (std::size_t j = 0; j < bones.size(); ++j) {
    const Bone& bone = bones[j];
    Link l;
    l.name = bone.name;
    l.parent = bone.parent;
    l.parent_offset = translation(bone.offset);
    l.joint = {bone.kind, Axis::normalized(bone.axis), static_cast<int>(j)};
    links.push_back(std::move(l));
    origins.push_back(bone.parent < 0
                          ? bone.offset
                          : origins[static_cast<std::size_t>(bone.parent)] + bone.offset);
  }
  bundle.skeleton = Skeleton::build(std::move(links));

  for (std::size_t j = 0; j < bones.size(); ++j) {
    const Bone& bone = bones[j];
    const int self = static_cast<int>(j);
    const int parent = bone.parent;
    const bool blend = bone.blend_parent && parent >= 0;
    auto weight_fn = [self, parent, blend](double y) {
      VertexWeights w;
      const double wp = blend ? 0.5 * (1.0 - smooth01(y / 0.08)) : 0.0;
      if (wp > 1e-9) {
        w.add(self, 1.0 - wp);
        w.add(parent, wp);
      } else {
        w.add(self, 1.0);
      }
      return w;
    };
    const Vec3 p0 = origins[j];
    // The pelvis capsule is centered on its origin instead of hanging off it.
    const Vec3 start = parent < 0 ? p0 - bone.dir * (bone.length * 0.5) : p0;
    append_capsule(bundle.mesh, start, start + bone.dir * bone.length, bone.r0, bone.r1, 16, 4, 6,
                   weight_fn);
  }

  bundle.mesh.finalize();
  bundle.mesh.neighbors = build_neighbors(bundle.mesh.v0, 4);
  bundle.meta.name = "biped";
  return bundle;
}

ModelBundle make_rig(const std::string& name) {
  if (name == "sphere") return make_sphere_rig();
  if (name == "arm") return make_arm_rig();
  if (name == "biped") return make_biped_rig();
  throw ValidationError("unknown rig '" + name + "' (expected sphere|arm|biped)");
}

}  // namespace warptrack
