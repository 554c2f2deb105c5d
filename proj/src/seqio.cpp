#include "warptrack/seqio.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include <json.hpp>

namespace warptrack {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

constexpr char kSequenceMagic[8] = {'W', 'T', 'R', 'K', 'S', 'E', 'Q', '\0'};
constexpr const char* kModelFormat = "warptrack-model";
constexpr const char* kMeshMagic = "warptrack-mesh";
constexpr int kNeighborCount = 4;

json dq_to_json(const DualQuat& h) {
  const Vec8 v = to_vec8(h);
  json a = json::array();
  for (int i = 0; i < 8; ++i) a.push_back(v[i]);
  return a;
}

DualQuat dq_from_json(const json& a, const std::string& what) {
  if (!a.is_array() || a.size() != 8)
    throw ParseError(what + ": expected 8 numbers for a dual quaternion");
  Vec8 v;
  for (int i = 0; i < 8; ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return from_vec8(v);
}

double parse_double(const std::string& tok, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError(what + ": cannot parse number '" + tok + "'");
  return v;
}

long parse_long(const std::string& tok, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError(what + ": cannot parse integer '" + tok + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(line);
  while (std::getline(is, tok, delim)) out.push_back(tok);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

struct MeshFileData {
  std::vector<Vec3> v0;
  std::vector<std::vector<int>> polys;
  std::vector<VertexWeights> weights;
  std::vector<Vec3> phi;
  bool has_phi = false;
};

MeshFileData parse_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  MeshFileData data;
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != kMeshMagic)
    throw ParseError("mesh file " + path.string() + ": bad magic");
  if (version != 1)
    throw VersionError("mesh file " + path.string() + ": unsupported version " +
                       std::to_string(version));

  auto read_count = [&](const char* section) {
    long n = 0;
    if (!(in >> word >> n) || word != section || n < 0)
      throw ParseError("mesh file " + path.string() + ": expected '" + section + " <count>'");
    return static_cast<std::size_t>(n);
  };

  const std::size_t nv = read_count("vertices");
  data.v0.resize(nv);
  for (std::size_t i = 0; i < nv; ++i)
    if (!(in >> data.v0[i].x() >> data.v0[i].y() >> data.v0[i].z()))
      throw ParseError("mesh file " + path.string() + ": vertex " + std::to_string(i));

  const std::size_t np = read_count("polys");
  data.polys.resize(np);
  for (std::size_t f = 0; f < np; ++f) {
    int k = 0;
    if (!(in >> k) || k < 3) throw ParseError("mesh file: poly " + std::to_string(f));
    data.polys[f].resize(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s)
      if (!(in >> data.polys[f][static_cast<std::size_t>(s)]))
        throw ParseError("mesh file: poly " + std::to_string(f));
  }

  const std::size_t nw = read_count("weights");
  if (nw != nv) throw ParseError("mesh file: weight count differs from vertex count");
  data.weights.resize(nw);
  for (std::size_t i = 0; i < nw; ++i) {
    int k = 0;
    if (!(in >> k) || k < 0 || k > 4)
      throw ParseError("mesh file: weights of vertex " + std::to_string(i) +
                       " must have 0..4 entries");
    for (int s = 0; s < k; ++s) {
      int link = 0;
      double w = 0;
      if (!(in >> link >> w))
        throw ParseError("mesh file: weights of vertex " + std::to_string(i));
      data.weights[i].add(link, w);
    }
  }

  if (in >> word) {
    if (word == "phi") {
      long n = 0;
      if (!(in >> n) || static_cast<std::size_t>(n) != nv)
        throw ParseError("mesh file: phi count differs from vertex count");
      data.phi.resize(nv);
      data.has_phi = true;
      for (std::size_t i = 0; i < nv; ++i)
        if (!(in >> data.phi[i].x() >> data.phi[i].y() >> data.phi[i].z()))
          throw ParseError("mesh file: phi " + std::to_string(i));
      in >> word;
    }
    if (word != "end") throw ParseError("mesh file: expected 'end', got '" + word + "'");
  } else {
    throw ParseError("mesh file: missing 'end'");
  }
  return data;
}

void write_mesh_file(const std::filesystem::path& path, const SkinnedMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file " + path.string());
  out << kMeshMagic << " 1\n";
  out << "vertices " << mesh.v0.size() << "\n";
  for (const Vec3& v : mesh.v0)
    out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z())
        << "\n";
  out << "polys " << mesh.polys.size() << "\n";
  for (const auto& poly : mesh.polys) {
    out << poly.size();
    for (int vi : poly) out << ' ' << vi;
    out << "\n";
  }
  out << "weights " << mesh.weights.size() << "\n";
  for (const auto& w : mesh.weights) {
    out << w.count;
    for (int s = 0; s < w.count; ++s)
      out << ' ' << w.entry[static_cast<std::size_t>(s)].link << ' '
          << format_double(w.entry[static_cast<std::size_t>(s)].w);
    out << "\n";
  }
  bool any_phi = false;
  for (const Vec3& p : mesh.phi)
    if (p != Vec3::Zero()) any_phi = true;
  if (any_phi) {
    out << "phi " << mesh.phi.size() << "\n";
    for (const Vec3& p : mesh.phi)
      out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z())
          << "\n";
  }
  out << "end\n";
  if (!out) throw IoError("failed while writing mesh file " + path.string());
}

}  // namespace

std::vector<ValidationIssue> validate_bundle(const ModelBundle& bundle) {
  std::vector<ValidationIssue> issues;
  const Skeleton& skel = bundle.skeleton;
  const SkinnedMesh& mesh = bundle.mesh;
  const int nl = skel.link_count();

  for (int j = 0; j < nl; ++j) {
    const Link& l = skel.link(j);
    if (!l.parent_offset.is_unit())
      issues.push_back({"link '" + l.name + "'", "parent offset is not a unit dual quaternion"});
  }
  for (int j = 0; j < nl; ++j)
    if (!skel.bind_pose()[static_cast<std::size_t>(j)].is_unit())
      issues.push_back({"link '" + skel.link(j).name + "'", "bind pose entry is not unit"});

  const std::size_t nv = mesh.v0.size();
  if (mesh.weights.size() != nv)
    issues.push_back({"mesh", "weight table size differs from vertex count"});
  if (mesh.phi.size() != nv && !mesh.phi.empty())
    issues.push_back({"mesh", "phi size differs from vertex count"});

  for (std::size_t i = 0; i < std::min(nv, mesh.weights.size()); ++i) {
    const VertexWeights& w = mesh.weights[i];
    double sum = 0.0;
    for (int s = 0; s < w.count; ++s) {
      const WeightEntry& e = w.entry[static_cast<std::size_t>(s)];
      if (e.link < 0 || e.link >= nl) {
        issues.push_back({"vertex " + std::to_string(i),
                          "weight references link " + std::to_string(e.link) + " out of range"});
        continue;
      }
      if (e.w < 0.0 || e.w > 1.0)
        issues.push_back({"vertex " + std::to_string(i),
                          "weight " + format_double(e.w) + " outside [0,1]"});
      sum += e.w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      issues.push_back({"vertex " + std::to_string(i),
                        "weights sum to " + format_double(sum) + ", expected 1"});
  }

  for (std::size_t f = 0; f < mesh.polys.size(); ++f) {
    const auto& poly = mesh.polys[f];
    bool degenerate = false;
    for (std::size_t a = 0; a < poly.size(); ++a) {
      if (poly[a] < 0 || static_cast<std::size_t>(poly[a]) >= nv) {
        issues.push_back({"face " + std::to_string(f),
                          "vertex index " + std::to_string(poly[a]) + " out of range"});
      }
      for (std::size_t b = a + 1; b < poly.size(); ++b)
        if (poly[a] == poly[b]) degenerate = true;
    }
    if (degenerate)
      issues.push_back({"face " + std::to_string(f), "degenerate face (repeated vertex index)"});
  }

  for (std::size_t i = 0; i < mesh.neighbors.size(); ++i)
    for (int n : mesh.neighbors[i])
      if (n == static_cast<int>(i))
        issues.push_back({"vertex " + std::to_string(i), "neighbor set contains the vertex itself"});

  // Bind-pose consistency: stored bind pose must equal FK at theta = 0.
  const std::vector<DualQuat> fk0 = forward_kinematics(skel, skel.zero_pose());
  for (int j = 0; j < nl; ++j) {
    const Vec8 a = to_vec8(fk0[static_cast<std::size_t>(j)]);
    const Vec8 b = to_vec8(skel.bind_pose()[static_cast<std::size_t>(j)]);
    const double diff = std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
    if (diff > 1e-9)
      issues.push_back({"link '" + skel.link(j).name + "'",
                        "stored bind pose differs from FK at zero pose by " + format_double(diff)});
  }
  return issues;
}

namespace {

ModelBundle load_model_impl(const std::filesystem::path& path,
                            std::vector<ValidationIssue>* issues_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("model file " + path.string() + ": " + e.what());
  }

  try {
    if (doc.value("format", "") != kModelFormat)
      throw ParseError("model file " + path.string() + ": not a " + std::string(kModelFormat) +
                       " document");
    const int version = doc.value("version", 0);
    if (version != 1)
      throw VersionError("model file " + path.string() + ": unsupported version " +
                         std::to_string(version));

    ModelBundle bundle;
    bundle.meta.name = doc.value("name", "");
    bundle.meta.units = doc.value("units", "meters");
    bundle.meta.scale = doc.value("scale", 1.0);

    const json& jskel = doc.at("skeleton");
    std::vector<Link> links;
    for (const json& jl : jskel.at("links")) {
      Link l;
      l.name = jl.value("name", "link" + std::to_string(links.size()));
      l.parent = jl.value("parent", -1);
      l.parent_offset = dq_from_json(jl.at("offset"), "link '" + l.name + "' offset");
      const json& jj = jl.at("joint");
      const std::string kind = jj.value("kind", "");
      if (kind == "hinge")
        l.joint.kind = JointKind::hinge;
      else if (kind == "prismatic")
        l.joint.kind = JointKind::prismatic;
      else
        throw ParseError("link '" + l.name + "': unknown joint kind '" + kind + "'");
      const json& ja = jj.at("axis");
      if (!ja.is_array() || ja.size() != 3)
        throw ParseError("link '" + l.name + "': axis must be 3 numbers");
      try {
        l.joint.axis = Axis(ja[0].get<double>(), ja[1].get<double>(), ja[2].get<double>());
      } catch (const ValidationError& e) {
        if (!issues_out) throw ValidationError("link '" + l.name + "': " + e.what());
        issues_out->push_back({"link '" + l.name + "'", e.what()});
      }
      l.joint.theta_index = jj.value("theta_index", -1);
      links.push_back(std::move(l));
    }

    bundle.skeleton = Skeleton::build(std::move(links));

    if (jskel.contains("bind_pose")) {
      const json& jb = jskel.at("bind_pose");
      if (jb.size() != static_cast<std::size_t>(bundle.skeleton.link_count()))
        throw ParseError("model file: bind_pose length differs from link count");
      // The stored bind pose is informational; validate_bundle checks it
      // against FK(0). A mismatch is reported as a validation issue.
      std::vector<DualQuat> stored(jb.size());
      for (std::size_t j = 0; j < jb.size(); ++j)
        stored[j] = dq_from_json(jb[j], "bind_pose[" + std::to_string(j) + "]");
      for (std::size_t j = 0; j < jb.size(); ++j) {
        const Vec8 a = to_vec8(stored[j]);
        const Vec8 b = to_vec8(bundle.skeleton.bind_pose()[j]);
        const double diff = std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
        if (diff > 1e-9) {
          const std::string msg = "stored bind pose differs from FK at zero pose by " +
                                  format_double(diff);
          if (!issues_out)
            throw ValidationError("link '" + bundle.skeleton.link(static_cast<int>(j)).name +
                                  "': " + msg);
          issues_out->push_back(
              {"link '" + bundle.skeleton.link(static_cast<int>(j)).name + "'", msg});
        }
      }
    }

    const std::string mesh_file = doc.at("mesh_file").get<std::string>();
    const MeshFileData mdata = parse_mesh_file(path.parent_path() / mesh_file);
    bundle.mesh.v0 = mdata.v0;
    bundle.mesh.polys = mdata.polys;
    bundle.mesh.weights = mdata.weights;
    if (mdata.has_phi) bundle.mesh.phi = mdata.phi;
    bundle.mesh.finalize();
    bundle.mesh.neighbors = build_neighbors(bundle.mesh.v0, kNeighborCount);

    return bundle;
  } catch (const json::exception& e) {
    throw ParseError("model file " + path.string() + ": " + e.what());
  }
}

}  // namespace

ModelBundle load_model(const std::filesystem::path& path) {
  ModelBundle bundle = load_model_impl(path, nullptr);
  const std::vector<ValidationIssue> issues = validate_bundle(bundle);
  if (!issues.empty()) {
    std::string msg = issues[0].entity + ": " + issues[0].message;
    if (issues.size() > 1)
      msg += " (and " + std::to_string(issues.size() - 1) + " further issues)";
    throw ValidationError("model file " + path.string() + ": " + msg);
  }
  return bundle;
}

std::vector<ValidationIssue> validate_model_file(const std::filesystem::path& path) {
  std::vector<ValidationIssue> issues;
  try {
    ModelBundle bundle = load_model_impl(path, &issues);
    const std::vector<ValidationIssue> more = validate_bundle(bundle);
    issues.insert(issues.end(), more.begin(), more.end());
  } catch (const Error& e) {
    issues.push_back({"model", e.what()});
  }
  return issues;
}

void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  const std::filesystem::path mesh_name = path.stem().string() + ".wtm";
  write_mesh_file(path.parent_path() / mesh_name, bundle.mesh);

  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = 1;
  doc["name"] = bundle.meta.name;
  doc["units"] = bundle.meta.units;
  doc["scale"] = bundle.meta.scale;
  doc["mesh_file"] = mesh_name.string();

  json jlinks = json::array();
  for (const Link& l : bundle.skeleton.links()) {
    json jl;
    jl["name"] = l.name;
    jl["parent"] = l.parent;
    jl["offset"] = dq_to_json(l.parent_offset);
    json jj;
    jj["kind"] = l.joint.kind == JointKind::hinge ? "hinge" : "prismatic";
    jj["axis"] = {l.joint.axis.x, l.joint.axis.y, l.joint.axis.z};
    jj["theta_index"] = l.joint.theta_index;
    jl["joint"] = jj;
    jlinks.push_back(std::move(jl));
  }
  json jskel;
  jskel["links"] = std::move(jlinks);
  json jbind = json::array();
  for (const DualQuat& h : bundle.skeleton.bind_pose()) jbind.push_back(dq_to_json(h));
  jskel["bind_pose"] = std::move(jbind);
  doc["skeleton"] = std::move(jskel);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("failed while writing model file " + path.string());
}

CloudFrame depth_to_cloud(const Intrinsics& intr, const std::vector<float>& depth, double scale) {
  CloudFrame frame;
  frame.width = intr.width;
  frame.height = intr.height;
  const std::size_t n = static_cast<std::size_t>(intr.width) * static_cast<std::size_t>(intr.height);
  if (depth.size() != n) throw LengthMismatch("depth image size differs from intrinsics grid");
  frame.points.assign(n, Vec3::Zero());
  frame.valid.assign(n, 0);
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      const std::size_t i = frame.index(u, v);
      const float d = depth[i];
      if (!(d > 0.0f) || !std::isfinite(d)) continue;
      const double z = static_cast<double>(d) * scale;
      frame.points[i] = Vec3((u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z);
      frame.valid[i] = 1;
    }
  return frame;
}

SequenceReader::SequenceReader(const std::filesystem::path& path)
    : stream_(path, std::ios::binary), path_(path) {
  if (!stream_) throw IoError("cannot open sequence " + path.string());
  char magic[8];
  stream_.read(magic, 8);
  if (!stream_ || std::memcmp(magic, kSequenceMagic, 8) != 0)
    throw HeaderMismatch("sequence " + path.string() + ": bad magic");
  auto read_u32 = [&](std::uint32_t& v) { stream_.read(reinterpret_cast<char*>(&v), 4); };
  auto read_f64 = [&](double& v) { stream_.read(reinterpret_cast<char*>(&v), 8); };
  read_u32(header_.version);
  if (header_.version != 1)
    throw VersionError("sequence " + path.string() + ": unsupported version " +
                       std::to_string(header_.version));
  read_u32(header_.width);
  read_u32(header_.height);
  read_f64(header_.fx);
  read_f64(header_.fy);
  read_f64(header_.cx);
  read_f64(header_.cy);
  read_u32(header_.frame_count);
  read_f64(header_.depth_scale);
  if (!stream_) throw HeaderMismatch("sequence " + path.string() + ": truncated header");
  if (header_.width == 0 || header_.height == 0)
    throw HeaderMismatch("sequence " + path.string() + ": empty grid");
  data_begin_ = stream_.tellg();

  stream_.seekg(0, std::ios::end);
  const std::streamoff size = stream_.tellg() - data_begin_;
  const std::streamoff frame_bytes =
      static_cast<std::streamoff>(header_.width) * header_.height * 4;
  if (size < frame_bytes * header_.frame_count) {
    const auto have = frame_bytes > 0 ? size / frame_bytes : 0;
    throw TruncatedFile("sequence " + path.string() + ": frame " + std::to_string(have) +
                        " of " + std::to_string(header_.frame_count) + " is incomplete");
  }
}

std::vector<float> SequenceReader::read_depth(int frame) {
  if (frame < 0 || frame >= frame_count())
    throw TruncatedFile("sequence " + path_.string() + ": frame " + std::to_string(frame) +
                        " out of range");
  const std::size_t n = static_cast<std::size_t>(header_.width) * header_.height;
  std::vector<float> depth(n);
  stream_.seekg(data_begin_ + static_cast<std::streamoff>(n) * 4 * frame);
  stream_.read(reinterpret_cast<char*>(depth.data()), static_cast<std::streamsize>(n * 4));
  if (!stream_)
    throw TruncatedFile("sequence " + path_.string() + ": frame " + std::to_string(frame));
  return depth;
}

CloudFrame SequenceReader::read_frame(int frame) {
  return depth_to_cloud(header_.intrinsics(), read_depth(frame), header_.depth_scale);
}

SequenceWriter::SequenceWriter(const std::filesystem::path& path, const SequenceHeader& header)
    : stream_(path, std::ios::binary), header_(header), path_(path) {
  if (!stream_) throw IoError("cannot write sequence " + path.string());
  stream_.write(kSequenceMagic, 8);
  auto write_u32 = [&](std::uint32_t v) { stream_.write(reinterpret_cast<const char*>(&v), 4); };
  auto write_f64 = [&](double v) { stream_.write(reinterpret_cast<const char*>(&v), 8); };
  write_u32(header_.version);
  write_u32(header_.width);
  write_u32(header_.height);
  write_f64(header_.fx);
  write_f64(header_.fy);
  write_f64(header_.cx);
  write_f64(header_.cy);
  write_u32(header_.frame_count);
  write_f64(header_.depth_scale);
  if (!stream_) throw IoError("failed writing sequence header " + path.string());
}

SequenceWriter::~SequenceWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void SequenceWriter::write_depth(const std::vector<float>& depth) {
  const std::size_t n = static_cast<std::size_t>(header_.width) * header_.height;
  if (depth.size() != n) throw LengthMismatch("depth frame size differs from header grid");
  stream_.write(reinterpret_cast<const char*>(depth.data()), static_cast<std::streamsize>(n * 4));
  if (!stream_) throw IoError("failed writing frame to " + path_.string());
  ++written_;
}

void SequenceWriter::close() {
  if (closed_) return;
  closed_ = true;
  stream_.flush();
  if (written_ != header_.frame_count)
    throw IoError("sequence " + path_.string() + ": wrote " + std::to_string(written_) +
                  " frames, header declares " + std::to_string(header_.frame_count));
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ground truth " + path.string());
  const int nt = gt.theta.empty() ? 0 : static_cast<int>(gt.theta[0].size());
  out << "frame";
  for (int k = 0; k < nt; ++k) out << ",theta_" << k;
  for (const std::string& name : gt.joint_names)
    out << ',' << name << "_x," << name << "_y," << name << "_z," << name << "_vis";
  out << "\n";
  for (int f = 0; f < gt.frame_count(); ++f) {
    out << f;
    for (int k = 0; k < nt; ++k) out << ',' << format_double(gt.theta[static_cast<std::size_t>(f)][k]);
    for (int j = 0; j < gt.joint_count(); ++j) {
      const Vec3& p = gt.joints[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)];
      out << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
          << format_double(p.z()) << ','
          << static_cast<int>(gt.visible[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)]);
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing ground truth " + path.string());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("ground truth " + path.string() + ": empty file");
  const std::vector<std::string> header = split(line, ',');
  if (header.empty() || header[0] != "frame")
    throw ParseError("ground truth " + path.string() + ": first column must be 'frame'");

  GroundTruth gt;
  std::size_t col = 1;
  while (col < header.size() && header[col].rfind("theta_", 0) == 0) ++col;
  const std::size_t ntheta = col - 1;
  if ((header.size() - col) % 4 != 0)
    throw ParseError("ground truth " + path.string() + ": joint columns must come in groups of 4");
  for (; col < header.size(); col += 4) {
    const std::string& c = header[col];
    if (c.size() < 2 || c.substr(c.size() - 2) != "_x")
      throw ParseError("ground truth " + path.string() + ": expected joint x column, got '" + c +
                       "'");
    gt.joint_names.push_back(c.substr(0, c.size() - 2));
  }

  int expected_frame = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> tok = split(line, ',');
    if (tok.size() != header.size())
      throw ParseError("ground truth " + path.string() + ": row " +
                       std::to_string(expected_frame) + " has " + std::to_string(tok.size()) +
                       " columns, expected " + std::to_string(header.size()));
    Eigen::VectorXd theta(ntheta);
    for (std::size_t k = 0; k < ntheta; ++k)
      theta[static_cast<Eigen::Index>(k)] = parse_double(tok[1 + k], "theta");
    std::vector<Vec3> joints(gt.joint_names.size());
    std::vector<std::uint8_t> vis(gt.joint_names.size());
    for (std::size_t j = 0; j < gt.joint_names.size(); ++j) {
      const std::size_t base = 1 + ntheta + j * 4;
      joints[j] = Vec3(parse_double(tok[base], "joint x"), parse_double(tok[base + 1], "joint y"),
                       parse_double(tok[base + 2], "joint z"));
      vis[j] = parse_long(tok[base + 3], "visibility") != 0;
    }
    gt.theta.push_back(std::move(theta));
    gt.joints.push_back(std::move(joints));
    gt.visible.push_back(std::move(vis));
    ++expected_frame;
  }
  return gt;
}

void save_posed_mesh(const std::filesystem::path& path, const PosedMesh& posed,
                     const std::vector<std::array<int, 3>>& triangles) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh " + path.string());
  out << "# warptrack posed mesh\n";
  for (const Vec3& v : posed.v)
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << "\n";
  for (const Vec3& n : posed.n)
    out << "vn " << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
        << format_double(n.z()) << "\n";
  for (const auto& t : triangles)
    out << "f " << t[0] + 1 << "//" << t[0] + 1 << ' ' << t[1] + 1 << "//" << t[1] + 1 << ' '
        << t[2] + 1 << "//" << t[2] + 1 << "\n";
  if (!out) throw IoError("failed writing mesh " + path.string());
}

}  // namespace warptrack
