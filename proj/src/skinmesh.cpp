#include "warptrack/skinmesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "warptrack/parallel.hpp"

namespace warptrack {

void SkinnedMesh::finalize() {
  const std::size_t nv = v0.size();
  triangles.clear();
  for (const auto& poly : polys) {
    // Out-of-range polys are kept in `polys` so validation can name them but
    // never enter the triangulation.
    bool in_range = true;
    for (int vi : poly)
      if (vi < 0 || static_cast<std::size_t>(vi) >= nv) in_range = false;
    if (!in_range) continue;
    if (poly.size() == 3) {
      triangles.push_back({poly[0], poly[1], poly[2]});
    } else if (poly.size() == 4) {
      const double d02 = (v0[static_cast<std::size_t>(poly[0])] -
                          v0[static_cast<std::size_t>(poly[2])]).squaredNorm();
      const double d13 = (v0[static_cast<std::size_t>(poly[1])] -
                          v0[static_cast<std::size_t>(poly[3])]).squaredNorm();
      if (d02 <= d13) {
        triangles.push_back({poly[0], poly[1], poly[2]});
        triangles.push_back({poly[0], poly[2], poly[3]});
      } else {
        triangles.push_back({poly[0], poly[1], poly[3]});
        triangles.push_back({poly[1], poly[2], poly[3]});
      }
    } else {
      // General fan; only triangles and quads are produced by our tools.
      for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        triangles.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }

  std::vector<int> counts(nv, 0);
  for (const auto& t : triangles)
    for (int vi : t) ++counts[static_cast<std::size_t>(vi)];
  vertex_tri_offsets.assign(nv + 1, 0);
  for (std::size_t i = 0; i < nv; ++i)
    vertex_tri_offsets[i + 1] = vertex_tri_offsets[i] + counts[i];
  vertex_tri_items.assign(static_cast<std::size_t>(vertex_tri_offsets[nv]), 0);
  std::vector<int> cursor(vertex_tri_offsets.begin(), vertex_tri_offsets.end() - 1);
  for (std::size_t f = 0; f < triangles.size(); ++f)
    for (int vi : triangles[f])
      vertex_tri_items[static_cast<std::size_t>(cursor[static_cast<std::size_t>(vi)]++)] =
          static_cast<int>(f);

  if (phi.size() != nv) phi.assign(nv, Vec3::Zero());
}

BlendResult blend(const std::vector<DualQuat>& offsets, const VertexWeights& w) {
  BlendResult r;
  if (w.count == 0) return r;

  const Quat& pivot = offsets[static_cast<std::size_t>(w.entry[0].link)].real;
  DualQuat sum{{0, 0, 0, 0}, {0, 0, 0, 0}};
  for (int s = 0; s < w.count; ++s) {
    const DualQuat& h = offsets[static_cast<std::size_t>(w.entry[static_cast<std::size_t>(s)].link)];
    const double sign = pivot.dot(h.real) < 0.0 ? -1.0 : 1.0;
    r.sign[static_cast<std::size_t>(s)] = sign;
    sum = sum + h * (sign * w.entry[static_cast<std::size_t>(s)].w);
  }
  r.raw = sum;
  if (sum.real.norm() <= 1e-12) return r;  // degenerate; posed left identity, ok stays false
  r.posed = normalize(sum);
  r.ok = true;
  return r;
}

std::pair<std::vector<Vec3>, std::vector<std::uint8_t>> compute_normals(
    const std::vector<Vec3>& v, const std::vector<std::array<int, 3>>& faces) {
  std::vector<Vec3> acc(v.size(), Vec3::Zero());
  for (const auto& f : faces) {
    const Vec3& a = v[static_cast<std::size_t>(f[0])];
    const Vec3 cross = (v[static_cast<std::size_t>(f[1])] - a)
                           .cross(v[static_cast<std::size_t>(f[2])] - a);
    for (int vi : f) acc[static_cast<std::size_t>(vi)] += cross;
  }
  std::vector<Vec3> n(v.size(), Vec3::Zero());
  std::vector<std::uint8_t> support(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double len = acc[i].norm();
    if (len > 1e-20) {
      n[i] = acc[i] / len;
      support[i] = 1;
    }
  }
  return {std::move(n), std::move(support)};
}

PosedMesh skin(const SkinnedMesh& mesh, const std::vector<DualQuat>& offsets, int threads) {
  return skin(mesh, offsets, mesh.phi, threads);
}

PosedMesh skin(const SkinnedMesh& mesh, const std::vector<DualQuat>& offsets,
               const std::vector<Vec3>& phi_override, int threads) {
  const std::size_t nv = mesh.v0.size();
  PosedMesh out;
  out.v.resize(nv);
  out.n.assign(nv, Vec3::Zero());
  out.valid.assign(nv, 1);

  parallel_for(nv, threads, [&](std::size_t i) {
    const BlendResult b = blend(offsets, mesh.weights[i]);
    const Vec3 rest = mesh.v0[i] + phi_override[i];
    if (b.ok) {
      out.v[i] = transform_point(b.posed, rest);
    } else {
      out.v[i] = rest;  // placeholder; vertex is excluded from association
      out.valid[i] = 0;
    }
  });

  // Vertex normals from the posed surface, accumulated per vertex over its
  // incident triangles in CSR order so results are thread-count independent.
  parallel_for(nv, threads, [&](std::size_t i) {
    Vec3 acc = Vec3::Zero();
    for (int c = mesh.vertex_tri_offsets[i]; c < mesh.vertex_tri_offsets[i + 1]; ++c) {
      const auto& f = mesh.triangles[static_cast<std::size_t>(
          mesh.vertex_tri_items[static_cast<std::size_t>(c)])];
      const Vec3& a = out.v[static_cast<std::size_t>(f[0])];
      acc += (out.v[static_cast<std::size_t>(f[1])] - a)
                 .cross(out.v[static_cast<std::size_t>(f[2])] - a);
    }
    const double len = acc.norm();
    if (len > 1e-20)
      out.n[i] = acc / len;
    else
      out.valid[i] = 0;
  });
  return out;
}

namespace {

struct GridKnn {
  // Uniform hash grid over the template vertices for exact k-NN queries.
  double cell = 1.0;
  Vec3 origin = Vec3::Zero();
  int nx = 1, ny = 1, nz = 1;
  std::vector<int> offsets, items;

  explicit GridKnn(const std::vector<Vec3>& pts) {
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double n = static_cast<double>(pts.size());
    const Vec3 span = (hi - lo).cwiseMax(1e-9);
    // Volume heuristic, with a floor so flat or collinear inputs still get a
    // grid of O(n) cells.
    cell = std::max({1e-9, std::cbrt(span.x() * span.y() * span.z() / n) * 1.5,
                     span.maxCoeff() / (2.0 * std::cbrt(n) + 1.0)});
    origin = lo;
    nx = static_cast<int>(span.x() / cell) + 1;
    ny = static_cast<int>(span.y() / cell) + 1;
    nz = static_cast<int>(span.z() / cell) + 1;

    std::vector<int> counts(static_cast<std::size_t>(nx) * ny * nz, 0);
    std::vector<int> cells(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cells[i] = cell_index(pts[i]);
      ++counts[static_cast<std::size_t>(cells[i])];
    }
    offsets.assign(counts.size() + 1, 0);
    for (std::size_t c = 0; c < counts.size(); ++c) offsets[c + 1] = offsets[c] + counts[c];
    items.resize(pts.size());
    std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i)
      items[static_cast<std::size_t>(cursor[static_cast<std::size_t>(cells[i])]++)] =
          static_cast<int>(i);
  }

  int clampi(int v, int n) const { return std::min(std::max(v, 0), n - 1); }

  int cell_index(const Vec3& p) const {
    const int ix = clampi(static_cast<int>((p.x() - origin.x()) / cell), nx);
    const int iy = clampi(static_cast<int>((p.y() - origin.y()) / cell), ny);
    const int iz = clampi(static_cast<int>((p.z() - origin.z()) / cell), nz);
    return (iz * ny + iy) * nx + ix;
  }
};

}  // namespace

std::vector<std::vector<int>> build_neighbors(const std::vector<Vec3>& v0, int k) {
  const std::size_t nv = v0.size();
  std::vector<std::vector<int>> out(nv);
  if (nv <= 1 || k < 1) return out;
  const int want = std::min<int>(k, static_cast<int>(nv) - 1);

  GridKnn grid(v0);
  using Cand = std::pair<double, int>;  // (squared distance, index)

  for (std::size_t i = 0; i < nv; ++i) {
    std::vector<Cand> best;
    best.reserve(static_cast<std::size_t>(want) + 1);
    const Vec3& q = v0[i];
    const int cx = grid.clampi(static_cast<int>((q.x() - grid.origin.x()) / grid.cell), grid.nx);
    const int cy = grid.clampi(static_cast<int>((q.y() - grid.origin.y()) / grid.cell), grid.ny);
    const int cz = grid.clampi(static_cast<int>((q.z() - grid.origin.z()) / grid.cell), grid.nz);

    auto consider = [&](int j) {
      if (static_cast<std::size_t>(j) == i) return;
      const Cand c{(v0[static_cast<std::size_t>(j)] - q).squaredNorm(), j};
      auto pos = std::lower_bound(best.begin(), best.end(), c);
      if (best.size() < static_cast<std::size_t>(want) || pos != best.end()) {
        best.insert(pos, c);
        if (best.size() > static_cast<std::size_t>(want)) best.pop_back();
      }
    };

    // Expand rings until the closest possible point of the next ring cannot
    // beat the current k-th best; exact because cell bounds are conservative.
    const int max_ring = std::max({grid.nx, grid.ny, grid.nz});
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best.size() == static_cast<std::size_t>(want)) {
        const double ring_min = (ring - 1) > 0 ? (ring - 1) * grid.cell : 0.0;
        if (ring_min * ring_min > best.back().first) break;
      }
      for (int dz = -ring; dz <= ring; ++dz)
        for (int dy = -ring; dy <= ring; ++dy)
          for (int dx = -ring; dx <= ring; ++dx) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const int ix = cx + dx, iy = cy + dy, iz = cz + dz;
            if (ix < 0 || iy < 0 || iz < 0 || ix >= grid.nx || iy >= grid.ny || iz >= grid.nz)
              continue;
            const std::size_t c = static_cast<std::size_t>((iz * grid.ny + iy) * grid.nx + ix);
            for (int s = grid.offsets[c]; s < grid.offsets[c + 1]; ++s)
              consider(grid.items[static_cast<std::size_t>(s)]);
          }
    }
    out[i].reserve(best.size());
    for (const Cand& c : best) out[i].push_back(c.second);
  }
  return out;
}

namespace {

// Sparse affine combination of per-vertex weight vectors, used to interpolate
// skin weights with the same scheme as positions.
using WeightMap = std::map<int, double>;

void accumulate_weights(WeightMap& dst, const VertexWeights& src, double coeff) {
  for (int s = 0; s < src.count; ++s)
    dst[src.entry[static_cast<std::size_t>(s)].link] +=
        coeff * src.entry[static_cast<std::size_t>(s)].w;
}

void accumulate_weights(WeightMap& dst, const WeightMap& src, double coeff) {
  for (const auto& [link, w] : src) dst[link] += coeff * w;
}

VertexWeights truncate_weights(const WeightMap& m) {
  std::vector<std::pair<int, double>> entries(m.begin(), m.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (entries.size() > 4) entries.resize(4);
  double sum = 0.0;
  for (const auto& [link, w] : entries) sum += w;
  std::sort(entries.begin(), entries.end());
  VertexWeights out;
  for (const auto& [link, w] : entries)
    if (w > 0.0) out.add(link, w / sum);
  return out;
}

struct EdgeKey {
  int a, b;
  bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const {
    return std::hash<long long>()((static_cast<long long>(k.a) << 32) ^ k.b);
  }
};

struct SubdivMesh {
  std::vector<Vec3> pos;
  std::vector<Vec3> phi;
  std::vector<WeightMap> w;
  std::vector<std::vector<int>> faces;
};

SubdivMesh catmull_clark_once(const SubdivMesh& in) {
  const std::size_t nv = in.pos.size();
  const std::size_t nf = in.faces.size();

  struct Edge {
    int a, b;
    int faces[2] = {-1, -1};
    int nfaces = 0;
  };
  std::unordered_map<EdgeKey, int, EdgeKeyHash> edge_index;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> face_edges(nf);

  for (std::size_t f = 0; f < nf; ++f) {
    const auto& poly = in.faces[f];
    face_edges[f].resize(poly.size());
    for (std::size_t s = 0; s < poly.size(); ++s) {
      const int a = poly[s], b = poly[(s + 1) % poly.size()];
      const EdgeKey key{std::min(a, b), std::max(a, b)};
      auto it = edge_index.find(key);
      int e;
      if (it == edge_index.end()) {
        e = static_cast<int>(edges.size());
        edge_index.emplace(key, e);
        edges.push_back({key.a, key.b, {-1, -1}, 0});
      } else {
        e = it->second;
      }
      Edge& edge = edges[static_cast<std::size_t>(e)];
      if (edge.nfaces >= 2)
        throw NonManifold("edge (" + std::to_string(key.a) + ", " + std::to_string(key.b) +
                          ") has more than two incident faces");
      edge.faces[edge.nfaces++] = static_cast<int>(f);
      face_edges[f][s] = e;
    }
  }
  const std::size_t ne = edges.size();

  SubdivMesh out;
  out.pos.resize(nv + ne + nf);
  out.phi.resize(nv + ne + nf);
  out.w.resize(nv + ne + nf);

  const int face_base = static_cast<int>(nv + ne);
  const int edge_base = static_cast<int>(nv);

  // Face points: centroid of the face.
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& poly = in.faces[f];
    const double c = 1.0 / static_cast<double>(poly.size());
    Vec3 p = Vec3::Zero(), ph = Vec3::Zero();
    WeightMap wm;
    for (int vi : poly) {
      p += in.pos[static_cast<std::size_t>(vi)] * c;
      ph += in.phi[static_cast<std::size_t>(vi)] * c;
      accumulate_weights(wm, in.w[static_cast<std::size_t>(vi)], c);
    }
    out.pos[static_cast<std::size_t>(face_base) + f] = p;
    out.phi[static_cast<std::size_t>(face_base) + f] = ph;
    out.w[static_cast<std::size_t>(face_base) + f] = std::move(wm);
  }

  // Edge points: average of endpoints and adjacent face points; boundary
  // edges use the midpoint.
  for (std::size_t e = 0; e < ne; ++e) {
    const Edge& edge = edges[e];
    WeightMap wm;
    Vec3 p, ph;
    if (edge.nfaces == 2) {
      p = (in.pos[static_cast<std::size_t>(edge.a)] + in.pos[static_cast<std::size_t>(edge.b)] +
           out.pos[static_cast<std::size_t>(face_base + edge.faces[0])] +
           out.pos[static_cast<std::size_t>(face_base + edge.faces[1])]) *
          0.25;
      ph = (in.phi[static_cast<std::size_t>(edge.a)] + in.phi[static_cast<std::size_t>(edge.b)] +
            out.phi[static_cast<std::size_t>(face_base + edge.faces[0])] +
            out.phi[static_cast<std::size_t>(face_base + edge.faces[1])]) *
           0.25;
      accumulate_weights(wm, in.w[static_cast<std::size_t>(edge.a)], 0.25);
      accumulate_weights(wm, in.w[static_cast<std::size_t>(edge.b)], 0.25);
      accumulate_weights(wm, out.w[static_cast<std::size_t>(face_base + edge.faces[0])], 0.25);
      accumulate_weights(wm, out.w[static_cast<std::size_t>(face_base + edge.faces[1])], 0.25);
    } else {
      p = (in.pos[static_cast<std::size_t>(edge.a)] + in.pos[static_cast<std::size_t>(edge.b)]) * 0.5;
      ph = (in.phi[static_cast<std::size_t>(edge.a)] + in.phi[static_cast<std::size_t>(edge.b)]) * 0.5;
      accumulate_weights(wm, in.w[static_cast<std::size_t>(edge.a)], 0.5);
      accumulate_weights(wm, in.w[static_cast<std::size_t>(edge.b)], 0.5);
    }
    out.pos[static_cast<std::size_t>(edge_base) + e] = p;
    out.phi[static_cast<std::size_t>(edge_base) + e] = ph;
    out.w[static_cast<std::size_t>(edge_base) + e] = std::move(wm);
  }

  // Original vertices: (F + 2R + (n-3)P)/n with F the average incident face
  // point, R the average incident edge midpoint, n the valence. Boundary
  // vertices use the crease rule (m1 + 6P + m2)/8.
  std::vector<std::vector<int>> vertex_edges(nv);
  for (std::size_t e = 0; e < ne; ++e) {
    vertex_edges[static_cast<std::size_t>(edges[e].a)].push_back(static_cast<int>(e));
    vertex_edges[static_cast<std::size_t>(edges[e].b)].push_back(static_cast<int>(e));
  }
  std::vector<std::vector<int>> vertex_faces(nv);
  for (std::size_t f = 0; f < nf; ++f)
    for (int vi : in.faces[f]) vertex_faces[static_cast<std::size_t>(vi)].push_back(static_cast<int>(f));

  for (std::size_t i = 0; i < nv; ++i) {
    const auto& ve = vertex_edges[i];
    const auto& vf = vertex_faces[i];
    WeightMap wm;
    Vec3 p = Vec3::Zero(), ph = Vec3::Zero();

    bool boundary = false;
    for (int e : ve)
      if (edges[static_cast<std::size_t>(e)].nfaces < 2) boundary = true;

    if (ve.empty()) {  // isolated vertex; keep as is
      p = in.pos[i];
      ph = in.phi[i];
      wm = in.w[i];
    } else if (boundary) {
      // Crease rule (m1 + 6P + m2)/8 over the boundary edge midpoints.
      for (int e : ve) {
        const Edge& edge = edges[static_cast<std::size_t>(e)];
        if (edge.nfaces < 2) {
          const int other = edge.a == static_cast<int>(i) ? edge.b : edge.a;
          p += (in.pos[i] + in.pos[static_cast<std::size_t>(other)]) * 0.5;
          ph += (in.phi[i] + in.phi[static_cast<std::size_t>(other)]) * 0.5;
          accumulate_weights(wm, in.w[i], 0.5 / 8.0);
          accumulate_weights(wm, in.w[static_cast<std::size_t>(other)], 0.5 / 8.0);
        }
      }
      p = p / 8.0 + in.pos[i] * (6.0 / 8.0);
      ph = ph / 8.0 + in.phi[i] * (6.0 / 8.0);
      accumulate_weights(wm, in.w[i], 6.0 / 8.0);
    } else {
      const double n = static_cast<double>(ve.size());
      Vec3 favg = Vec3::Zero(), favg_phi = Vec3::Zero();
      WeightMap fw;
      for (int f : vf) {
        favg += out.pos[static_cast<std::size_t>(face_base + f)];
        favg_phi += out.phi[static_cast<std::size_t>(face_base + f)];
        accumulate_weights(fw, out.w[static_cast<std::size_t>(face_base + f)],
                           1.0 / static_cast<double>(vf.size()));
      }
      favg /= static_cast<double>(vf.size());
      favg_phi /= static_cast<double>(vf.size());

      Vec3 ravg = Vec3::Zero(), ravg_phi = Vec3::Zero();
      WeightMap rw;
      for (int e : ve) {
        const Edge& edge = edges[static_cast<std::size_t>(e)];
        ravg += (in.pos[static_cast<std::size_t>(edge.a)] +
                 in.pos[static_cast<std::size_t>(edge.b)]) * 0.5;
        ravg_phi += (in.phi[static_cast<std::size_t>(edge.a)] +
                     in.phi[static_cast<std::size_t>(edge.b)]) * 0.5;
        accumulate_weights(rw, in.w[static_cast<std::size_t>(edge.a)], 0.5 / n);
        accumulate_weights(rw, in.w[static_cast<std::size_t>(edge.b)], 0.5 / n);
      }
      ravg /= n;
      ravg_phi /= n;

      p = (favg + 2.0 * ravg + (n - 3.0) * in.pos[i]) / n;
      ph = (favg_phi + 2.0 * ravg_phi + (n - 3.0) * in.phi[i]) / n;
      accumulate_weights(wm, fw, 1.0 / n);
      accumulate_weights(wm, rw, 2.0 / n);
      accumulate_weights(wm, in.w[i], (n - 3.0) / n);
    }
    out.pos[i] = p;
    out.phi[i] = ph;
    out.w[i] = std::move(wm);
  }

  // New faces: one quad per original face corner.
  out.faces.reserve(nf * 4);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& poly = in.faces[f];
    const std::size_t n = poly.size();
    for (std::size_t s = 0; s < n; ++s) {
      out.faces.push_back({poly[s],
                           edge_base + face_edges[f][s],
                           face_base + static_cast<int>(f),
                           edge_base + face_edges[f][(s + n - 1) % n]});
    }
  }
  return out;
}

}  // namespace

SkinnedMesh subdivide(const SkinnedMesh& mesh, int iterations) {
  SubdivMesh work;
  work.pos = mesh.v0;
  work.phi = mesh.phi.size() == mesh.v0.size() ? mesh.phi
                                               : std::vector<Vec3>(mesh.v0.size(), Vec3::Zero());
  work.faces = mesh.polys;
  work.w.resize(mesh.v0.size());
  for (std::size_t i = 0; i < mesh.v0.size(); ++i) {
    WeightMap m;
    accumulate_weights(m, mesh.weights[i], 1.0);
    work.w[i] = std::move(m);
  }

  for (int it = 0; it < iterations; ++it) work = catmull_clark_once(work);

  SkinnedMesh out;
  out.v0 = std::move(work.pos);
  out.phi = std::move(work.phi);
  out.polys = std::move(work.faces);
  out.weights.resize(out.v0.size());
  for (std::size_t i = 0; i < out.v0.size(); ++i)
    out.weights[i] = truncate_weights(work.w[i]);
  out.finalize();
  return out;
}

}  // namespace warptrack
