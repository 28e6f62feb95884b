#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "primrep/error.hpp"

namespace primrep {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<int, 3>;

/// Indexed triangle mesh. Normals are optional per-vertex unit vectors.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> normals;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  bool has_normals() const { return normals.size() == vertices.size() && !normals.empty(); }

  Vec3 face_normal(std::size_t f) const {
    const auto& t = triangles[f];
    Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    const double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3::Zero();
  }

  double face_area(std::size_t f) const {
    const auto& t = triangles[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }

  Vec3 face_centroid(std::size_t f) const {
    const auto& t = triangles[f];
    return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
  }

  double total_area() const {
    double a = 0;
    for (std::size_t f = 0; f < triangles.size(); ++f) a += face_area(f);
    return a;
  }
};

struct BoundingBox {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
};

inline BoundingBox bounding_box(const std::vector<Vec3>& pts) {
  BoundingBox b;
  for (const auto& p : pts) b.extend(p);
  return b;
}

/// Similarity transform x -> scale * x + offset.
struct Normalization {
  double scale = 1.0;
  Vec3 offset = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * p + offset; }
};

/// Scales and centers so the bounding box fits [-1,1]^3 with the largest side spanning 2.
/// Meshes already in that frame are left untouched.
inline Normalization normalize_to_unit_box(TriangleMesh& mesh) {
  Normalization n;
  if (mesh.vertices.empty()) return n;
  const BoundingBox box = bounding_box(mesh.vertices);
  const double ext = box.extent().maxCoeff();
  if (!(ext > 0)) throw Error(ErrorCode::InvalidMesh, "mesh has zero extent");
  const bool inside = (box.min.array() >= -1.0 - 1e-12).all() && (box.max.array() <= 1.0 + 1e-12).all();
  if (inside && std::abs(ext - 2.0) <= 1e-9) return n;
  n.scale = 2.0 / ext;
  n.offset = -n.scale * box.center();
  for (auto& v : mesh.vertices) v = n.apply(v);
  return n;
}

/// Area-weighted vertex normals.
inline void compute_vertex_normals(TriangleMesh& mesh) {
  mesh.normals.assign(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (int i : t) mesh.normals[i] += n;
  }
  for (auto& n : mesh.normals) {
    const double len = n.norm();
    n = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
  }
}

/// Drops zero-area triangles and triangles with repeated or out-of-range indices.
/// Returns the map from kept triangle to original index.
inline std::vector<int> clean_degenerate(TriangleMesh& mesh, double min_area = 1e-14) {
  std::vector<Triangle> kept;
  std::vector<int> origin;
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    bool ok = true;
    for (int i : t) ok = ok && i >= 0 && i < nv;
    ok = ok && t[0] != t[1] && t[1] != t[2] && t[0] != t[2];
    if (ok && mesh.face_area(f) > min_area) {
      kept.push_back(t);
      origin.push_back(static_cast<int>(f));
    }
  }
  mesh.triangles = std::move(kept);
  return origin;
}

/// Half-edge connectivity over a triangle mesh. Half-edge 3f+i runs from
/// triangle f's corner i to corner (i+1)%3.
class HalfEdgeMesh {
 public:
  static constexpr int kNone = -1;

  HalfEdgeMesh() = default;

  explicit HalfEdgeMesh(const TriangleMesh& mesh) : mesh_(mesh) {
    const int nf = static_cast<int>(mesh.triangles.size());
    const int nv = static_cast<int>(mesh.vertices.size());
    twin_.assign(3 * nf, kNone);
    outgoing_.assign(nv, kNone);
    std::map<std::pair<int, int>, int> directed;
    std::map<std::pair<int, int>, int> undirected_count;
    for (int f = 0; f < nf; ++f) {
      for (int i = 0; i < 3; ++i) {
        const int u = mesh.triangles[f][i];
        const int v = mesh.triangles[f][(i + 1) % 3];
        if (u < 0 || u >= nv || v < 0 || v >= nv) throw Error(ErrorCode::InvalidMesh, "vertex index out of range");
        const int h = 3 * f + i;
        if (!directed.emplace(std::make_pair(u, v), h).second)
          throw Error(ErrorCode::InconsistentOrientation,
                      "directed edge (" + std::to_string(u) + "," + std::to_string(v) + ") used twice");
        if (++undirected_count[std::minmax(u, v)] > 2)
          throw Error(ErrorCode::NonManifoldEdge,
                      "edge (" + std::to_string(u) + "," + std::to_string(v) + ") shared by more than two triangles");
        if (outgoing_[u] == kNone) outgoing_[u] = h;
      }
    }
    watertight_ = true;
    for (const auto& [key, h] : directed) {
      const auto it = directed.find({key.second, key.first});
      if (it != directed.end()) {
        twin_[h] = it->second;
      } else {
        watertight_ = false;
      }
    }
  }

  const TriangleMesh& mesh() const { return mesh_; }
  int num_half_edges() const { return static_cast<int>(twin_.size()); }
  int num_faces() const { return static_cast<int>(mesh_.triangles.size()); }
  int num_vertices() const { return static_cast<int>(mesh_.vertices.size()); }
  bool watertight() const { return watertight_; }

  int twin(int h) const { return twin_[h]; }
  static int next(int h) { return 3 * (h / 3) + (h % 3 + 1) % 3; }
  static int prev(int h) { return 3 * (h / 3) + (h % 3 + 2) % 3; }
  static int face(int h) { return h / 3; }
  int origin(int h) const { return mesh_.triangles[h / 3][h % 3]; }
  int target(int h) const { return origin(next(h)); }
  int outgoing(int v) const { return outgoing_[v]; }

  /// Faces sharing an edge with f (up to three).
  std::vector<int> face_neighbors(int f) const {
    std::vector<int> out;
    for (int i = 0; i < 3; ++i) {
      const int t = twin_[3 * f + i];
      if (t != kNone) out.push_back(face(t));
    }
    return out;
  }

  /// Outgoing half-edges around v, in rotation order. Requires a closed fan.
  std::vector<int> vertex_star(int v) const {
    std::vector<int> out;
    const int start = outgoing_[v];
    if (start == kNone) return out;
    int h = start;
    do {
      out.push_back(h);
      const int t = twin_[prev(h)];
      if (t == kNone) break;
      h = t;
    } while (h != start && out.size() <= twin_.size());
    return out;
  }

 private:
  TriangleMesh mesh_;
  std::vector<int> twin_;
  std::vector<int> outgoing_;
  bool watertight_ = false;
};

inline HalfEdgeMesh build_half_edge(const TriangleMesh& mesh) { return HalfEdgeMesh(mesh); }

/// Connected components of a face subset under edge adjacency; largest first,
/// ties broken by the smallest contained face index.
inline std::vector<std::vector<int>> face_components(const HalfEdgeMesh& he, const std::vector<int>& faces) {
  std::vector<char> in(he.num_faces(), 0), seen(he.num_faces(), 0);
  for (int f : faces) in[f] = 1;
  std::vector<int> sorted = faces;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<int>> comps;
  for (int s : sorted) {
    if (seen[s]) continue;
    std::vector<int> comp{s};
    seen[s] = 1;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      for (int g : he.face_neighbors(comp[i])) {
        if (in[g] && !seen[g]) {
          seen[g] = 1;
          comp.push_back(g);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

}  // namespace primrep
