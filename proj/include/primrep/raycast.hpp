#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "primrep/mesh.hpp"

namespace primrep {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

struct RayHit {
  int face = -1;
  double t = std::numeric_limits<double>::infinity();
};

/// Bounding volume hierarchy over a triangle mesh for first-hit queries.
class MeshBvh {
 public:
  explicit MeshBvh(const TriangleMesh& mesh) : mesh_(&mesh) {
    const int nf = static_cast<int>(mesh.triangles.size());
    order_.resize(nf);
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.resize(nf);
    for (int f = 0; f < nf; ++f) centroids_[f] = mesh.face_centroid(f);
    if (nf > 0) build(0, nf);
  }

  std::optional<RayHit> first_hit(const Ray& ray) const {
    if (nodes_.empty()) return std::nullopt;
    RayHit best;
    const Vec3 inv = ray.direction.cwiseInverse();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& n = nodes_[stack[--top]];
      if (!slab(n.box, ray.origin, inv, best.t)) continue;
      if (n.count > 0) {
        for (int i = n.first; i < n.first + n.count; ++i) {
          const int f = order_[i];
          double t;
          if (intersect(f, ray, t) && (t < best.t || (t == best.t && f < best.face))) {
            best.t = t;
            best.face = f;
          }
        }
      } else {
        stack[top++] = n.left;
        stack[top++] = n.right;
      }
    }
    if (best.face < 0) return std::nullopt;
    return best;
  }

 private:
  struct Node {
    BoundingBox box;
    int left = -1, right = -1;
    int first = 0, count = 0;
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    BoundingBox box, cbox;
    for (int i = begin; i < end; ++i) {
      for (int v : mesh_->triangles[order_[i]]) box.extend(mesh_->vertices[v]);
      cbox.extend(centroids_[order_[i]]);
    }
    nodes_[id].box = box;
    if (end - begin <= 4) {
      nodes_[id].first = begin;
      nodes_[id].count = end - begin;
      return id;
    }
    int axis;
    cbox.extent().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      const double ca = centroids_[a][axis], cb = centroids_[b][axis];
      return ca < cb || (ca == cb && a < b);
    });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  static bool slab(const BoundingBox& b, const Vec3& o, const Vec3& inv, double tmax) {
    double t0 = 0, t1 = tmax;
    for (int k = 0; k < 3; ++k) {
      double a = (b.min[k] - o[k]) * inv[k];
      double c = (b.max[k] - o[k]) * inv[k];
      if (a > c) std::swap(a, c);
      if (std::isnan(a) || std::isnan(c)) {
        if (o[k] < b.min[k] || o[k] > b.max[k]) return false;
        continue;
      }
      t0 = std::max(t0, a);
      t1 = std::min(t1, c);
      if (t0 > t1 * (1 + 1e-12) + 1e-12) return false;
    }
    return true;
  }

  bool intersect(int f, const Ray& ray, double& t) const {
    const auto& tri = mesh_->triangles[f];
    const Vec3& a = mesh_->vertices[tri[0]];
    const Vec3 e1 = mesh_->vertices[tri[1]] - a;
    const Vec3 e2 = mesh_->vertices[tri[2]] - a;
    const Vec3 p = ray.direction.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-18) return false;
    const double inv = 1.0 / det;
    const Vec3 s = ray.origin - a;
    const double u = s.dot(p) * inv;
    if (u < 0 || u > 1) return false;
    const Vec3 q = s.cross(e1);
    const double v = ray.direction.dot(q) * inv;
    if (v < 0 || u + v > 1) return false;
    t = e2.dot(q) * inv;
    return t > 0;
  }

  const TriangleMesh* mesh_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace primrep
