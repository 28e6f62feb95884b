#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "primrep/primitive.hpp"
#include "primrep/segmented.hpp"

namespace primrep {

struct Relation {
  int a = -1;  // a < b
  int b = -1;
  bool intersect = false;
  bool parallel = false;
  bool perpendicular = false;
  bool collinear = false;

  bool any() const { return intersect || parallel || perpendicular || collinear; }
  bool operator==(const Relation&) const = default;
};

struct GeometricFlags {
  bool parallel = false;
  bool perpendicular = false;
  bool collinear = false;
};

/// Direction and position predicates for one pair. Planes use their normal as the
/// axis but take no part in collinearity; spheres only in collinearity, via the center.
inline GeometricFlags geometric_relation(const Primitive& A, const Primitive& B, double tol = 0.05) {
  GeometricFlags g;
  const bool axA = has_axis(A.kind), axB = has_axis(B.kind);
  if (axA && axB) {
    const double d = std::abs(A.axis.dot(B.axis));
    g.parallel = d >= 1 - tol;
    g.perpendicular = d <= tol;
  }
  const bool planeA = A.kind == PrimitiveKind::Plane, planeB = B.kind == PrimitiveKind::Plane;
  if (planeA || planeB) return g;
  if (axA && axB) {
    g.collinear = g.parallel && std::max(point_line_distance(A.position, B.position, B.axis),
                                         point_line_distance(B.position, A.position, A.axis)) <= tol;
  } else if (axA != axB) {
    const Primitive& line = axA ? A : B;
    const Primitive& sphere = axA ? B : A;
    g.collinear = point_line_distance(sphere.position, line.position, line.axis) <= tol;
  }
  return g;
}

class RelationshipGraph {
 public:
  RelationshipGraph() = default;
  explicit RelationshipGraph(int num_patches) : n_(num_patches) {}

  int num_patches() const { return n_; }

  void set(const Relation& r) {
    Relation c = r;
    if (c.a > c.b) std::swap(c.a, c.b);
    if (c.any()) pairs_[{c.a, c.b}] = c;
    else pairs_.erase({c.a, c.b});
  }

  Relation get(int a, int b) const {
    const auto key = std::minmax(a, b);
    const auto it = pairs_.find(key);
    if (it != pairs_.end()) return it->second;
    return {key.first, key.second};
  }

  std::vector<Relation> relations() const {
    std::vector<Relation> out;
    for (const auto& [k, r] : pairs_) out.push_back(r);
    return out;
  }

  template <class Pred>
  std::vector<std::pair<int, int>> pairs_where(Pred pred) const {
    std::vector<std::pair<int, int>> out;
    for (const auto& [k, r] : pairs_)
      if (pred(r)) out.push_back(k);
    return out;
  }

  std::vector<std::pair<int, int>> intersect_pairs() const {
    return pairs_where([](const Relation& r) { return r.intersect; });
  }
  std::vector<std::pair<int, int>> parallel_pairs() const {
    return pairs_where([](const Relation& r) { return r.parallel; });
  }
  std::vector<std::pair<int, int>> perpendicular_pairs() const {
    return pairs_where([](const Relation& r) { return r.perpendicular; });
  }
  std::vector<std::pair<int, int>> collinear_pairs() const {
    return pairs_where([](const Relation& r) { return r.collinear; });
  }

  bool operator==(const RelationshipGraph&) const = default;

 private:
  int n_ = 0;
  std::map<std::pair<int, int>, Relation> pairs_;
};

/// Relationship graph from explicit adjacency and per-patch primitives.
inline RelationshipGraph relations_from(const std::vector<Primitive>& prims,
                                        const std::set<std::pair<int, int>>& adjacent, double tol = 0.05) {
  const int n = static_cast<int>(prims.size());
  RelationshipGraph g(n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const GeometricFlags f = geometric_relation(prims[a], prims[b], tol);
      g.set({a, b, adjacent.count({a, b}) > 0, f.parallel, f.perpendicular, f.collinear});
    }
  return g;
}

inline RelationshipGraph detect_relations(const SegmentedMesh& seg, const std::vector<Primitive>& prims,
                                          double tol = 0.05) {
  if (static_cast<int>(prims.size()) != seg.num_patches())
    throw Error(ErrorCode::InvalidPrimitive, "one primitive per patch is required");
  return relations_from(prims, seg.adjacent_pairs(), tol);
}

}  // namespace primrep
