#pragma once

#include <set>
#include <utility>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/mesh.hpp"
#include "primrep/primitive.hpp"

namespace primrep {

/// Mesh partitioned into primitive patches.
struct SegmentedMesh {
  HalfEdgeMesh he;
  std::vector<int> face_patch;
  std::vector<PrimitiveKind> patch_kind;

  const TriangleMesh& mesh() const { return he.mesh(); }
  int num_patches() const { return static_cast<int>(patch_kind.size()); }

  std::vector<int> patch_faces(int patch) const {
    std::vector<int> out;
    for (int f = 0; f < static_cast<int>(face_patch.size()); ++f)
      if (face_patch[f] == patch) out.push_back(f);
    return out;
  }

  /// Unordered patch pairs (a < b) sharing at least one mesh edge.
  std::set<std::pair<int, int>> adjacent_pairs() const {
    std::set<std::pair<int, int>> out;
    for (int h = 0; h < he.num_half_edges(); ++h) {
      const int t = he.twin(h);
      if (t == HalfEdgeMesh::kNone) continue;
      const int a = face_patch[HalfEdgeMesh::face(h)], b = face_patch[HalfEdgeMesh::face(t)];
      if (a != b) out.insert(std::minmax(a, b));
    }
    return out;
  }
};

inline SegmentedMesh make_segmented(const TriangleMesh& mesh, std::vector<int> face_patch,
                                    std::vector<PrimitiveKind> kinds) {
  if (face_patch.size() != mesh.triangles.size())
    throw Error(ErrorCode::InvalidMesh, "face label count does not match the mesh");
  for (int p : face_patch)
    if (p < 0 || p >= static_cast<int>(kinds.size())) throw Error(ErrorCode::InvalidMesh, "face label out of range");
  return {HalfEdgeMesh(mesh), std::move(face_patch), std::move(kinds)};
}

}  // namespace primrep
