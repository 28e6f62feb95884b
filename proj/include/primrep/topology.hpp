#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/segmented.hpp"

namespace primrep {

struct TopoVertex {
  int mesh_vertex = -1;
  Vec3 position;
  std::vector<int> patches;  // sorted
};

/// Maximal chain of mesh edges between two patches. Half-edges run along the
/// boundary of `left` (the lower patch id); `right` is the patch across.
struct TopoEdge {
  int left = -1;
  int right = -1;
  bool closed = false;
  int start = -1;  // topo vertex ids, -1 for closed loops
  int end = -1;
  std::vector<int> chain;       // mesh vertices; closed loops do not repeat the first
  std::vector<int> half_edges;  // in chain order, all on the left patch

  std::vector<Vec3> points(const TriangleMesh& mesh) const {
    std::vector<Vec3> out;
    for (int v : chain) out.push_back(mesh.vertices[v]);
    if (closed && !chain.empty()) out.push_back(mesh.vertices[chain.front()]);
    return out;
  }
};

struct LoopUse {
  int edge = -1;
  bool reversed = false;  // true when the face traverses the edge against its orientation
};

struct TopoLoop {
  std::vector<LoopUse> uses;
  double length = 0;
};

struct TopoFace {
  int patch = -1;
  std::vector<TopoLoop> loops;  // outer loop first
};

struct TopologicalComplex {
  std::vector<TopoVertex> vertices;
  std::vector<TopoEdge> edges;
  std::vector<TopoFace> faces;
  int mesh_euler = 2;  // V - E + F of the underlying triangle mesh

  int num_closed_edges() const {
    return static_cast<int>(std::count_if(edges.begin(), edges.end(), [](const TopoEdge& e) { return e.closed; }));
  }
  int num_inner_loops() const {
    int r = 0;
    for (const auto& f : faces) r += std::max<int>(0, static_cast<int>(f.loops.size()) - 1);
    return r;
  }
  /// Euler-Poincare sum with one virtual vertex per closed edge; equals the mesh's
  /// Euler characteristic for a consistent complex.
  int euler_sum() const {
    return static_cast<int>(vertices.size()) + num_closed_edges() - static_cast<int>(edges.size()) +
           static_cast<int>(faces.size()) - num_inner_loops();
  }
  bool euler_consistent() const { return euler_sum() == mesh_euler; }
};

namespace topo_detail {

inline int mesh_euler_characteristic(const HalfEdgeMesh& he) {
  std::vector<char> used(he.num_vertices(), 0);
  for (const auto& t : he.mesh().triangles)
    for (int v : t) used[v] = 1;
  const int nv = static_cast<int>(std::count(used.begin(), used.end(), 1));
  return nv - he.num_half_edges() / 2 + he.num_faces();
}

}  // namespace topo_detail

/// Next half-edge along the boundary of the patch containing h, rotating through
/// the patch's faces around target(h).
inline int next_boundary_half_edge(const SegmentedMesh& seg, int h) {
  const int patch = seg.face_patch[HalfEdgeMesh::face(h)];
  int g = HalfEdgeMesh::next(h);
  for (int guard = 0; guard < seg.he.num_half_edges(); ++guard) {
    const int t = seg.he.twin(g);
    if (seg.face_patch[HalfEdgeMesh::face(t)] != patch) return g;
    g = HalfEdgeMesh::next(t);
  }
  throw Error(ErrorCode::InvalidMesh, "boundary walk did not terminate");
}

inline TopologicalComplex extract_topology(const SegmentedMesh& seg) {
  const HalfEdgeMesh& he = seg.he;
  if (!he.watertight()) throw Error(ErrorCode::NonWatertightInput, "segmented mesh is not watertight");
  const TriangleMesh& mesh = seg.mesh();
  const int nh = he.num_half_edges();
  const auto patch_of = [&](int h) { return seg.face_patch[HalfEdgeMesh::face(h)]; };
  const auto is_boundary = [&](int h) { return patch_of(h) != patch_of(he.twin(h)); };

  TopologicalComplex tc;
  tc.mesh_euler = topo_detail::mesh_euler_characteristic(he);

  // Topo vertices: mesh vertices touching more than two patches.
  std::vector<std::set<int>> vpatches(mesh.vertices.size());
  for (int f = 0; f < he.num_faces(); ++f)
    for (int v : mesh.triangles[f]) vpatches[v].insert(seg.face_patch[f]);
  std::vector<int> topo_of(mesh.vertices.size(), -1);
  for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v) {
    if (vpatches[v].size() <= 2) continue;
    topo_of[v] = static_cast<int>(tc.vertices.size());
    tc.vertices.push_back({v, mesh.vertices[v], std::vector<int>(vpatches[v].begin(), vpatches[v].end())});
  }

  // Edges: chains of left-side half-edges (left = lower patch id).
  std::vector<char> taken(nh, 0);
  const auto grow = [&](int h0) {
    TopoEdge e;
    e.left = patch_of(h0);
    e.right = patch_of(he.twin(h0));
    int h = h0;
    for (int guard = 0; guard <= nh; ++guard) {
      e.half_edges.push_back(h);
      e.chain.push_back(he.origin(h));
      taken[h] = 1;
      const int tv = he.target(h);
      if (topo_of[tv] >= 0) {
        e.chain.push_back(tv);
        e.start = topo_of[e.chain.front()];
        e.end = topo_of[tv];
        return e;
      }
      h = next_boundary_half_edge(seg, h);
      if (h == h0) break;
      if (patch_of(he.twin(h)) != e.right)
        throw Error(ErrorCode::InvalidMesh, "patch boundary changes neighbour away from a topo vertex");
    }
    e.closed = true;
    return e;
  };

  std::vector<TopoEdge> open, closed;
  for (int h = 0; h < nh; ++h) {
    if (!is_boundary(h) || patch_of(h) > patch_of(he.twin(h))) continue;
    if (topo_of[he.origin(h)] < 0 || taken[h]) continue;
    open.push_back(grow(h));
  }
  for (int h = 0; h < nh; ++h) {
    if (!is_boundary(h) || patch_of(h) > patch_of(he.twin(h)) || taken[h]) continue;
    TopoEdge e = grow(h);
    if (!e.closed) throw Error(ErrorCode::InvalidMesh, "open chain without a starting topo vertex");
    const auto it = std::min_element(e.chain.begin(), e.chain.end());
    const auto k = it - e.chain.begin();
    std::rotate(e.chain.begin(), e.chain.begin() + k, e.chain.end());
    std::rotate(e.half_edges.begin(), e.half_edges.begin() + k, e.half_edges.end());
    closed.push_back(std::move(e));
  }
  std::sort(open.begin(), open.end(), [](const TopoEdge& a, const TopoEdge& b) {
    return std::tie(a.start, a.chain[1], a.left, a.right) < std::tie(b.start, b.chain[1], b.left, b.right);
  });
  std::sort(closed.begin(), closed.end(),
            [](const TopoEdge& a, const TopoEdge& b) { return a.chain.front() < b.chain.front(); });
  tc.edges = std::move(open);
  tc.edges.insert(tc.edges.end(), closed.begin(), closed.end());

  // Map every inter-patch half-edge (either side) to its edge.
  std::vector<LoopUse> use_of(nh);
  for (int e = 0; e < static_cast<int>(tc.edges.size()); ++e)
    for (int h : tc.edges[e].half_edges) {
      use_of[h] = {e, false};
      use_of[he.twin(h)] = {e, true};
    }

  // Faces and loops: cycles of boundary half-edges per patch.
  tc.faces.resize(seg.num_patches());
  for (int p = 0; p < seg.num_patches(); ++p) tc.faces[p].patch = p;
  std::vector<char> seen(nh, 0);
  for (int h0 = 0; h0 < nh; ++h0) {
    if (!is_boundary(h0) || seen[h0]) continue;
    // Start the loop at an edge boundary so uses are not split.
    int start = h0;
    {
      int h = h0;
      do {
        const int n = next_boundary_half_edge(seg, h);
        if (use_of[n].edge != use_of[h].edge) {
          start = n;
          break;
        }
        h = n;
      } while (h != h0);
    }
    TopoLoop loop;
    int h = start;
    do {
      seen[h] = 1;
      loop.length += (mesh.vertices[he.target(h)] - mesh.vertices[he.origin(h)]).norm();
      if (loop.uses.empty() || loop.uses.back().edge != use_of[h].edge) loop.uses.push_back(use_of[h]);
      h = next_boundary_half_edge(seg, h);
    } while (h != start);
    tc.faces[patch_of(start)].loops.push_back(std::move(loop));
  }
  for (auto& f : tc.faces)
    std::stable_sort(f.loops.begin(), f.loops.end(),
                     [](const TopoLoop& a, const TopoLoop& b) { return a.length > b.length; });
  return tc;
}

/// Topo edges between patches a and b (either order).
inline std::vector<int> edges_between(const TopologicalComplex& tc, int a, int b) {
  std::vector<int> out;
  for (int e = 0; e < static_cast<int>(tc.edges.size()); ++e)
    if ((tc.edges[e].left == a && tc.edges[e].right == b) || (tc.edges[e].left == b && tc.edges[e].right == a))
      out.push_back(e);
  return out;
}

}  // namespace primrep
