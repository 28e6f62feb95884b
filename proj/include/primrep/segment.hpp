#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/fit.hpp"
#include "primrep/raycast.hpp"
#include "primrep/render.hpp"
#include "primrep/segmented.hpp"

namespace primrep {

/// 4-connected region of one label in one view; pixels are row-major indices.
struct MapComponent {
  int view = 0;
  Label label = Label::Background;
  std::vector<int> pixels;
};

inline constexpr int kMinComponentPixels = 16;

inline std::vector<MapComponent> split_by_feature_lines(const SemanticMap& map, int view = 0) {
  const int w = map.width, h = map.height;
  if (std::none_of(map.labels.begin(), map.labels.end(), [](Label l) { return l != Label::Background; }))
    throw Error(ErrorCode::EmptyMap, "label map has no foreground pixels");
  std::vector<char> seen(map.labels.size(), 0);
  std::vector<MapComponent> out;
  for (int start = 0; start < w * h; ++start) {
    const Label l = map.labels[start];
    if (seen[start] || l == Label::Background || l == Label::FeatureLine) continue;
    MapComponent c{view, l, {}};
    std::vector<int> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      c.pixels.push_back(p);
      const int col = p % w, row = p / w;
      const int nbr[4][2] = {{col - 1, row}, {col + 1, row}, {col, row - 1}, {col, row + 1}};
      for (const auto& [x, y] : nbr) {
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        const int q = y * w + x;
        if (!seen[q] && map.labels[q] == l) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    if (static_cast<int>(c.pixels.size()) < kMinComponentPixels) continue;
    std::sort(c.pixels.begin(), c.pixels.end());
    out.push_back(std::move(c));
  }
  return out;
}

namespace segment_detail {

/// Edge-connected pieces of a face set, largest first (ties: smallest face id).
inline std::vector<std::vector<int>> face_pieces(const HalfEdgeMesh& he, const std::vector<int>& faces) {
  std::vector<char> in(he.num_faces(), 0), seen(he.num_faces(), 0);
  for (int f : faces) in[f] = 1;
  std::vector<std::vector<int>> pieces;
  for (int f0 : faces) {
    if (seen[f0]) continue;
    std::vector<int> piece, stack{f0};
    seen[f0] = 1;
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      piece.push_back(f);
      for (int k = 0; k < 3; ++k) {
        const int t = he.twin(3 * f + k);
        if (t == HalfEdgeMesh::kNone) continue;
        const int g = HalfEdgeMesh::face(t);
        if (in[g] && !seen[g]) {
          seen[g] = 1;
          stack.push_back(g);
        }
      }
    }
    std::sort(piece.begin(), piece.end());
    pieces.push_back(std::move(piece));
  }
  std::stable_sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return pieces;
}

}  // namespace segment_detail

/// Faces hit by the component's pixel rays with their pixel counts, restricted to
/// the largest edge-connected subset.
inline std::map<int, int> backproject(const MapComponent& comp, const CameraRig& rig, const MeshBvh& bvh,
                                      const HalfEdgeMesh& he) {
  std::map<int, int> hits;
  for (int p : comp.pixels) {
    const auto hit = bvh.first_hit(rig.pixel_ray(comp.view, p % rig.width, p / rig.width));
    if (hit) ++hits[hit->face];
  }
  if (hits.empty()) throw Error(ErrorCode::NoHits, "component does not hit the mesh");
  std::vector<int> faces;
  for (const auto& [f, n] : hits) faces.push_back(f);
  const auto pieces = segment_detail::face_pieces(he, faces);
  std::map<int, int> out;
  for (int f : pieces.front()) out[f] = hits[f];
  return out;
}

struct ViewPatch {
  int view = 0;
  PrimitiveKind kind = PrimitiveKind::Plane;
  std::map<int, int> face_hits;  // face -> supporting pixel count
  int pixel_count = 0;
  Primitive primitive;
};

/// Bounded similarity of two fitted primitives in [0, 1]; 0 when kinds differ.
inline double primitive_similarity(const Primitive& A, const Primitive& B, double scale = 0.05) {
  if (A.kind != B.kind) return 0.0;
  const auto near = [&](double d) { return std::exp(-std::abs(d) / scale); };
  double w = has_axis(A.kind) ? std::abs(A.axis.dot(B.axis)) : 1.0;
  switch (A.kind) {
    case PrimitiveKind::Plane:
      w *= near(std::max(std::abs(A.axis.dot(B.position - A.position)), std::abs(B.axis.dot(A.position - B.position))));
      break;
    case PrimitiveKind::Cylinder:
      w *= near(A.radius - B.radius);
      w *= near(std::max(point_line_distance(A.position, B.position, B.axis),
                         point_line_distance(B.position, A.position, A.axis)));
      break;
    case PrimitiveKind::Cone:
      w *= near(A.semi_angle - B.semi_angle);
      w *= near((A.apex() - B.apex()).norm());
      break;
    case PrimitiveKind::Sphere:
      w *= near(A.radius - B.radius);
      w *= near((A.position - B.position).norm());
      break;
    case PrimitiveKind::Torus:
      w *= near(A.major_radius - B.major_radius) * near(A.minor_radius - B.minor_radius);
      w *= near((A.position - B.position).norm());
      break;
  }
  return std::clamp(w, 0.0, 1.0);
}

struct PatchGraphEdge {
  int a = -1;
  int b = -1;
  double weight = 0;
};

/// Edges between view patches that overlap (share a face) or touch (share a mesh edge).
inline std::vector<PatchGraphEdge> build_patch_graph(const std::vector<ViewPatch>& patches, const HalfEdgeMesh& he) {
  std::vector<std::vector<int>> on_face(he.num_faces());
  for (int i = 0; i < static_cast<int>(patches.size()); ++i)
    for (const auto& [f, n] : patches[i].face_hits) on_face[f].push_back(i);
  std::set<std::pair<int, int>> pairs;
  for (int f = 0; f < he.num_faces(); ++f) {
    const auto& here = on_face[f];
    for (std::size_t x = 0; x < here.size(); ++x)
      for (std::size_t y = x + 1; y < here.size(); ++y) pairs.insert(std::minmax(here[x], here[y]));
    for (int k = 0; k < 3; ++k) {
      const int t = he.twin(3 * f + k);
      if (t == HalfEdgeMesh::kNone) continue;
      for (int a : here)
        for (int b : on_face[HalfEdgeMesh::face(t)])
          if (a != b) pairs.insert(std::minmax(a, b));
    }
  }
  std::vector<PatchGraphEdge> edges;
  for (const auto& [a, b] : pairs) edges.push_back({a, b, primitive_similarity(patches[a].primitive, patches[b].primitive)});
  return edges;
}

/// Components holding two or more patches from the same view.
inline int cut_errors(const std::vector<ViewPatch>& patches, const std::vector<int>& component) {
  std::map<int, std::set<int>> views;
  std::set<int> collided;
  for (std::size_t i = 0; i < patches.size(); ++i)
    if (!views[component[i]].insert(patches[i].view).second) collided.insert(component[i]);
  return static_cast<int>(collided.size());
}

struct CutResult {
  double threshold = 0;
  int errors = 0;
  std::vector<int> component;  // per view patch
  int num_components = 0;
};

/// Threshold sweep over the distinct edge weights; the smallest threshold with
/// at least two components and the fewest same-view collisions wins.
inline CutResult choose_cut(const std::vector<ViewPatch>& patches, const std::vector<PatchGraphEdge>& edges) {
  const int n = static_cast<int>(patches.size());
  std::vector<double> taus;
  for (const auto& e : edges) taus.push_back(e.weight);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  if (taus.empty()) taus.push_back(1.0);

  std::optional<CutResult> best;
  for (double tau : taus) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](int i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (const auto& e : edges)
      if (e.weight >= tau) parent[find(e.a)] = find(e.b);
    std::map<int, int> ids;
    CutResult r;
    r.threshold = tau;
    r.component.resize(n);
    for (int i = 0; i < n; ++i) r.component[i] = ids.emplace(find(i), static_cast<int>(ids.size())).first->second;
    r.num_components = static_cast<int>(ids.size());
    if (r.num_components < 2) continue;
    r.errors = cut_errors(patches, r.component);
    if (!best || r.errors < best->errors) best = r;
  }
  if (!best) throw Error(ErrorCode::NoValidCut, "every threshold leaves a single component");
  return *best;
}

namespace segment_detail {

/// Breadth-first fill of unlabeled (-1) faces from their labeled neighbours.
/// A face first only accepts labels for which `accept(face, label)` holds; faces
/// left over are then filled unconditionally.
template <class Accept>
void flood_fill(const HalfEdgeMesh& he, std::vector<int>& label, Accept accept) {
  for (int pass = 0; pass < 2; ++pass) {
    std::deque<int> queue;
    for (int f = 0; f < he.num_faces(); ++f)
      if (label[f] >= 0) queue.push_back(f);
    if (queue.empty()) throw Error(ErrorCode::NoHits, "no face received a label");
    while (!queue.empty()) {
      const int f = queue.front();
      queue.pop_front();
      for (int k = 0; k < 3; ++k) {
        const int t = he.twin(3 * f + k);
        if (t == HalfEdgeMesh::kNone) continue;
        const int g = HalfEdgeMesh::face(t);
        if (label[g] < 0 && (pass == 1 || accept(g, label[f]))) {
          label[g] = label[f];
          queue.push_back(g);
        }
      }
    }
  }
}

inline void flood_fill(const HalfEdgeMesh& he, std::vector<int>& label) {
  flood_fill(he, label, [](int, int) { return true; });
}

}  // namespace segment_detail

/// Merges view patches into mesh patches through the threshold sweep, resolves
/// overlaps by pixel support, fills uncovered faces and keeps patches edge-connected.
/// Uncovered faces prefer neighbouring patches whose primitive they fit within `tol`.
inline SegmentedMesh graph_cut_merge(const std::vector<ViewPatch>& patches, const TriangleMesh& mesh,
                                     const FitConfig& tol = {}) {
  const HalfEdgeMesh he(mesh);
  const int nf = he.num_faces();
  const auto cut = choose_cut(patches, build_patch_graph(patches, he));
  const int nc = cut.num_components;

  // Pixel support of every component on every face.
  std::vector<std::map<int, int>> support(nf);
  std::vector<std::map<PrimitiveKind, int>> votes(nc);
  for (int i = 0; i < static_cast<int>(patches.size()); ++i) {
    const int c = cut.component[i];
    ++votes[c][patches[i].kind];
    for (const auto& [f, n] : patches[i].face_hits) support[f][c] += n;
  }
  std::vector<int> rep(nc, -1);
  for (int i = 0; i < static_cast<int>(patches.size()); ++i) {
    const int c = cut.component[i];
    if (rep[c] < 0 || patches[i].pixel_count > patches[rep[c]].pixel_count) rep[c] = i;
  }
  const auto fits = [&](int f, int c) {
    return is_inlier(patches[rep[c]].primitive, mesh.face_centroid(f), mesh.face_normal(f), tol.eps_d, tol.eps_n);
  };
  std::vector<int> label(nf, -1);
  for (int f = 0; f < nf; ++f) {
    int best = 0;
    for (const auto& [c, n] : support[f])
      if (n > best) {
        best = n;
        label[f] = c;
      }
  }
  segment_detail::flood_fill(he, label, fits);

  // Keep the largest connected piece per component; refill the rest.
  for (int c = 0; c < nc; ++c) {
    std::vector<int> faces;
    for (int f = 0; f < nf; ++f)
      if (label[f] == c) faces.push_back(f);
    if (faces.empty()) continue;
    const auto pieces = segment_detail::face_pieces(he, faces);
    for (std::size_t k = 1; k < pieces.size(); ++k)
      for (int f : pieces[k]) label[f] = -1;
  }
  segment_detail::flood_fill(he, label, fits);

  // Components that only touch once gaps are filled: merge adjacent ones when the
  // smaller one's faces fit the larger one's primitive.
  const auto kind_of_component = [&](int c) {
    return std::max_element(votes[c].begin(), votes[c].end(),
                            [](const auto& x, const auto& y) { return x.second < y.second; })
        ->first;
  };
  for (bool changed = true; changed;) {
    changed = false;
    std::set<std::pair<int, int>> touching;
    std::map<int, double> area;
    for (int f = 0; f < nf; ++f) area[label[f]] += mesh.face_area(f);
    for (int h = 0; h < he.num_half_edges(); ++h) {
      const int a = label[HalfEdgeMesh::face(h)], b = label[HalfEdgeMesh::face(he.twin(h))];
      if (a != b) touching.insert(std::minmax(a, b));
    }
    for (auto [a, b] : touching) {
      if (kind_of_component(a) != kind_of_component(b)) continue;
      if (area[b] > area[a]) std::swap(a, b);
      double inside = 0;
      for (int f = 0; f < nf; ++f)
        if (label[f] == b && fits(f, a)) inside += mesh.face_area(f);
      if (inside < 0.9 * area[b]) continue;
      for (int& l : label)
        if (l == b) l = a;
      for (const auto& [k, n] : votes[b]) votes[a][k] += n;
      if (patches[rep[b]].pixel_count > patches[rep[a]].pixel_count) rep[a] = rep[b];
      changed = true;
      break;
    }
  }

  // Renumber by first face; type by majority vote (ties to the lower kind).
  std::map<int, int> renumber;
  std::vector<int> face_patch(nf);
  std::vector<PrimitiveKind> kinds;
  for (int f = 0; f < nf; ++f) {
    const auto [it, fresh] = renumber.emplace(label[f], static_cast<int>(renumber.size()));
    if (fresh) {
      const auto& v = votes[label[f]];
      kinds.push_back(std::max_element(v.begin(), v.end(), [](const auto& a, const auto& b) {
                        return a.second < b.second;
                      })->first);
    }
    face_patch[f] = it->second;
  }
  return make_segmented(mesh, std::move(face_patch), std::move(kinds));
}

struct SegmentConfig {
  FitConfig fit;
  double same_view_merge = 0.9;  // same-view patches this similar are one primitive split by occlusion
};

/// Unites patches of one view whose fitted primitives agree to within `threshold`.
inline std::vector<ViewPatch> merge_same_view(const std::vector<ViewPatch>& patches, double threshold) {
  const int n = static_cast<int>(patches.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (patches[i].view == patches[j].view &&
          primitive_similarity(patches[i].primitive, patches[j].primitive) >= threshold)
        parent[find(j)] = find(i);
  std::vector<ViewPatch> out;
  std::map<int, int> slot;
  for (int i = 0; i < n; ++i) {
    const auto [it, fresh] = slot.emplace(find(i), static_cast<int>(out.size()));
    if (fresh) {
      out.push_back(patches[i]);
      continue;
    }
    ViewPatch& m = out[it->second];
    for (const auto& [f, c] : patches[i].face_hits) m.face_hits[f] += c;
    if (patches[i].pixel_count > m.pixel_count) m.primitive = patches[i].primitive;
    m.pixel_count += patches[i].pixel_count;
  }
  return out;
}

/// Full segmentation: split maps, back-project, fit each view patch, merge.
/// Patches that cannot be fitted are dropped; their faces are filled later.
inline SegmentedMesh segment_mesh(const TriangleMesh& mesh, const std::vector<SemanticMap>& maps,
                                  const CameraRig& rig, const SegmentConfig& cfg = {}) {
  if (maps.size() != rig.views.size()) throw Error(ErrorCode::Config, "map count does not match the camera rig");
  const HalfEdgeMesh he(mesh);
  if (!he.watertight()) throw Error(ErrorCode::NonWatertightInput, "mesh is not watertight");
  TriangleMesh normals_mesh = mesh;
  if (!normals_mesh.has_normals()) compute_vertex_normals(normals_mesh);
  const MeshBvh bvh(mesh);
  std::vector<ViewPatch> patches;
  std::vector<int> mask(mesh.triangles.size(), -1);
  for (int v = 0; v < static_cast<int>(maps.size()); ++v) {
    for (const auto& comp : split_by_feature_lines(maps[v], v)) {
      ViewPatch vp;
      vp.view = v;
      vp.kind = *kind_of(comp.label);
      try {
        vp.face_hits = backproject(comp, rig, bvh, he);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NoHits) continue;
        throw;
      }
      for (const auto& [f, n] : vp.face_hits) {
        vp.pixel_count += n;
        mask[f] = 0;
      }
      FitConfig fc = cfg.fit;
      fc.seed = cfg.fit.seed + static_cast<std::uint64_t>(patches.size());
      const auto s = patch_samples(normals_mesh, mask, 0);
      for (const auto& [f, n] : vp.face_hits) mask[f] = -1;
      try {
        vp.primitive = ransac_fit(vp.kind, s.points, s.normals, fc);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InsufficientSupport) continue;
        throw;
      }
      patches.push_back(std::move(vp));
    }
  }
  if (patches.empty()) throw Error(ErrorCode::NoHits, "no view patch could be back-projected and fitted");
  return graph_cut_merge(merge_same_view(patches, cfg.same_view_merge), mesh, cfg.fit);
}

}  // namespace primrep
