#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "primrep/curves.hpp"
#include "primrep/error.hpp"
#include "primrep/mesh.hpp"
#include "primrep/primitive.hpp"
#include "primrep/segmented.hpp"
#include "primrep/topology.hpp"

namespace primrep {

enum class BrepIssue { NoCurves, TangentialContact, VertexIntersectionFailed, LoopClosureFailed };

inline const char* to_string(BrepIssue i) {
  switch (i) {
    case BrepIssue::NoCurves: return "NoCurves";
    case BrepIssue::TangentialContact: return "TangentialContact";
    case BrepIssue::VertexIntersectionFailed: return "VertexIntersectionFailed";
    case BrepIssue::LoopClosureFailed: return "LoopClosureFailed";
  }
  return "Unknown";
}

struct BrepFlag {
  BrepIssue issue;
  int element = -1;  // topo edge, vertex or face id depending on the issue
};

struct CadVertex {
  Vec3 position = Vec3::Zero();
  int topo_vertex = -1;
  bool failed = false;
  double gap = 0;  // closest approach of the incident curves
};

struct CadEdge {
  int curve = -1;  // index into BRepModel::curves, -1 when no curve was found
  double t0 = 0, t1 = 0;
  bool closed = false;
  int start = -1, end = -1;  // CAD vertex ids, -1 for closed edges
  int left = -1, right = -1;  // patch ids
  int topo_edge = -1;
  std::vector<Vec3> reference;  // topo polyline in edge direction

  bool valid() const { return curve >= 0; }
};

struct CadEdgeUse {
  int edge = -1;
  bool reversed = false;
};

struct CadLoop {
  std::vector<CadEdgeUse> uses;
};

struct CadFace {
  int patch = -1;
  Primitive surface;
  bool flip_normal = false;  // surface normal points into the solid
  std::vector<CadLoop> loops;  // outer first
};

struct BRepModel {
  std::vector<Curve> curves;
  std::vector<CadVertex> vertices;
  std::vector<CadEdge> edges;
  std::vector<CadFace> faces;
  std::vector<BrepFlag> flags;

  Vec3 edge_point(int e, double s) const {
    const CadEdge& E = edges[e];
    return curves[E.curve].eval(E.t0 + s * (E.t1 - E.t0));
  }
  /// Point at fraction s along a use, following the use's direction.
  Vec3 use_point(const CadEdgeUse& u, double s) const { return edge_point(u.edge, u.reversed ? 1 - s : s); }
  Vec3 use_tangent(const CadEdgeUse& u, double s) const {
    const CadEdge& E = edges[u.edge];
    const double t = E.t0 + (u.reversed ? 1 - s : s) * (E.t1 - E.t0);
    Vec3 d = curves[E.curve].tangent(t);
    if (E.t1 < E.t0) d = -d;
    return u.reversed ? Vec3(-d) : d;
  }
  bool has_issue(BrepIssue i) const {
    return std::any_of(flags.begin(), flags.end(), [&](const BrepFlag& f) { return f.issue == i; });
  }
};

struct BrepOptions {
  IntersectOptions intersect;
  double vertex_tolerance = 1e-4;
  double loop_tolerance = 1e-4;
};

namespace brep_detail {

inline double polyline_distance(const std::vector<Vec3>& poly, const Vec3& q) {
  if (poly.size() == 1) return (poly[0] - q).norm();
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const Vec3 ab = poly[i + 1] - poly[i];
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0 ? std::clamp((q - poly[i]).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (poly[i] + s * ab - q).norm());
  }
  return best;
}

/// Gauss-Newton refinement of a point onto several surfaces at once.
inline Vec3 polish_vertex(const std::vector<const Primitive*>& prims, const Vec3& x0) {
  const auto residual = [&](const Vec3& x) {
    double r = 0;
    for (const auto* p : prims) r = std::max(r, implicit_distance(*p, x));
    return r;
  };
  Vec3 x = x0;
  double r = residual(x);
  for (int it = 0; it < 20 && r > 1e-14; ++it) {
    Eigen::MatrixXd J(prims.size(), 3);
    Eigen::VectorXd F(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i) {
      J.row(i) = surface_normal(*prims[i], x).transpose();
      F(i) = signed_distance(*prims[i], x);
    }
    const Vec3 step = J.completeOrthogonalDecomposition().solve(F);
    const Vec3 y = x - step;
    const double ry = residual(y);
    if (!(ry < r) || (y - x0).norm() > 1e-3) break;
    x = y;
    r = ry;
  }
  return x;
}

/// Majority orientation of a primitive's normal against the patch's mesh normals.
inline bool normal_flipped(const Primitive& P, const SegmentedMesh& seg, int patch) {
  const auto& mesh = seg.mesh();
  double score = 0;
  for (int f = 0; f < static_cast<int>(seg.face_patch.size()); ++f) {
    if (seg.face_patch[f] != patch) continue;
    const auto& t = mesh.triangles[f];
    const Vec3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    score += n.dot(surface_normal(P, c));
  }
  return score < 0;
}

}  // namespace brep_detail

/// Topology-preserving reconstruction of a B-rep from a topological complex and
/// one primitive per patch. Failures are recorded as flags, never thrown.
inline BRepModel reconstruct_brep(const TopologicalComplex& tc, const std::vector<Primitive>& prims,
                                  const SegmentedMesh& seg, const BrepOptions& opt = {}) {
  using namespace brep_detail;
  const TriangleMesh& mesh = seg.mesh();
  BRepModel model;

  // Curves per topo edge, intersections cached per patch pair.
  std::map<std::pair<int, int>, std::vector<int>> pair_curves;
  std::vector<int> edge_curve(tc.edges.size(), -1);
  for (int e = 0; e < static_cast<int>(tc.edges.size()); ++e) {
    const TopoEdge& te = tc.edges[e];
    const auto key = std::minmax(te.left, te.right);
    auto it = pair_curves.find(key);
    if (it == pair_curves.end()) {
      std::vector<int> ids;
      try {
        for (auto& c : intersect_surfaces(prims[key.first], prims[key.second], opt.intersect)) {
          ids.push_back(static_cast<int>(model.curves.size()));
          model.curves.push_back(std::move(c));
        }
      } catch (const Error& err) {
        if (err.code() != ErrorCode::TangentialContact) throw;
        model.flags.push_back({BrepIssue::TangentialContact, e});
      }
      it = pair_curves.emplace(key, std::move(ids)).first;
    }
    if (it->second.empty()) {
      model.flags.push_back({BrepIssue::NoCurves, e});
      continue;
    }
    std::vector<Curve> cand;
    for (int id : it->second) cand.push_back(model.curves[id]);
    edge_curve[e] = it->second[select_curve(cand, te.points(mesh))];
  }

  // Vertices from pairwise curve intersections of incident edges.
  std::vector<std::vector<int>> incident(tc.vertices.size());
  for (int e = 0; e < static_cast<int>(tc.edges.size()); ++e) {
    const TopoEdge& te = tc.edges[e];
    if (te.closed) continue;
    incident[te.start].push_back(e);
    if (te.end != te.start) incident[te.end].push_back(e);
  }
  for (int v = 0; v < static_cast<int>(tc.vertices.size()); ++v) {
    const TopoVertex& tv = tc.vertices[v];
    CadVertex cv;
    cv.topo_vertex = v;
    cv.position = tv.position;
    std::set<int> curves;
    for (int e : incident[v])
      if (edge_curve[e] >= 0) curves.insert(edge_curve[e]);
    const std::vector<int> cs(curves.begin(), curves.end());
    std::optional<CurveHit> best;
    double best_d = 1e300;
    std::optional<CurveHit> closest_gap;
    for (std::size_t i = 0; i < cs.size(); ++i)
      for (std::size_t j = i + 1; j < cs.size(); ++j)
        for (const auto& h : intersect_curves(model.curves[cs[i]], model.curves[cs[j]])) {
          if (!closest_gap || h.gap < closest_gap->gap) closest_gap = h;
          if (h.gap > opt.vertex_tolerance) continue;
          const double d = (h.point - tv.position).norm();
          if (d < best_d) best_d = d, best = h;
        }
    if (cs.size() == 1) {
      const Curve& c = model.curves[cs[0]];
      best = CurveHit{c.eval(c.closest_param(tv.position)), 0.0};
    }
    if (best) {
      std::vector<const Primitive*> ps;
      for (int p : tv.patches) ps.push_back(&prims[p]);
      cv.position = polish_vertex(ps, best->point);
      cv.gap = best->gap;
    } else {
      cv.failed = true;
      if (closest_gap) {
        cv.position = closest_gap->point;
        cv.gap = closest_gap->gap;
      }
      model.flags.push_back({BrepIssue::VertexIntersectionFailed, v});
    }
    model.vertices.push_back(cv);
  }

  // Edges: trim each curve between its vertices.
  for (int e = 0; e < static_cast<int>(tc.edges.size()); ++e) {
    const TopoEdge& te = tc.edges[e];
    CadEdge ce;
    ce.topo_edge = e;
    ce.left = te.left;
    ce.right = te.right;
    ce.closed = te.closed;
    ce.start = te.start;
    ce.end = te.end;
    ce.reference = te.points(mesh);
    ce.curve = edge_curve[e];
    if (ce.curve >= 0) {
      const Curve& c = model.curves[ce.curve];
      if (te.closed) {
        if (!c.closed()) {
          ce.curve = -1;
          model.flags.push_back({BrepIssue::LoopClosureFailed, e});
        } else {
          const Vec3 p0 = ce.reference.front();
          ce.t0 = c.closest_param(p0);
          const Vec3 dir = ce.reference[std::min<std::size_t>(1, ce.reference.size() - 1)] - p0;
          ce.t1 = ce.t0 + (c.tangent(ce.t0).dot(dir) >= 0 ? c.period() : -c.period());
        }
      } else {
        const Vec3 ps = model.vertices[te.start].position, pe = model.vertices[te.end].position;
        const double ts = c.closest_param(ps), te_ = c.closest_param(pe);
        ce.t0 = ts;
        if (!c.periodic()) {
          ce.t1 = te_;
        } else {
          const double P = c.period();
          double fwd = std::fmod(te_ - ts, P);
          if (fwd < 0) fwd += P;
          if (te.start == te.end || fwd < 1e-12) fwd = P;
          const double bwd = fwd - P;
          const auto mid_err = [&](double delta) {
            return polyline_distance(ce.reference, c.eval(ts + 0.5 * delta));
          };
          if (te.start == te.end) {
            const Vec3 dir = ce.reference[std::min<std::size_t>(1, ce.reference.size() - 1)] - ce.reference.front();
            ce.t1 = ts + (c.tangent(ts).dot(dir) >= 0 ? P : -P);
          } else {
            ce.t1 = ts + (mid_err(fwd) <= mid_err(bwd) ? fwd : bwd);
          }
        }
      }
    }
    model.edges.push_back(std::move(ce));
  }

  // Faces inherit the topo loops.
  for (const TopoFace& tf : tc.faces) {
    CadFace cf;
    cf.patch = tf.patch;
    cf.surface = prims[tf.patch];
    cf.flip_normal = normal_flipped(cf.surface, seg, tf.patch);
    for (const TopoLoop& tl : tf.loops) {
      CadLoop cl;
      for (const LoopUse& u : tl.uses) cl.uses.push_back({u.edge, u.reversed});
      cf.loops.push_back(std::move(cl));
    }
    model.faces.push_back(std::move(cf));
  }
  return model;
}

struct ValidationReport {
  std::vector<char> hanging;  // per face
  std::vector<char> suspect;  // per face, incident to a failed vertex
  std::vector<int> edge_uses;
  int euler = 0;
  double max_vertex_residual = 0;
  double max_edge_residual = 0;
  double max_loop_gap = 0;
  int orientation_violations = 0;

  int hanging_count() const { return static_cast<int>(std::count(hanging.begin(), hanging.end(), 1)); }
  int suspect_count() const { return static_cast<int>(std::count(suspect.begin(), suspect.end(), 1)); }
  double hanging_fraction() const { return hanging.empty() ? 0.0 : double(hanging_count()) / double(hanging.size()); }
  bool watertight() const {
    return hanging_count() == 0 && std::all_of(edge_uses.begin(), edge_uses.end(), [](int n) { return n == 2; });
  }
};

/// Watertightness audit: edge use counts, loop closure, residuals and orientation.
inline ValidationReport validate_watertight(const BRepModel& m, double loop_tolerance = 1e-4) {
  ValidationReport r;
  const int nf = static_cast<int>(m.faces.size());
  r.hanging.assign(nf, 0);
  r.suspect.assign(nf, 0);
  r.edge_uses.assign(m.edges.size(), 0);
  std::vector<int> forward(m.edges.size(), 0), backward(m.edges.size(), 0);
  for (const auto& f : m.faces)
    for (const auto& l : f.loops)
      for (const auto& u : l.uses) {
        ++r.edge_uses[u.edge];
        ++(u.reversed ? backward : forward)[u.edge];
      }
  std::map<int, const CadFace*> by_patch;
  for (const auto& f : m.faces) by_patch[f.patch] = &f;

  const auto use_start = [&](const CadEdgeUse& u) {
    const CadEdge& e = m.edges[u.edge];
    if (!e.closed) return m.vertices[u.reversed ? e.end : e.start].position;
    return m.use_point(u, 0.0);
  };
  const auto use_end = [&](const CadEdgeUse& u) {
    const CadEdge& e = m.edges[u.edge];
    if (!e.closed) return m.vertices[u.reversed ? e.start : e.end].position;
    return m.use_point(u, 1.0);
  };

  for (int fi = 0; fi < nf; ++fi) {
    const CadFace& f = m.faces[fi];
    bool hanging = false;
    for (const auto& l : f.loops) {
      for (std::size_t i = 0; i < l.uses.size(); ++i) {
        const CadEdgeUse& u = l.uses[i];
        const CadEdge& e = m.edges[u.edge];
        if (r.edge_uses[u.edge] != 2 || forward[u.edge] != 1 || backward[u.edge] != 1 || !e.valid()) {
          hanging = true;
          continue;
        }
        // Trimmed curve ends must meet the vertices, and consecutive uses must chain.
        const double g0 = (m.use_point(u, 0.0) - use_start(u)).norm();
        const double g1 = (m.use_point(u, 1.0) - use_end(u)).norm();
        const CadEdgeUse& next = l.uses[(i + 1) % l.uses.size()];
        double g2 = 0;
        if (m.edges[next.edge].valid()) {
          g2 = (use_end(u) - use_start(next)).norm();
          if (!e.closed && !m.edges[next.edge].closed) {
            const int a = u.reversed ? e.start : e.end;
            const auto& en = m.edges[next.edge];
            const int b = next.reversed ? en.end : en.start;
            if (a != b) g2 = std::max(g2, 1.0);
          }
        }
        const double gap = std::max({g0, g1, g2});
        r.max_loop_gap = std::max(r.max_loop_gap, gap);
        if (gap > loop_tolerance) hanging = true;
      }
    }
    r.hanging[fi] = hanging ? 1 : 0;
  }

  // Suspect faces: those touching a failed vertex.
  for (int fi = 0; fi < nf; ++fi)
    for (const auto& l : m.faces[fi].loops)
      for (const auto& u : l.uses) {
        const CadEdge& e = m.edges[u.edge];
        if (e.closed) continue;
        if (m.vertices[e.start].failed || m.vertices[e.end].failed) r.suspect[fi] = 1;
      }

  // Residuals.
  for (const auto& v : m.vertices) {
    if (v.failed) continue;
    std::set<int> patches;
    for (const auto& e : m.edges) {
      if (e.closed || (e.start != v.topo_vertex && e.end != v.topo_vertex)) continue;
      patches.insert(e.left);
      patches.insert(e.right);
    }
    for (int p : patches)
      if (by_patch.count(p)) r.max_vertex_residual = std::max(r.max_vertex_residual, implicit_distance(by_patch[p]->surface, v.position));
  }
  for (int ei = 0; ei < static_cast<int>(m.edges.size()); ++ei) {
    const CadEdge& e = m.edges[ei];
    if (!e.valid()) continue;
    for (int k = 0; k <= 16; ++k) {
      const Vec3 q = m.edge_point(ei, k / 16.0);
      for (int p : {e.left, e.right})
        if (by_patch.count(p)) r.max_edge_residual = std::max(r.max_edge_residual, implicit_distance(by_patch[p]->surface, q));
    }
    // The left face follows the reference polyline, so the curve must too.
    for (int k = 0; k < 16; ++k) {
      const double s = (k + 0.5) / 16.0;
      const Vec3 q = m.edge_point(ei, s);
      const Vec3 t = m.use_tangent({ei, false}, s);
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t i = 0; i + 1 < e.reference.size(); ++i) {
        const double d = (0.5 * (e.reference[i] + e.reference[i + 1]) - q).squaredNorm();
        if (d < best_d) best_d = d, best = i;
      }
      if (e.reference.size() > 1 && t.dot(e.reference[best + 1] - e.reference[best]) < 0) ++r.orientation_violations;
    }
  }

  int closed = 0, inner = 0;
  for (const auto& e : m.edges) closed += e.closed ? 1 : 0;
  for (const auto& f : m.faces) inner += std::max<int>(0, static_cast<int>(f.loops.size()) - 1);
  r.euler = static_cast<int>(m.vertices.size()) + closed - static_cast<int>(m.edges.size()) + nf - inner;
  return r;
}

/// Triangulation of the B-rep that reuses each patch's mesh connectivity: interior
/// vertices are projected onto the face surface, boundary vertices onto the trimmed
/// edge curves and corner vertices onto the CAD vertices.
inline TriangleMesh tessellate(const BRepModel& m, const TopologicalComplex& tc, const SegmentedMesh& seg) {
  const TriangleMesh& mesh = seg.mesh();
  TriangleMesh out;
  out.triangles = mesh.triangles;
  out.vertices = mesh.vertices;
  std::map<int, const CadFace*> by_patch;
  for (const auto& f : m.faces) by_patch[f.patch] = &f;
  std::vector<char> done(mesh.vertices.size(), 0);
  for (const auto& v : m.vertices) {
    const int mv = tc.vertices[v.topo_vertex].mesh_vertex;
    out.vertices[mv] = v.position;
    done[mv] = 1;
  }
  for (const auto& e : m.edges) {
    for (int mv : tc.edges[e.topo_edge].chain) {
      if (done[mv]) continue;
      const Vec3 q = mesh.vertices[mv];
      if (e.valid()) {
        const Curve& c = m.curves[e.curve];
        out.vertices[mv] = c.eval(c.closest_param(q));
      } else {
        Vec3 sum = Vec3::Zero();
        int n = 0;
        for (int p : {e.left, e.right})
          if (by_patch.count(p)) sum += project_point(by_patch[p]->surface, q), ++n;
        if (n) out.vertices[mv] = sum / n;
      }
      done[mv] = 1;
    }
  }
  for (int f = 0; f < static_cast<int>(mesh.triangles.size()); ++f) {
    const auto it = by_patch.find(seg.face_patch[f]);
    if (it == by_patch.end()) continue;
    for (int mv : mesh.triangles[f]) {
      if (done[mv]) continue;
      out.vertices[mv] = project_point(it->second->surface, mesh.vertices[mv]);
      done[mv] = 1;
    }
  }
  // Drop triangles of faces missing from the model.
  std::vector<Triangle> kept;
  for (int f = 0; f < static_cast<int>(mesh.triangles.size()); ++f)
    if (by_patch.count(seg.face_patch[f])) kept.push_back(mesh.triangles[f]);
  out.triangles = std::move(kept);
  return out;
}

/// Largest distance between a tessellation edge midpoint and the owning surface.
inline double max_chord_error(const TriangleMesh& tess, const BRepModel& m, const SegmentedMesh& seg) {
  std::map<int, const CadFace*> by_patch;
  for (const auto& f : m.faces) by_patch[f.patch] = &f;
  double worst = 0;
  if (tess.triangles.size() != seg.face_patch.size()) return worst;
  for (int f = 0; f < static_cast<int>(tess.triangles.size()); ++f) {
    const auto it = by_patch.find(seg.face_patch[f]);
    if (it == by_patch.end()) continue;
    const auto& t = tess.triangles[f];
    for (int k = 0; k < 3; ++k) {
      const Vec3 mid = 0.5 * (tess.vertices[t[k]] + tess.vertices[t[(k + 1) % 3]]);
      worst = std::max(worst, implicit_distance(it->second->surface, mid));
    }
  }
  return worst;
}

}  // namespace primrep
