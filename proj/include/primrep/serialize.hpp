#pragma once

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "primrep/brep.hpp"
#include "primrep/corpus.hpp"
#include "primrep/error.hpp"
#include "primrep/metrics.hpp"
#include "primrep/primitive.hpp"
#include "primrep/relate.hpp"
#include "primrep/segmented.hpp"
#include "primrep/topology.hpp"

namespace primrep::io {

using json = nlohmann::json;

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Io, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline PrimitiveKind kind_from_json(const json& j) {
  const auto k = kind_from_string(j.get<std::string>());
  if (!k) throw Error(ErrorCode::Io, "unknown primitive kind '" + j.get<std::string>() + "'");
  return *k;
}

inline json to_json(const Primitive& p) {
  json j;
  j["kind"] = std::string(to_string(p.kind));
  j["axis"] = to_json(p.axis);
  j["position"] = to_json(p.position);
  j["radius"] = p.radius;
  j["semi_angle"] = p.semi_angle;
  j["height"] = p.height;
  j["major_radius"] = p.major_radius;
  j["minor_radius"] = p.minor_radius;
  return j;
}

inline Primitive primitive_from_json(const json& j) {
  Primitive p;
  p.kind = kind_from_json(j.at("kind"));
  p.axis = vec3_from_json(j.at("axis"));
  p.position = vec3_from_json(j.at("position"));
  p.radius = j.value("radius", 0.0);
  p.semi_angle = j.value("semi_angle", 0.0);
  p.height = j.value("height", 0.0);
  p.major_radius = j.value("major_radius", 0.0);
  p.minor_radius = j.value("minor_radius", 0.0);
  return p;
}

inline json to_json(const std::vector<Primitive>& ps) {
  json j = json::array();
  for (const auto& p : ps) j.push_back(to_json(p));
  return j;
}

inline std::vector<Primitive> primitives_from_json(const json& j) {
  std::vector<Primitive> out;
  for (const auto& e : j) out.push_back(primitive_from_json(e));
  return out;
}

inline json kinds_to_json(const std::vector<PrimitiveKind>& kinds) {
  json j = json::array();
  for (auto k : kinds) j.push_back(std::string(to_string(k)));
  return j;
}

inline std::vector<PrimitiveKind> kinds_from_json(const json& j) {
  std::vector<PrimitiveKind> out;
  for (const auto& e : j) out.push_back(kind_from_json(e));
  return out;
}

/// labels.json of a corpus case.
inline json labels_to_json(const corpus::GroundTruthCase& gt) {
  json j;
  j["id"] = gt.id;
  j["family"] = gt.family;
  j["seed"] = gt.seed;
  j["noise_sigma"] = gt.noise_sigma;
  j["face_patch"] = gt.face_patch;
  std::vector<PrimitiveKind> kinds;
  for (const auto& p : gt.primitives) kinds.push_back(p.kind);
  j["patch_kinds"] = kinds_to_json(kinds);
  j["primitives"] = to_json(gt.primitives);
  return j;
}

inline json counts_to_json(const corpus::TopologyCounts& c) {
  return {{"vertices", c.vertices}, {"edges", c.edges}, {"faces", c.faces}};
}

inline corpus::TopologyCounts counts_from_json(const json& j) {
  return {j.at("vertices").get<int>(), j.at("edges").get<int>(), j.at("faces").get<int>()};
}

/// segmented.json: face labels, patch kinds and fitted primitives.
inline json segmented_to_json(const SegmentedMesh& seg, const std::vector<Primitive>& prims) {
  json j;
  j["face_patch"] = seg.face_patch;
  j["patch_kinds"] = kinds_to_json(seg.patch_kind);
  j["primitives"] = to_json(prims);
  return j;
}

inline json to_json(const RelationshipGraph& g) {
  json j;
  j["num_patches"] = g.num_patches();
  json rel = json::array();
  for (const auto& r : g.relations())
    rel.push_back({{"a", r.a},
                   {"b", r.b},
                   {"intersect", r.intersect},
                   {"parallel", r.parallel},
                   {"perpendicular", r.perpendicular},
                   {"collinear", r.collinear}});
  j["relations"] = rel;
  return j;
}

inline RelationshipGraph relations_from_json(const json& j) {
  RelationshipGraph g(j.at("num_patches").get<int>());
  for (const auto& r : j.at("relations"))
    g.set({r.at("a").get<int>(), r.at("b").get<int>(), r.at("intersect").get<bool>(), r.at("parallel").get<bool>(),
           r.at("perpendicular").get<bool>(), r.at("collinear").get<bool>()});
  return g;
}

inline json to_json(const TopologicalComplex& tc) {
  json j;
  json vs = json::array(), es = json::array(), fs = json::array();
  for (const auto& v : tc.vertices)
    vs.push_back({{"mesh_vertex", v.mesh_vertex}, {"position", to_json(v.position)}, {"patches", v.patches}});
  for (const auto& e : tc.edges)
    es.push_back({{"left", e.left},
                  {"right", e.right},
                  {"closed", e.closed},
                  {"start", e.start},
                  {"end", e.end},
                  {"chain", e.chain}});
  for (const auto& f : tc.faces) {
    json loops = json::array();
    for (const auto& l : f.loops) {
      json uses = json::array();
      for (const auto& u : l.uses) uses.push_back({{"edge", u.edge}, {"reversed", u.reversed}});
      loops.push_back(uses);
    }
    fs.push_back({{"patch", f.patch}, {"loops", loops}});
  }
  j["vertices"] = vs;
  j["edges"] = es;
  j["faces"] = fs;
  j["mesh_euler"] = tc.mesh_euler;
  return j;
}

inline json to_json(const Curve& c) {
  json j;
  j["kind"] = to_string(c.kind);
  switch (c.kind) {
    case CurveKind::Line:
      j["point"] = to_json(c.origin);
      j["direction"] = to_json(c.direction);
      break;
    case CurveKind::Circle:
      j["center"] = to_json(c.origin);
      j["axis"] = to_json(c.direction);
      j["radius"] = c.r1;
      j["u"] = to_json(c.u);
      break;
    case CurveKind::Ellipse:
      j["center"] = to_json(c.origin);
      j["axis"] = to_json(c.direction);
      j["major_direction"] = to_json(c.u);
      j["minor_direction"] = to_json(c.v);
      j["semi_radii"] = {c.r1, c.r2};
      break;
    case CurveKind::Trace: {
      json s = json::array();
      for (const auto& p : c.samples) s.push_back(to_json(p));
      j["samples"] = s;
      j["closed"] = c.closed_trace;
      break;
    }
  }
  return j;
}

inline json to_json(const ValidationReport& r) {
  json j;
  j["hanging"] = std::vector<int>(r.hanging.begin(), r.hanging.end());
  j["suspect"] = std::vector<int>(r.suspect.begin(), r.suspect.end());
  j["hanging_faces"] = r.hanging_count();
  j["faces"] = r.hanging.size();
  j["edge_uses"] = r.edge_uses;
  j["euler"] = r.euler;
  j["max_vertex_residual"] = r.max_vertex_residual;
  j["max_edge_residual"] = r.max_edge_residual;
  j["max_loop_gap"] = r.max_loop_gap;
  j["orientation_violations"] = r.orientation_violations;
  j["watertight"] = r.watertight();
  return j;
}

inline ValidationReport validation_from_json(const json& j) {
  ValidationReport r;
  for (int h : j.at("hanging")) r.hanging.push_back(static_cast<char>(h));
  for (int s : j.at("suspect")) r.suspect.push_back(static_cast<char>(s));
  r.edge_uses = j.at("edge_uses").get<std::vector<int>>();
  r.euler = j.at("euler").get<int>();
  r.max_vertex_residual = j.at("max_vertex_residual").get<double>();
  r.max_edge_residual = j.at("max_edge_residual").get<double>();
  r.max_loop_gap = j.at("max_loop_gap").get<double>();
  r.orientation_violations = j.at("orientation_violations").get<int>();
  return r;
}

/// brep.json: geometry, loops, provenance and the validation report.
inline json brep_to_json(const BRepModel& m, const ValidationReport& report) {
  json j;
  json curves = json::array(), vs = json::array(), es = json::array(), fs = json::array(), flags = json::array();
  for (const auto& c : m.curves) curves.push_back(to_json(c));
  for (const auto& v : m.vertices)
    vs.push_back({{"position", to_json(v.position)}, {"topo_vertex", v.topo_vertex}, {"failed", v.failed}, {"gap", v.gap}});
  for (const auto& e : m.edges) {
    json je{{"curve", e.curve},     {"closed", e.closed}, {"start", e.start},         {"end", e.end},
            {"left_face", e.left}, {"right_face", e.right}, {"topo_edge", e.topo_edge}};
    je["interval"] = {e.t0, e.t1};
    es.push_back(je);
  }
  for (const auto& f : m.faces) {
    json loops = json::array();
    for (const auto& l : f.loops) {
      json uses = json::array();
      for (const auto& u : l.uses) uses.push_back({{"edge", u.edge}, {"reversed", u.reversed}});
      loops.push_back(uses);
    }
    fs.push_back({{"patch", f.patch}, {"surface", to_json(f.surface)}, {"flip_normal", f.flip_normal}, {"loops", loops}});
  }
  for (const auto& f : m.flags) flags.push_back({{"issue", to_string(f.issue)}, {"element", f.element}});
  j["curves"] = curves;
  j["vertices"] = vs;
  j["edges"] = es;
  j["faces"] = fs;
  j["flags"] = flags;
  j["validation"] = to_json(report);
  return j;
}

inline json to_json(const CaseMetrics& c) {
  json j{{"id", c.id}, {"family", c.family}, {"ok", c.ok}};
  if (!c.ok) {
    j["error"] = c.error;
    return j;
  }
  j["cd"] = c.cd;
  j["nc"] = c.nc;
  j["seg_v"] = c.seg_v;
  j["pred_patches"] = c.pred_patches;
  j["gt_patches"] = c.gt_patches;
  j["faces"] = c.faces;
  j["hanging_faces"] = c.hanging;
  return j;
}

inline json to_json(const MetricsReport& r) {
  json j{{"label", r.label}, {"cd", r.cd},         {"cd_x100", 100 * r.cd}, {"nc", r.nc},
         {"seg_v", r.seg_v}, {"seg_p", r.seg_p},   {"hf", r.hf},            {"cases", r.cases},
         {"failures", r.failures}};
  json per = json::array();
  for (const auto& c : r.per_case) per.push_back(to_json(c));
  j["per_case"] = per;
  return j;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, path + ": " + e.what());
  }
}

/// Pretty-printed with a trailing newline; key order is sorted, so output is stable.
inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace primrep::io
