#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/mesh.hpp"

namespace primrep::io {

/// OBJ contents with optional per-face group ids (from `g` statements).
struct ObjData {
  TriangleMesh mesh;
  std::vector<int> face_group;
  std::vector<std::string> group_names;
};

inline ObjData read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  ObjData out;
  int group = -1;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      ls >> p.x() >> p.y() >> p.z();
      out.mesh.vertices.push_back(p);
    } else if (tag == "g" || tag == "o") {
      std::string name;
      ls >> name;
      out.group_names.push_back(name);
      group = static_cast<int>(out.group_names.size()) - 1;
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(i > 0 ? i - 1 : static_cast<int>(out.mesh.vertices.size()) + i);
      }
      if (idx.size() < 3) throw Error(ErrorCode::Io, "face with fewer than 3 vertices in " + path);
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        out.mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
        out.face_group.push_back(group);
      }
    }
  }
  return out;
}

inline void write_obj(const std::string& path, const TriangleMesh& mesh, const std::vector<int>& face_group = {},
                      const std::vector<std::string>& group_names = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  int current = -2;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    if (!face_group.empty() && face_group[f] != current) {
      current = face_group[f];
      if (current >= 0 && current < static_cast<int>(group_names.size()))
        out << "g " << group_names[current] << '\n';
      else
        out << "g group_" << current << '\n';
    }
    const auto& t = mesh.triangles[f];
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

/// Binary little-endian PLY with double precision coordinates and optional normals.
inline void write_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  const bool normals = mesh.has_normals();
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const double v[6] = {mesh.vertices[i].x(), mesh.vertices[i].y(), mesh.vertices[i].z(),
                         normals ? mesh.normals[i].x() : 0.0, normals ? mesh.normals[i].y() : 0.0,
                         normals ? mesh.normals[i].z() : 0.0};
    out.write(reinterpret_cast<const char*>(v), sizeof(double) * (normals ? 6 : 3));
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    const std::int32_t idx[3] = {t[0], t[1], t[2]};
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
}

namespace detail {

inline int ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorCode::Io, "unsupported PLY type " + t);
}

inline double ply_read_value(const char* p, const std::string& t) {
  if (t == "char" || t == "int8") return static_cast<std::int8_t>(*p);
  if (t == "uchar" || t == "uint8") return static_cast<std::uint8_t>(*p);
  if (t == "short" || t == "int16") { std::int16_t v; std::memcpy(&v, p, 2); return v; }
  if (t == "ushort" || t == "uint16") { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
  if (t == "int" || t == "int32") { std::int32_t v; std::memcpy(&v, p, 4); return v; }
  if (t == "uint" || t == "uint32") { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
  if (t == "float" || t == "float32") { float v; std::memcpy(&v, p, 4); return v; }
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

struct PlyProperty {
  std::string name, type, count_type;
  bool is_list = false;
};

}  // namespace detail

/// Reads binary little-endian PLY triangle meshes (vertex x/y/z and optional nx/ny/nz).
inline TriangleMesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::Io, path + " is not a PLY file");
  std::size_t nv = 0, nf = 0;
  std::vector<detail::PlyProperty> vprops, fprops;
  std::vector<detail::PlyProperty>* current = nullptr;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw Error(ErrorCode::Io, "only binary_little_endian PLY is supported");
    } else if (tag == "element") {
      std::string name;
      std::size_t n;
      ls >> name >> n;
      if (name == "vertex") {
        nv = n;
        current = &vprops;
      } else if (name == "face") {
        nf = n;
        current = &fprops;
      } else {
        throw Error(ErrorCode::Io, "unsupported PLY element " + name);
      }
    } else if (tag == "property") {
      detail::PlyProperty p;
      ls >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type;
      }
      ls >> p.name;
      if (current) current->push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }
  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  bool has_n = false;
  for (const auto& p : vprops) has_n = has_n || p.name == "nx";
  if (has_n) mesh.normals.resize(nv);
  std::vector<char> buf(64);
  for (std::size_t i = 0; i < nv; ++i) {
    for (const auto& p : vprops) {
      const int sz = detail::ply_type_size(p.type);
      in.read(buf.data(), sz);
      const double v = detail::ply_read_value(buf.data(), p.type);
      if (p.name == "x") mesh.vertices[i].x() = v;
      else if (p.name == "y") mesh.vertices[i].y() = v;
      else if (p.name == "z") mesh.vertices[i].z() = v;
      else if (p.name == "nx") mesh.normals[i].x() = v;
      else if (p.name == "ny") mesh.normals[i].y() = v;
      else if (p.name == "nz") mesh.normals[i].z() = v;
    }
  }
  for (std::size_t f = 0; f < nf; ++f) {
    for (const auto& p : fprops) {
      if (!p.is_list) {
        in.read(buf.data(), detail::ply_type_size(p.type));
        continue;
      }
      const int csz = detail::ply_type_size(p.count_type);
      in.read(buf.data(), csz);
      const int count = static_cast<int>(detail::ply_read_value(buf.data(), p.count_type));
      std::vector<int> idx(count);
      const int isz = detail::ply_type_size(p.type);
      for (int k = 0; k < count; ++k) {
        in.read(buf.data(), isz);
        idx[k] = static_cast<int>(detail::ply_read_value(buf.data(), p.type));
      }
      if (p.name == "vertex_indices" || p.name == "vertex_index") {
        if (count != 3) throw Error(ErrorCode::Io, "PLY face is not a triangle");
        mesh.triangles.push_back({idx[0], idx[1], idx[2]});
      }
    }
  }
  if (!in) throw Error(ErrorCode::Io, "truncated PLY " + path);
  return mesh;
}

/// Loads OBJ or PLY by extension, drops degenerate triangles and normalizes to [-1,1]^3.
inline TriangleMesh load_mesh(const std::string& path, bool normalize = true) {
  TriangleMesh mesh;
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply")
    mesh = read_ply(path);
  else
    mesh = read_obj(path).mesh;
  clean_degenerate(mesh);
  if (normalize) normalize_to_unit_box(mesh);
  return mesh;
}

}  // namespace primrep::io
