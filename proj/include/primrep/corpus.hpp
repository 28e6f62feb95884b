#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/mesh.hpp"
#include "primrep/primitive.hpp"
#include "primrep/relate.hpp"
#include "primrep/segmented.hpp"

namespace primrep::corpus {

inline constexpr std::array<std::string_view, 8> kFamilies{
    "box", "box-cyl-boss", "cyl-capped", "cone-capped", "sphere-cap-on-box", "torus-ring-on-plane", "prism-n",
    "composite-random"};

inline bool is_family(std::string_view f) {
  return std::find(kFamilies.begin(), kFamilies.end(), f) != kFamilies.end();
}

struct TopologyCounts {
  int vertices = 0;
  int edges = 0;
  int faces = 0;
  bool operator==(const TopologyCounts&) const = default;
};

/// Synthetic CAD case with known decomposition. Patch ids index `primitives`.
struct GroundTruthCase {
  std::string id;
  std::string family;
  std::uint64_t seed = 0;
  TriangleMesh mesh;
  std::vector<int> face_patch;
  std::vector<Primitive> primitives;
  TopologyCounts topology;
  double noise_sigma = 0.0;

  int num_patches() const { return static_cast<int>(primitives.size()); }
  PrimitiveKind patch_kind(int patch) const { return primitives[patch].kind; }
};

/// Accumulates triangles; vertices closer than the weld tolerance are merged.
class MeshBuilder {
 public:
  explicit MeshBuilder(double weld = 1e-9) : weld_(weld) {}

  int vertex(const Vec3& p) {
    const double cell = 1e-6;
    const std::array<std::int64_t, 3> c{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                        static_cast<std::int64_t>(std::floor(p.y() / cell)),
                                        static_cast<std::int64_t>(std::floor(p.z() / cell))};
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid_.find(key(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == grid_.end()) continue;
          for (int idx : it->second)
            if ((mesh.vertices[idx] - p).norm() <= weld_) return idx;
        }
    const int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    grid_[key(c[0], c[1], c[2])].push_back(idx);
    return idx;
  }

  void triangle(int a, int b, int c, int patch) {
    if (a == b || b == c || a == c) return;
    mesh.triangles.push_back({a, b, c});
    face_patch.push_back(patch);
  }

  void quad(int a, int b, int c, int d, int patch) {
    triangle(a, b, c, patch);
    triangle(a, c, d, patch);
  }

  /// Triangulates the band between two equally sized point rows.
  void strip(const std::vector<int>& lo, const std::vector<int>& hi, bool closed, int patch) {
    const std::size_t n = lo.size();
    const std::size_t segs = closed ? n : n - 1;
    for (std::size_t i = 0; i < segs; ++i) {
      const std::size_t j = (i + 1) % n;
      quad(lo[i], lo[j], hi[j], hi[i], patch);
    }
  }

  TriangleMesh mesh;
  std::vector<int> face_patch;

 private:
  static std::int64_t key(std::int64_t x, std::int64_t y, std::int64_t z) {
    return (x * 73856093) ^ (y * 19349663) ^ (z * 83492791);
  }

  double weld_;
  std::unordered_map<std::int64_t, std::vector<int>> grid_;
};

namespace detail {

inline int segments_for(double length, double edge) { return std::max(2, static_cast<int>(std::ceil(length / edge))); }

/// Bilinear grid over a planar quadrilateral (corners in loop order).
inline void grid_face(MeshBuilder& mb, const Vec3& c00, const Vec3& c10, const Vec3& c11, const Vec3& c01, int nu,
                      int nv, int patch) {
  std::vector<std::vector<int>> ids(nv + 1, std::vector<int>(nu + 1));
  for (int j = 0; j <= nv; ++j)
    for (int i = 0; i <= nu; ++i) {
      const double u = double(i) / nu, v = double(j) / nv;
      ids[j][i] = mb.vertex((1 - u) * (1 - v) * c00 + u * (1 - v) * c10 + u * v * c11 + (1 - u) * v * c01);
    }
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) mb.quad(ids[j][i], ids[j][i + 1], ids[j + 1][i + 1], ids[j + 1][i], patch);
}

/// Concentric rings between an outer loop and an inner loop (or a center point when
/// `inner` holds a single repeated point). Both loops have equal length.
inline void ring_fill(MeshBuilder& mb, const std::vector<Vec3>& outer, const std::vector<Vec3>& inner, int rings,
                      int patch) {
  std::vector<int> prev;
  for (int k = 0; k <= rings; ++k) {
    const double s = double(k) / rings;
    std::vector<int> row(outer.size());
    for (std::size_t i = 0; i < outer.size(); ++i) row[i] = mb.vertex((1 - s) * outer[i] + s * inner[i]);
    if (k > 0) mb.strip(prev, row, true, patch);
    prev = std::move(row);
  }
}

/// Profile curve in the (radius, height) half-plane, revolved about +z.
struct ProfileSegment {
  std::function<Eigen::Vector2d(double)> at;  // t in [0,1]
  int samples = 2;
  int patch = 0;
};

inline void revolve(MeshBuilder& mb, const std::vector<ProfileSegment>& profile, const std::vector<double>& angles) {
  for (const auto& seg : profile) {
    std::vector<int> prev;
    for (int k = 0; k <= seg.samples; ++k) {
      const Eigen::Vector2d rz = seg.at(double(k) / seg.samples);
      std::vector<int> row(angles.size());
      for (std::size_t j = 0; j < angles.size(); ++j)
        row[j] = mb.vertex(Vec3(rz.x() * std::cos(angles[j]), rz.x() * std::sin(angles[j]), rz.y()));
      if (k > 0) mb.strip(prev, row, true, seg.patch);
      prev = std::move(row);
    }
  }
}

inline ProfileSegment line_segment(Eigen::Vector2d a, Eigen::Vector2d b, double edge, int patch) {
  return {[a, b](double t) -> Eigen::Vector2d { return (1 - t) * a + t * b; }, segments_for((b - a).norm(), edge),
          patch};
}

inline ProfileSegment arc_segment(Eigen::Vector2d center, double radius, double phi0, double phi1, double edge,
                                  int patch) {
  return {[=](double t) -> Eigen::Vector2d {
            const double phi = phi0 + t * (phi1 - phi0);
            Eigen::Vector2d p = center + radius * Eigen::Vector2d(std::cos(phi), std::sin(phi));
            if (std::abs(p.x()) < 1e-12) p.x() = 0.0;
            return p;
          },
          segments_for(radius * std::abs(phi1 - phi0), edge), patch};
}

inline std::vector<double> uniform_angles(int n) {
  std::vector<double> a(n);
  for (int j = 0; j < n; ++j) a[j] = 2.0 * std::numbers::pi * j / n;
  return a;
}

/// Axis-aligned box [-a,a]x[-b,b]x[-c,c]. Patches 0..5: -x,+x,-y,+y,-z,+z.
/// When `hole_radius` > 0 the top face gets a centered circular hole whose boundary
/// samples are returned through `hole_angles`.
inline void box_faces(MeshBuilder& mb, std::vector<Primitive>& prims, double a, double b, double c, double edge,
                      double hole_radius, std::vector<double>* hole_angles) {
  const int mx = detail::segments_for(2 * a, edge), my = detail::segments_for(2 * b, edge),
            mz = detail::segments_for(2 * c, edge);
  const int base = static_cast<int>(prims.size());
  prims.push_back(make_plane(-Vec3::UnitX(), Vec3(-a, 0, 0)));
  prims.push_back(make_plane(Vec3::UnitX(), Vec3(a, 0, 0)));
  prims.push_back(make_plane(-Vec3::UnitY(), Vec3(0, -b, 0)));
  prims.push_back(make_plane(Vec3::UnitY(), Vec3(0, b, 0)));
  prims.push_back(make_plane(-Vec3::UnitZ(), Vec3(0, 0, -c)));
  prims.push_back(make_plane(Vec3::UnitZ(), Vec3(0, 0, c)));
  grid_face(mb, {-a, -b, -c}, {-a, b, -c}, {-a, b, c}, {-a, -b, c}, my, mz, base + 0);
  grid_face(mb, {a, -b, -c}, {a, b, -c}, {a, b, c}, {a, -b, c}, my, mz, base + 1);
  grid_face(mb, {-a, -b, -c}, {a, -b, -c}, {a, -b, c}, {-a, -b, c}, mx, mz, base + 2);
  grid_face(mb, {-a, b, -c}, {a, b, -c}, {a, b, c}, {-a, b, c}, mx, mz, base + 3);
  grid_face(mb, {-a, -b, -c}, {a, -b, -c}, {a, b, -c}, {-a, b, -c}, mx, my, base + 4);
  if (hole_radius <= 0) {
    grid_face(mb, {-a, -b, c}, {a, -b, c}, {a, b, c}, {-a, b, c}, mx, my, base + 5);
    return;
  }
  // Outer loop counter-clockwise from (a, -b): right side, top, left side, bottom.
  std::vector<Vec3> outer;
  for (int i = 0; i < my; ++i) outer.emplace_back(a, -b + 2 * b * i / my, c);
  for (int i = 0; i < mx; ++i) outer.emplace_back(a - 2 * a * i / mx, b, c);
  for (int i = 0; i < my; ++i) outer.emplace_back(-a, b - 2 * b * i / my, c);
  for (int i = 0; i < mx; ++i) outer.emplace_back(-a + 2 * a * i / mx, -b, c);
  hole_angles->clear();
  std::vector<Vec3> inner;
  for (const auto& p : outer) {
    const double th = std::atan2(p.y(), p.x());
    hole_angles->push_back(th);
    inner.emplace_back(hole_radius * std::cos(th), hole_radius * std::sin(th), c);
  }
  const double gap = std::min(a, b) - hole_radius;
  ring_fill(mb, outer, inner, detail::segments_for(gap, edge), base + 5);
}

/// Rotation taking (1,1,1)/sqrt(3) to +z followed by a turn about z, so that no
/// axis-aligned face is seen edge-on by a ring of horizontal cameras.
inline Eigen::Matrix3d presentation_rotation(double azimuth) {
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3(1, 1, 1).normalized(), Vec3::UnitZ());
  return Eigen::AngleAxisd(azimuth, Vec3::UnitZ()).toRotationMatrix() * q.toRotationMatrix();
}

}  // namespace detail

struct BuildResult {
  MeshBuilder builder;
  std::vector<Primitive> prims;
  std::vector<int> sign;  // +1 if the primitive normal points out of the solid
  TopologyCounts topology;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline void build_box(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double a = uniform(rng, 0.6, 1.0), b = uniform(rng, 0.6, 1.0), c = uniform(rng, 0.6, 1.0);
  box_faces(r.builder, r.prims, a, b, c, edge, 0, nullptr);
  r.sign.assign(6, 1);
  r.topology = {8, 12, 6};
}

inline void build_prism(BuildResult& r, std::mt19937_64& rng, double edge) {
  const int n = 3 + static_cast<int>(rng() % 6);
  const double R = uniform(rng, 0.7, 1.0), hz = uniform(rng, 0.4, 0.8);
  const double offset = uniform(rng, 0.0, 2 * std::numbers::pi / n);
  std::vector<Vec3> corner(n);
  for (int j = 0; j < n; ++j) {
    const double th = offset + 2 * std::numbers::pi * j / n;
    corner[j] = Vec3(R * std::cos(th), R * std::sin(th), 0);
  }
  const int m = segments_for((corner[1] - corner[0]).norm(), edge);
  const int mzs = segments_for(2 * hz, edge);
  auto& mb = r.builder;
  for (int j = 0; j < n; ++j) {
    const Vec3 p0 = corner[j], p1 = corner[(j + 1) % n];
    const Vec3 outward = (0.5 * (p0 + p1)).normalized();
    r.prims.push_back(make_plane(outward, 0.5 * (p0 + p1)));
    grid_face(mb, p0 - hz * Vec3::UnitZ(), p1 - hz * Vec3::UnitZ(), p1 + hz * Vec3::UnitZ(), p0 + hz * Vec3::UnitZ(),
              m, mzs, j);
  }
  std::vector<Vec3> loop;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) loop.push_back(corner[j] + (corner[(j + 1) % n] - corner[j]) * double(i) / m);
  const int rings = segments_for(R, edge);
  for (int side = 0; side < 2; ++side) {
    const double z = side == 0 ? -hz : hz;
    std::vector<Vec3> outer, inner;
    for (const auto& p : loop) {
      outer.push_back(p + z * Vec3::UnitZ());
      inner.push_back(z * Vec3::UnitZ());
    }
    r.prims.push_back(make_plane(Vec3(0, 0, side == 0 ? -1.0 : 1.0), z * Vec3::UnitZ()));
    ring_fill(mb, outer, inner, rings, n + side);
  }
  r.sign.assign(n + 2, 1);
  r.topology = {2 * n, 3 * n, n + 2};
}

inline std::vector<double> angles_for(double radius, double edge) {
  return uniform_angles(std::max(24, segments_for(2 * std::numbers::pi * radius, edge)));
}

inline void build_cyl_capped(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double rad = uniform(rng, 0.4, 0.8), h = uniform(rng, 0.5, 0.9);
  r.prims = {make_plane(-Vec3::UnitZ(), Vec3(0, 0, -h)), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), rad),
             make_plane(Vec3::UnitZ(), Vec3(0, 0, h))};
  r.sign = {1, 1, 1};
  revolve(r.builder,
          {line_segment({0, -h}, {rad, -h}, edge, 0), line_segment({rad, -h}, {rad, h}, edge, 1),
           line_segment({rad, h}, {0, h}, edge, 2)},
          angles_for(rad, edge));
  r.topology = {0, 2, 3};
}

inline void build_cone_capped(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double r1 = uniform(rng, 0.6, 0.9), r2 = uniform(rng, 0.2, 0.45), h = uniform(rng, 0.5, 0.8);
  // Frustum from radius r1 at z=-h to r2 at z=+h; apex above, opening downward.
  const double z_apex = -h + 2 * h * r1 / (r1 - r2);
  const double alpha = std::atan((r1 - r2) / (2 * h));
  const double height = z_apex + h;
  r.prims = {make_plane(-Vec3::UnitZ(), Vec3(0, 0, -h)),
             make_cone_from_apex(Vec3(0, 0, z_apex), -Vec3::UnitZ(), alpha, height),
             make_plane(Vec3::UnitZ(), Vec3(0, 0, h))};
  r.sign = {1, 1, 1};
  revolve(r.builder,
          {line_segment({0, -h}, {r1, -h}, edge, 0), line_segment({r1, -h}, {r2, h}, edge, 1),
           line_segment({r2, h}, {0, h}, edge, 2)},
          angles_for(r1, edge));
  r.topology = {0, 2, 3};
}

inline void build_sphere_cap_on_box(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double a = uniform(rng, 0.7, 1.0), b = uniform(rng, 0.7, 1.0), c = uniform(rng, 0.35, 0.6);
  const double hole = std::min(a, b) * uniform(rng, 0.45, 0.65);
  std::vector<double> angles;
  box_faces(r.builder, r.prims, a, b, c, edge, hole, &angles);
  const double d = 0.5 * hole;
  const double R = std::hypot(hole, d);
  r.prims.push_back(make_sphere(Vec3(0, 0, c - d), R));
  const double phi0 = std::atan2(d, hole);
  revolve(r.builder, {arc_segment({0, c - d}, R, phi0, std::numbers::pi / 2, edge, 6)}, angles);
  r.sign.assign(7, 1);
  r.topology = {8, 13, 7};
}

inline void build_box_cyl_boss(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double a = uniform(rng, 0.7, 1.0), b = uniform(rng, 0.7, 1.0), c = uniform(rng, 0.35, 0.6);
  const double hole = std::min(a, b) * uniform(rng, 0.35, 0.55);
  const double H = uniform(rng, 0.3, 0.6);
  std::vector<double> angles;
  box_faces(r.builder, r.prims, a, b, c, edge, hole, &angles);
  r.prims.push_back(make_cylinder(Vec3::UnitZ(), Vec3(0, 0, c), hole));
  r.prims.push_back(make_plane(Vec3::UnitZ(), Vec3(0, 0, c + H)));
  revolve(r.builder, {line_segment({hole, c}, {hole, c + H}, edge, 6), line_segment({hole, c + H}, {0, c + H}, edge, 7)},
          angles);
  r.sign.assign(8, 1);
  r.topology = {8, 14, 8};
}

inline void build_torus_ring(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double R = uniform(rng, 0.6, 0.8), rs = uniform(rng, 0.2, 0.35);
  r.prims = {make_plane(-Vec3::UnitZ(), Vec3::Zero()), make_torus(Vec3::UnitZ(), Vec3::Zero(), R, rs)};
  r.sign = {1, 1};
  revolve(r.builder,
          {line_segment({R - rs, 0}, {R + rs, 0}, edge, 0), arc_segment({R, 0}, rs, 0, std::numbers::pi, edge, 1)},
          angles_for(R + rs, edge));
  r.topology = {0, 2, 2};
}

/// Revolved stack: bottom disk, shaft, shoulder, fillet, neck, optional taper or
/// second step, then a flat or domed top.
inline void build_composite(BuildResult& r, std::mt19937_64& rng, double edge) {
  const double r0 = uniform(rng, 0.6, 0.8);
  const double h0 = uniform(rng, 0.3, 0.5);
  const double r1 = r0 * uniform(rng, 0.5, 0.65);
  const double f = std::min(0.12, 0.45 * (r0 - r1));
  const double h1 = uniform(rng, 0.35, 0.55);
  const int variant = static_cast<int>(rng() % 3);
  const bool dome = (rng() % 2) == 0;

  std::vector<ProfileSegment> prof;
  auto add = [&](ProfileSegment s, const Primitive& p, int sign) {
    s.patch = static_cast<int>(r.prims.size());
    prof.push_back(std::move(s));
    r.prims.push_back(p);
    r.sign.push_back(sign);
  };
  add(line_segment({0, 0}, {r0, 0}, edge, 0), make_plane(-Vec3::UnitZ(), Vec3::Zero()), 1);
  add(line_segment({r0, 0}, {r0, h0}, edge, 0), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), r0), 1);
  add(line_segment({r0, h0}, {r1 + f, h0}, edge, 0), make_plane(Vec3::UnitZ(), Vec3(0, 0, h0)), 1);
  add(arc_segment({r1 + f, h0 + f}, f, -std::numbers::pi / 2, -std::numbers::pi, edge, 0),
      make_torus(Vec3::UnitZ(), Vec3(0, 0, h0 + f), r1 + f, f), -1);
  double z = h0 + f + h1;
  double rad = r1;
  add(line_segment({r1, h0 + f}, {r1, z}, edge, 0), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), r1), 1);
  if (variant == 1) {
    const double rt = rad * uniform(rng, 0.55, 0.75), hc = uniform(rng, 0.25, 0.4);
    const double z_apex = z + hc * rad / (rad - rt);
    add(line_segment({rad, z}, {rt, z + hc}, edge, 0),
        make_cone_from_apex(Vec3(0, 0, z_apex), -Vec3::UnitZ(), std::atan((rad - rt) / hc), z_apex - z), 1);
    z += hc;
    rad = rt;
  } else if (variant == 2) {
    const double r2 = rad * uniform(rng, 0.55, 0.7), h2 = uniform(rng, 0.25, 0.4);
    add(line_segment({rad, z}, {r2, z}, edge, 0), make_plane(Vec3::UnitZ(), Vec3(0, 0, z)), 1);
    add(line_segment({r2, z}, {r2, z + h2}, edge, 0), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), r2), 1);
    rad = r2;
    z += h2;
  }
  if (dome) {
    const double d = 0.6 * rad;
    const double R = std::hypot(rad, d);
    add(arc_segment({0, z - d}, R, std::atan2(d, rad), std::numbers::pi / 2, edge, 0),
        make_sphere(Vec3(0, 0, z - d), R), 1);
  } else {
    add(line_segment({rad, z}, {0, z}, edge, 0), make_plane(Vec3::UnitZ(), Vec3(0, 0, z)), 1);
  }
  revolve(r.builder, prof, angles_for(r0, edge));
  const int n = static_cast<int>(r.prims.size());
  r.topology = {0, n - 1, n};
}

inline double local_radius(const std::string& family) {
  if (family == "composite-random") return 1.3;
  if (family == "box" || family == "box-cyl-boss" || family == "sphere-cap-on-box") return 1.5;
  return 1.2;
}

inline std::uint64_t mix_seed(std::string_view family, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : family) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
  return h ^ (seed * 0x9E3779B97F4A7C15ull);
}

}  // namespace detail

/// Target mesh edge length in normalized units.
inline constexpr double kTargetEdge = 0.035;

/// Orients, rotates and normalizes a built solid into a ground-truth case.
inline GroundTruthCase assemble_case(BuildResult&& r, const std::string& family, std::uint64_t seed,
                                     const Eigen::Matrix3d& rotation) {
  GroundTruthCase gt;
  gt.family = family;
  gt.seed = seed;
  gt.id = family + "-s" + std::to_string(seed);
  gt.mesh = std::move(r.builder.mesh);
  gt.face_patch = std::move(r.builder.face_patch);

  // Orient every triangle along the solid's outward normal.
  for (std::size_t f = 0; f < gt.mesh.triangles.size(); ++f) {
    const int patch = gt.face_patch[f];
    const Vec3 c = gt.mesh.face_centroid(f);
    const Vec3 want = r.sign[patch] * surface_normal(r.prims[patch], c);
    if (gt.mesh.face_normal(f).dot(want) < 0) std::swap(gt.mesh.triangles[f][1], gt.mesh.triangles[f][2]);
  }

  for (auto& v : gt.mesh.vertices) v = rotation * v;
  const Normalization norm = normalize_to_unit_box(gt.mesh);
  for (const auto& p : r.prims) gt.primitives.push_back(transformed(p, rotation, norm));
  gt.topology = r.topology;

  // Vertex normals: exact surface normal inside a patch, area-weighted on boundaries.
  compute_vertex_normals(gt.mesh);
  std::vector<int> vpatch(gt.mesh.vertices.size(), -1);
  for (std::size_t f = 0; f < gt.mesh.triangles.size(); ++f)
    for (int v : gt.mesh.triangles[f])
      vpatch[v] = (vpatch[v] == -1 || vpatch[v] == gt.face_patch[f]) ? gt.face_patch[f] : -2;
  for (std::size_t v = 0; v < vpatch.size(); ++v) {
    if (vpatch[v] < 0) continue;
    Vec3 n = surface_normal(gt.primitives[vpatch[v]], gt.mesh.vertices[v]);
    if (n.dot(gt.mesh.normals[v]) < 0) n = -n;
    gt.mesh.normals[v] = n;
  }
  return gt;
}

/// Builds the family's solid in its local frame without presentation rotation.
inline BuildResult build_family(const std::string& family, std::mt19937_64& rng) {
  BuildResult r;
  const double edge = kTargetEdge * detail::local_radius(family);
  if (family == "box") detail::build_box(r, rng, edge);
  else if (family == "prism-n") detail::build_prism(r, rng, edge);
  else if (family == "cyl-capped") detail::build_cyl_capped(r, rng, edge);
  else if (family == "cone-capped") detail::build_cone_capped(r, rng, edge);
  else if (family == "sphere-cap-on-box") detail::build_sphere_cap_on_box(r, rng, edge);
  else if (family == "box-cyl-boss") detail::build_box_cyl_boss(r, rng, edge);
  else if (family == "torus-ring-on-plane") detail::build_torus_ring(r, rng, edge);
  else detail::build_composite(r, rng, edge);
  return r;
}

inline GroundTruthCase generate_case(const std::string& family, std::uint64_t seed) {
  if (!is_family(family)) throw Error(ErrorCode::Config, "unknown case family '" + family + "'");
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::mt19937_64 rng(detail::mix_seed(family, seed) + static_cast<std::uint64_t>(attempt));
    const double azimuth = 0.2 * static_cast<double>(seed % 5);
    GroundTruthCase gt =
        assemble_case(build_family(family, rng), family, seed, detail::presentation_rotation(azimuth));
    try {
      if (HalfEdgeMesh(gt.mesh).watertight()) return gt;
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::GenerationFailed, family + " seed " + std::to_string(seed) + " is not watertight");
}

/// Displaces vertices along their normals by clamped Gaussian noise.
inline GroundTruthCase perturb_mesh(const GroundTruthCase& gt, double sigma, std::uint64_t seed = 0) {
  GroundTruthCase out = gt;
  out.noise_sigma = sigma;
  if (sigma <= 0) return out;
  std::mt19937_64 rng(detail::mix_seed(gt.id, seed) ^ 0xA5A5A5A5ull);
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t v = 0; v < out.mesh.vertices.size(); ++v) {
    const double d = std::clamp(noise(rng), -5 * sigma, 5 * sigma);
    out.mesh.vertices[v] += d * gt.mesh.normals[v];
  }
  return out;
}

inline SegmentedMesh ground_truth_segmentation(const GroundTruthCase& gt) {
  std::vector<PrimitiveKind> kinds;
  for (const auto& p : gt.primitives) kinds.push_back(p.kind);
  return make_segmented(gt.mesh, gt.face_patch, kinds);
}

/// Relations the generator declares: mesh adjacency plus the geometric predicates
/// evaluated on the exact primitives.
inline RelationshipGraph declared_relations(const GroundTruthCase& gt, double tol = 0.05) {
  return relations_from(gt.primitives, ground_truth_segmentation(gt).adjacent_pairs(), tol);
}

}  // namespace primrep::corpus
