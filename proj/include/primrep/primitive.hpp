#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "primrep/error.hpp"
#include "primrep/mesh.hpp"

namespace primrep {

enum class PrimitiveKind { Plane = 0, Cylinder = 1, Cone = 2, Sphere = 3, Torus = 4 };

inline constexpr std::array<PrimitiveKind, 5> kAllKinds{PrimitiveKind::Plane, PrimitiveKind::Cylinder,
                                                        PrimitiveKind::Cone, PrimitiveKind::Sphere,
                                                        PrimitiveKind::Torus};

constexpr std::string_view to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Plane: return "plane";
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Cone: return "cone";
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Torus: return "torus";
  }
  return "plane";
}

inline std::optional<PrimitiveKind> kind_from_string(std::string_view s) {
  for (auto k : kAllKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline bool has_axis(PrimitiveKind k) { return k != PrimitiveKind::Sphere; }

/// Semantic classes of the rendered label maps.
enum class Label : std::uint8_t {
  Background = 0,
  Plane = 1,
  Cylinder = 2,
  Cone = 3,
  Sphere = 4,
  Torus = 5,
  FeatureLine = 6,
};

inline constexpr int kNumLabels = 7;

inline Label label_of(PrimitiveKind k) { return static_cast<Label>(static_cast<int>(k) + 1); }

inline std::optional<PrimitiveKind> kind_of(Label l) {
  const int v = static_cast<int>(l);
  if (v >= 1 && v <= 5) return static_cast<PrimitiveKind>(v - 1);
  return std::nullopt;
}

/// Value of a scalar that may carry derivatives.
inline double scalar_value(double x) { return x; }
template <class T>
double scalar_value(const T& x) {
  return x.value();
}

/// Analytic surface. Planes use axis as the unit normal; spheres ignore axis.
/// A cone's apex sits at position - (height / 2) * axis and it opens along +axis.
template <class T>
struct BasicPrimitive {
  using V3 = Eigen::Matrix<T, 3, 1>;

  PrimitiveKind kind = PrimitiveKind::Plane;
  V3 axis = V3(T(0), T(0), T(1));
  V3 position = V3(T(0), T(0), T(0));
  T radius = T(0);        // cylinder, sphere
  T semi_angle = T(0);    // cone
  T height = T(0);        // cone
  T major_radius = T(0);  // torus
  T minor_radius = T(0);  // torus

  V3 apex() const { return position - (height / T(2)) * axis; }

  template <class U>
  BasicPrimitive<U> cast() const {
    BasicPrimitive<U> o;
    o.kind = kind;
    o.axis = axis.template cast<U>();
    o.position = position.template cast<U>();
    o.radius = U(radius);
    o.semi_angle = U(semi_angle);
    o.height = U(height);
    o.major_radius = U(major_radius);
    o.minor_radius = U(minor_radius);
    return o;
  }
};

using Primitive = BasicPrimitive<double>;

inline Primitive make_plane(const Vec3& normal, const Vec3& point) {
  Primitive p;
  p.kind = PrimitiveKind::Plane;
  p.axis = normal.normalized();
  p.position = point;
  return p;
}

inline Primitive make_cylinder(const Vec3& axis, const Vec3& point, double r) {
  Primitive p;
  p.kind = PrimitiveKind::Cylinder;
  p.axis = axis.normalized();
  p.position = point;
  p.radius = r;
  return p;
}

inline Primitive make_cone(const Vec3& axis, const Vec3& center, double semi_angle, double height) {
  Primitive p;
  p.kind = PrimitiveKind::Cone;
  p.axis = axis.normalized();
  p.position = center;
  p.semi_angle = semi_angle;
  p.height = height;
  return p;
}

inline Primitive make_cone_from_apex(const Vec3& apex, const Vec3& axis, double semi_angle, double height) {
  const Vec3 x = axis.normalized();
  return make_cone(x, apex + 0.5 * height * x, semi_angle, height);
}

inline Primitive make_sphere(const Vec3& center, double r) {
  Primitive p;
  p.kind = PrimitiveKind::Sphere;
  p.axis = Vec3::UnitZ();
  p.position = center;
  p.radius = r;
  return p;
}

inline Primitive make_torus(const Vec3& axis, const Vec3& center, double major, double minor) {
  Primitive p;
  p.kind = PrimitiveKind::Torus;
  p.axis = axis.normalized();
  p.position = center;
  p.major_radius = major;
  p.minor_radius = minor;
  return p;
}

inline bool is_valid(const Primitive& p, std::string* why = nullptr) {
  auto fail = [&](const char* m) {
    if (why) *why = m;
    return false;
  };
  if (!p.position.allFinite()) return fail("position not finite");
  if (has_axis(p.kind) && (!p.axis.allFinite() || std::abs(p.axis.norm() - 1.0) > 1e-9))
    return fail("axis not unit");
  switch (p.kind) {
    case PrimitiveKind::Plane: break;
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Sphere:
      if (!(p.radius > 0) || !std::isfinite(p.radius)) return fail("radius must be positive");
      break;
    case PrimitiveKind::Cone:
      if (!(p.semi_angle > 0 && p.semi_angle < std::numbers::pi / 2)) return fail("semi-angle out of (0, pi/2)");
      if (!(p.height >= 0) || !std::isfinite(p.height)) return fail("height must be finite and non-negative");
      break;
    case PrimitiveKind::Torus:
      if (!(p.minor_radius > 0 && p.major_radius > p.minor_radius) || !std::isfinite(p.major_radius))
        return fail("torus must satisfy major > minor > 0");
      break;
  }
  return true;
}

/// Unit direction perpendicular to `axis`, used whenever a projection has no
/// preferred radial direction.
template <class V3>
V3 fallback_direction(const V3& axis) {
  using T = typename V3::Scalar;
  V3 d(T(1), T(0), T(0));
  if (std::abs(scalar_value(axis.x())) > 1.0 - 1e-9) d = V3(T(0), T(1), T(0));
  d = d - d.dot(axis) * axis;
  return d / d.norm();
}

namespace detail {

template <class V3>
void radial_frame(const V3& d, const V3& axis, typename V3::Scalar& axial, V3& dir,
                  typename V3::Scalar& rho) {
  using T = typename V3::Scalar;
  axial = d.dot(axis);
  const V3 rad = d - axial * axis;
  const double n2 = scalar_value(rad.squaredNorm());
  if (n2 > 1e-28) {
    rho = rad.norm();
    dir = rad / rho;
  } else {
    rho = T(0);
    dir = fallback_direction(axis);
  }
}

}  // namespace detail

/// Nearest point on the surface. Symmetry loci (axis lines, centers) resolve to
/// the deterministic fallback direction.
template <class T>
Eigen::Matrix<T, 3, 1> project_point(const BasicPrimitive<T>& prim, const Eigen::Matrix<T, 3, 1>& q) {
  using V3 = Eigen::Matrix<T, 3, 1>;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const V3 d = q - prim.position;
  switch (prim.kind) {
    case PrimitiveKind::Plane:
      return q - d.dot(prim.axis) * prim.axis;
    case PrimitiveKind::Cylinder: {
      T a, rho;
      V3 dir;
      detail::radial_frame(d, prim.axis, a, dir, rho);
      return prim.position + a * prim.axis + prim.radius * dir;
    }
    case PrimitiveKind::Sphere: {
      const double n2 = scalar_value(d.squaredNorm());
      V3 dir = n2 > 1e-28 ? V3(d / d.norm()) : V3(T(1), T(0), T(0));
      return prim.position + prim.radius * dir;
    }
    case PrimitiveKind::Cone: {
      const V3 apex = prim.apex();
      T s, rho;
      V3 dir;
      detail::radial_frame(V3(q - apex), prim.axis, s, dir, rho);
      const T sa = sin(prim.semi_angle), ca = cos(prim.semi_angle);
      const T t = rho * sa + s * ca;
      if (scalar_value(t) <= 0) return apex;
      return apex + t * (sa * dir + ca * prim.axis);
    }
    case PrimitiveKind::Torus: {
      T z, rho;
      V3 dir;
      detail::radial_frame(d, prim.axis, z, dir, rho);
      const V3 core = prim.position + prim.major_radius * dir;
      const V3 w = q - core;
      const double n2 = scalar_value(w.squaredNorm());
      const V3 wdir = n2 > 1e-28 ? V3(w / w.norm()) : dir;
      return core + prim.minor_radius * wdir;
    }
  }
  return q;
}

/// Unsigned Euclidean distance to the surface.
template <class T>
T implicit_distance(const BasicPrimitive<T>& prim, const Eigen::Matrix<T, 3, 1>& q) {
  return (q - project_point(prim, q)).norm();
}

inline double implicit_distance(const Primitive& prim, const Vec3& q) {
  return (q - project_point(prim, q)).norm();
}

/// Smooth signed residual (positive outside) used by least-squares refinement.
/// Its magnitude equals the Euclidean distance near the surface.
template <class T>
T signed_distance(const BasicPrimitive<T>& prim, const Eigen::Matrix<T, 3, 1>& q) {
  using V3 = Eigen::Matrix<T, 3, 1>;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const V3 d = q - prim.position;
  switch (prim.kind) {
    case PrimitiveKind::Plane:
      return d.dot(prim.axis);
    case PrimitiveKind::Cylinder: {
      const T a = d.dot(prim.axis);
      const V3 rad = d - a * prim.axis;
      return sqrt(rad.squaredNorm() + T(1e-300)) - prim.radius;
    }
    case PrimitiveKind::Sphere:
      return sqrt(d.squaredNorm() + T(1e-300)) - prim.radius;
    case PrimitiveKind::Cone: {
      const V3 e = q - prim.apex();
      const T s = e.dot(prim.axis);
      const T rho = sqrt((e - s * prim.axis).squaredNorm() + T(1e-300));
      return rho * cos(prim.semi_angle) - s * sin(prim.semi_angle);
    }
    case PrimitiveKind::Torus: {
      const T z = d.dot(prim.axis);
      const T rho = sqrt((d - z * prim.axis).squaredNorm() + T(1e-300));
      const T u = rho - prim.major_radius;
      return sqrt(u * u + z * z + T(1e-300)) - prim.minor_radius;
    }
  }
  return T(0);
}

/// Unit outward normal of the surface at the projection of q.
inline Vec3 surface_normal(const Primitive& prim, const Vec3& q) {
  const Vec3 s = project_point(prim, q);
  const Vec3 d = s - prim.position;
  switch (prim.kind) {
    case PrimitiveKind::Plane:
      return prim.axis;
    case PrimitiveKind::Cylinder: {
      double a, rho;
      Vec3 dir;
      detail::radial_frame(d, prim.axis, a, dir, rho);
      return dir;
    }
    case PrimitiveKind::Sphere: {
      const double n = d.norm();
      return n > 1e-14 ? Vec3(d / n) : Vec3::UnitX();
    }
    case PrimitiveKind::Cone: {
      double axial, rho;
      Vec3 dir;
      detail::radial_frame(Vec3(s - prim.apex()), prim.axis, axial, dir, rho);
      return std::cos(prim.semi_angle) * dir - std::sin(prim.semi_angle) * prim.axis;
    }
    case PrimitiveKind::Torus: {
      double z, rho;
      Vec3 dir;
      detail::radial_frame(d, prim.axis, z, dir, rho);
      const Vec3 w = s - (prim.position + prim.major_radius * dir);
      const double n = w.norm();
      return n > 1e-14 ? Vec3(w / n) : dir;
    }
  }
  return Vec3::UnitZ();
}

/// Deterministic orthonormal pair (u, v) with u x v = axis.
inline std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& axis) {
  const Vec3 u = fallback_direction(axis);
  return {u, axis.cross(u)};
}

/// Parametric evaluation used for sampling: (u, v) are angle/length pairs per kind.
/// Plane: in-plane offsets; cylinder: (angle, axial); cone: (angle, distance from apex
/// along the generator); sphere: (longitude, latitude); torus: (ring angle, tube angle).
inline Vec3 surface_point(const Primitive& prim, double u, double v) {
  const auto [e1, e2] = orthonormal_frame(prim.axis);
  switch (prim.kind) {
    case PrimitiveKind::Plane:
      return prim.position + u * e1 + v * e2;
    case PrimitiveKind::Cylinder:
      return prim.position + prim.radius * (std::cos(u) * e1 + std::sin(u) * e2) + v * prim.axis;
    case PrimitiveKind::Cone: {
      const Vec3 dir = std::cos(u) * e1 + std::sin(u) * e2;
      return prim.apex() + v * (std::sin(prim.semi_angle) * dir + std::cos(prim.semi_angle) * prim.axis);
    }
    case PrimitiveKind::Sphere:
      return prim.position + prim.radius * Vec3(std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v));
    case PrimitiveKind::Torus: {
      const Vec3 dir = std::cos(u) * e1 + std::sin(u) * e2;
      return prim.position + (prim.major_radius + prim.minor_radius * std::cos(v)) * dir +
             prim.minor_radius * std::sin(v) * prim.axis;
    }
  }
  return prim.position;
}

/// Applies x -> n.scale * R x + n.offset.
inline Primitive transformed(const Primitive& p, const Eigen::Matrix3d& rotation, const Normalization& n) {
  Primitive o = p;
  o.axis = (rotation * p.axis).normalized();
  o.position = n.apply(rotation * p.position);
  o.radius *= n.scale;
  o.height *= n.scale;
  o.major_radius *= n.scale;
  o.minor_radius *= n.scale;
  if (p.kind == PrimitiveKind::Sphere) o.axis = Vec3::UnitZ();
  return o;
}

/// Point closest to the origin on the axis line (or the center for spheres).
inline Vec3 axis_anchor(const Primitive& p) {
  if (!has_axis(p.kind)) return p.position;
  return p.position - p.position.dot(p.axis) * p.axis;
}

inline double point_line_distance(const Vec3& q, const Vec3& line_point, const Vec3& line_dir) {
  const Vec3 d = q - line_point;
  return (d - d.dot(line_dir) * line_dir).norm();
}

}  // namespace primrep
