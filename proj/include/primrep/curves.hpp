#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/primitive.hpp"

namespace primrep {

enum class CurveKind { Line = 0, Circle = 1, Ellipse = 2, Trace = 3 };

inline const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::Line: return "line";
    case CurveKind::Circle: return "circle";
    case CurveKind::Ellipse: return "ellipse";
    case CurveKind::Trace: return "trace";
  }
  return "unknown";
}

/// Intersection curve. Lines: origin + t direction. Conics: origin + r1 cos t u +
/// r2 sin t v with u x v = direction. Traces: samples parameterized by chord length,
/// cubic Hermite between samples when unit tangents are known, linear otherwise.
struct Curve {
  CurveKind kind = CurveKind::Line;
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  double r1 = 0;
  double r2 = 0;
  std::vector<Vec3> samples;
  bool closed_trace = false;
  std::vector<double> arc;  // cumulative trace length, one entry per sample (plus closing segment)
  std::vector<Vec3> tangents;  // unit tangents at the samples, oriented along the trace

  static Curve line(const Vec3& p, const Vec3& d) {
    Curve c;
    c.kind = CurveKind::Line;
    c.origin = p;
    c.direction = d.normalized();
    return c;
  }
  static Curve circle(const Vec3& center, const Vec3& normal, double radius) {
    Curve c;
    c.kind = CurveKind::Circle;
    c.origin = center;
    c.direction = normal.normalized();
    std::tie(c.u, c.v) = orthonormal_frame(c.direction);
    c.r1 = c.r2 = radius;
    return c;
  }
  static Curve ellipse(const Vec3& center, const Vec3& normal, const Vec3& major, double a, double b) {
    Curve c;
    c.kind = CurveKind::Ellipse;
    c.origin = center;
    c.direction = normal.normalized();
    c.u = (major - major.dot(c.direction) * c.direction).normalized();
    c.v = c.direction.cross(c.u);
    c.r1 = a;
    c.r2 = b;
    return c;
  }
  static Curve trace(std::vector<Vec3> pts, bool closed, std::vector<Vec3> tangents = {}) {
    Curve c;
    c.kind = CurveKind::Trace;
    c.samples = std::move(pts);
    if (tangents.size() == c.samples.size()) c.tangents = std::move(tangents);
    c.closed_trace = closed;
    c.arc.assign(c.samples.size(), 0.0);
    for (std::size_t i = 1; i < c.samples.size(); ++i) c.arc[i] = c.arc[i - 1] + (c.samples[i] - c.samples[i - 1]).norm();
    if (closed && c.samples.size() > 1) c.arc.push_back(c.arc.back() + (c.samples.front() - c.samples.back()).norm());
    return c;
  }

  bool closed() const { return kind == CurveKind::Circle || kind == CurveKind::Ellipse || (kind == CurveKind::Trace && closed_trace); }
  bool periodic() const { return closed(); }
  double period() const {
    if (kind == CurveKind::Trace) return closed_trace ? arc.back() : 0.0;
    return kind == CurveKind::Line ? 0.0 : 2 * std::numbers::pi;
  }
  double trace_length() const { return arc.empty() ? 0.0 : arc.back(); }

  Vec3 eval(double t) const {
    switch (kind) {
      case CurveKind::Line: return origin + t * direction;
      case CurveKind::Circle:
      case CurveKind::Ellipse: return origin + r1 * std::cos(t) * u + r2 * std::sin(t) * v;
      case CurveKind::Trace: return trace_eval(t);
    }
    return origin;
  }

  Vec3 tangent(double t) const {
    switch (kind) {
      case CurveKind::Line: return direction;
      case CurveKind::Circle:
      case CurveKind::Ellipse: return (-r1 * std::sin(t) * u + r2 * std::cos(t) * v).normalized();
      case CurveKind::Trace: {
        const auto [i, j, s] = trace_segment(t);
        if (tangents.empty()) return (samples[j] - samples[i]).normalized();
        const double h = (samples[j] - samples[i]).norm();
        const Vec3 d = (6 * s * s - 6 * s) * samples[i] + (3 * s * s - 4 * s + 1) * h * tangents[i] +
                       (6 * s - 6 * s * s) * samples[j] + (3 * s * s - 2 * s) * h * tangents[j];
        return d.norm() > 0 ? Vec3(d.normalized()) : Vec3((samples[j] - samples[i]).normalized());
      }
    }
    return direction;
  }

  /// Parameter of the nearest curve point to q.
  double closest_param(const Vec3& q) const {
    switch (kind) {
      case CurveKind::Line: return (q - origin).dot(direction);
      case CurveKind::Circle: {
        const Vec3 d = q - origin;
        const double x = d.dot(u), y = d.dot(v);
        if (x * x + y * y < 1e-30) return 0.0;
        return wrap(std::atan2(y, x));
      }
      case CurveKind::Ellipse: {
        const Vec3 d = q - origin;
        const double x = d.dot(u), y = d.dot(v);
        double best = 0, best_d = 1e300;
        for (int k = 0; k < 64; ++k) {
          const double t = 2 * std::numbers::pi * k / 64;
          const double dd = std::pow(r1 * std::cos(t) - x, 2) + std::pow(r2 * std::sin(t) - y, 2);
          if (dd < best_d) best_d = dd, best = t;
        }
        // Newton on the stationarity condition (E(t) - q) . E'(t) = 0.
        double t = best;
        for (int it = 0; it < 30; ++it) {
          const double c = std::cos(t), s = std::sin(t);
          const double ex = r1 * c - x, ey = r2 * s - y;
          const double g = -ex * r1 * s + ey * r2 * c;
          const double h = r1 * r1 * s * s - ex * r1 * c + r2 * r2 * c * c - ey * r2 * s;
          if (std::abs(h) < 1e-300) break;
          double step = g / h;
          step = std::clamp(step, -0.1, 0.1);
          t -= step;
          if (std::abs(step) < 1e-15) break;
        }
        return wrap(t);
      }
      case CurveKind::Trace: {
        double best_t = 0, best_d = 1e300;
        const std::size_t n = samples.size();
        const std::size_t segs = closed_trace ? n : n - 1;
        for (std::size_t i = 0; i < segs; ++i) {
          const Vec3& a = samples[i];
          const Vec3& b = samples[(i + 1) % n];
          const Vec3 ab = b - a;
          const double len2 = ab.squaredNorm();
          const double s = len2 > 0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
          const double d = (a + s * ab - q).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best_t = arc[i] + s * (arc[i + 1] - arc[i]);
          }
        }
        // A few unit-speed Newton steps onto the interpolant.
        if (!tangents.empty())
          for (int it = 0; it < 3; ++it) {
            double t = best_t + (q - eval(best_t)).dot(tangent(best_t));
            t = closed_trace ? wrap(t) : std::clamp(t, 0.0, arc.back());
            if ((eval(t) - q).squaredNorm() >= (eval(best_t) - q).squaredNorm()) break;
            best_t = t;
          }
        return best_t;
      }
    }
    return 0.0;
  }

  double distance(const Vec3& q) const { return (eval(closest_param(q)) - q).norm(); }

  /// Parameter range covering the curve once (lines: the given span).
  std::pair<double, double> natural_range(double line_span = 4.0) const {
    if (kind == CurveKind::Line) return {-line_span, line_span};
    if (kind == CurveKind::Trace) return {0.0, trace_length()};
    return {0.0, 2 * std::numbers::pi};
  }

  double wrap(double t) const {
    const double p = period();
    if (p <= 0) return t;
    t = std::fmod(t, p);
    return t < 0 ? t + p : t;
  }

 private:
  std::tuple<std::size_t, std::size_t, double> trace_segment(double t) const {
    const std::size_t n = samples.size();
    if (n < 2) return {0, 0, 0.0};
    if (closed_trace) t = wrap(t);
    t = std::clamp(t, 0.0, arc.back());
    const auto it = std::upper_bound(arc.begin(), arc.end(), t);
    std::size_t i = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin()) - 1;
    const std::size_t last_seg = closed_trace ? n - 1 : n - 2;
    i = std::min(i, last_seg);
    const std::size_t j = (i + 1) % n;
    const double len = arc[i + 1] - arc[i];
    return {i, j, len > 0 ? (t - arc[i]) / len : 0.0};
  }
  Vec3 trace_eval(double t) const {
    if (samples.empty()) return origin;
    if (samples.size() == 1) return samples.front();
    const auto [i, j, s] = trace_segment(t);
    if (tangents.empty()) return samples[i] + s * (samples[j] - samples[i]);
    const double h = (samples[j] - samples[i]).norm(), s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * samples[i] + (s3 - 2 * s2 + s) * h * tangents[i] + (3 * s2 - 2 * s3) * samples[j] +
           (s3 - s2) * h * tangents[j];
  }
};

struct IntersectOptions {
  Vec3 lo = Vec3::Constant(-1.25);
  Vec3 hi = Vec3::Constant(1.25);
  int grid = 32;
  double step = 0.005;
  double tolerance = 1e-8;
  int alternations = 50;
  double coaxial_tolerance = 1e-9;
  int max_steps = 200000;
  double tangent_gap = 1e-3;  // near-tangent coaxial surfaces within this gap meet in one circle
};

namespace curve_detail {

inline bool parallel(const Vec3& a, const Vec3& b, double tol) { return a.cross(b).norm() <= tol; }

/// Primitive as a curve in the meridian half-plane (rho >= 0, z) about an axis.
struct Meridian {
  bool is_circle = false;
  Eigen::Vector2d p;  // line point or circle center
  Eigen::Vector2d d;  // line direction (unit)
  double r = 0;
  bool ray = false;  // line restricted to t >= 0 (cone nappe)
};

inline std::optional<Meridian> meridian(const Primitive& P, const Vec3& O, const Vec3& z, double tol) {
  const auto height = [&](const Vec3& q) { return (q - O).dot(z); };
  const auto on_axis = [&](const Vec3& q) { return point_line_distance(q, O, z) <= tol; };
  Meridian m;
  switch (P.kind) {
    case PrimitiveKind::Plane:
      if (!parallel(P.axis, z, tol)) return std::nullopt;
      m.p = {0, height(P.position)};
      m.d = {1, 0};
      return m;
    case PrimitiveKind::Cylinder:
      if (!parallel(P.axis, z, tol) || !on_axis(P.position)) return std::nullopt;
      m.p = {P.radius, 0};
      m.d = {0, 1};
      return m;
    case PrimitiveKind::Cone: {
      if (!parallel(P.axis, z, tol) || !on_axis(P.position)) return std::nullopt;
      const double s = P.axis.dot(z) >= 0 ? 1.0 : -1.0;
      m.p = {0, height(P.apex())};
      m.d = {std::sin(P.semi_angle), s * std::cos(P.semi_angle)};
      m.ray = true;
      return m;
    }
    case PrimitiveKind::Sphere:
      if (!on_axis(P.position)) return std::nullopt;
      m.is_circle = true;
      m.p = {0, height(P.position)};
      m.r = P.radius;
      return m;
    case PrimitiveKind::Torus:
      if (!parallel(P.axis, z, tol) || !on_axis(P.position)) return std::nullopt;
      m.is_circle = true;
      m.p = {P.major_radius, height(P.position)};
      m.r = P.minor_radius;
      return m;
  }
  return std::nullopt;
}

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Intersections of two meridian curves. Near-double roots collapse to one point;
/// curves missing each other by at most near_tol are treated as tangent there.
inline std::vector<Eigen::Vector2d> meridian_points(const Meridian& A, const Meridian& B, double near_tol = 0.0) {
  using V2 = Eigen::Vector2d;
  std::vector<V2> out;
  const auto on_ray = [](const Meridian& m, const V2& q) { return !m.ray || (q - m.p).dot(m.d) >= -1e-12; };
  if (!A.is_circle && !B.is_circle) {
    const double den = cross2(A.d, B.d);
    if (std::abs(den) < 1e-14) return out;
    const double t = cross2(B.p - A.p, B.d) / den;
    out.push_back(A.p + t * A.d);
  } else if (A.is_circle != B.is_circle) {
    const Meridian& L = A.is_circle ? B : A;
    const Meridian& C = A.is_circle ? A : B;
    const V2 foot = L.p + (C.p - L.p).dot(L.d) * L.d;
    const double delta = (foot - C.p).norm();
    const double h2 = C.r * C.r - delta * delta;
    if (h2 < 0) {
      if (delta - C.r <= near_tol && delta > 0) out.push_back(C.p + C.r / delta * (foot - C.p));
    } else if (h2 <= 1e-10 * C.r * C.r) {
      out.push_back(foot);
    } else {
      const double h = std::sqrt(h2);
      out.push_back(foot - h * L.d);
      out.push_back(foot + h * L.d);
    }
  } else {
    const V2 d = B.p - A.p;
    const double D = d.norm();
    if (D < 1e-14) return out;
    const V2 e = d / D, n(-e.y(), e.x());
    const double outer = D - (A.r + B.r), inner = std::abs(A.r - B.r) - D;
    if (outer > 0 || inner > 0) {
      if (outer > 0 && outer <= near_tol) out.push_back(A.p + (A.r + 0.5 * outer) * e);
      if (inner > 0 && inner <= near_tol) out.push_back(A.p + (A.r >= B.r ? A.r - 0.5 * inner : -(A.r + 0.5 * inner)) * e);
    } else {
      const double x = (D * D + A.r * A.r - B.r * B.r) / (2 * D);
      const double h2 = std::max(0.0, A.r * A.r - x * x);
      if (h2 <= 1e-10 * A.r * A.r) {
        out.push_back(A.p + x * e);
      } else {
        const double h = std::sqrt(h2);
        out.push_back(A.p + x * e - h * n);
        out.push_back(A.p + x * e + h * n);
      }
    }
  }
  std::vector<V2> kept;
  for (const auto& q : out)
    if (q.x() > 1e-9 && on_ray(A, q) && on_ray(B, q)) kept.push_back(q);
  return kept;
}

/// Shared axis of two surfaces of revolution, if any.
inline std::optional<std::pair<Vec3, Vec3>> common_axis(const Primitive& A, const Primitive& B, double tol) {
  const auto axial = [](const Primitive& p) {
    return p.kind == PrimitiveKind::Cylinder || p.kind == PrimitiveKind::Cone || p.kind == PrimitiveKind::Torus;
  };
  std::optional<std::pair<Vec3, Vec3>> axis;
  if (axial(A)) axis = std::pair{axis_anchor(A), A.axis};
  else if (axial(B)) axis = std::pair{axis_anchor(B), B.axis};
  else if (A.kind == PrimitiveKind::Sphere && B.kind == PrimitiveKind::Sphere) {
    const Vec3 d = B.position - A.position;
    if (d.norm() < 1e-14) return std::nullopt;
    axis = std::pair{A.position, Vec3(d.normalized())};
  } else if (A.kind == PrimitiveKind::Sphere) {
    axis = std::pair{A.position, B.axis};
  } else if (B.kind == PrimitiveKind::Sphere) {
    axis = std::pair{B.position, A.axis};
  } else {
    return std::nullopt;  // two planes
  }
  if (!meridian(A, axis->first, axis->second, tol) || !meridian(B, axis->first, axis->second, tol)) return std::nullopt;
  return axis;
}

/// Newton projection onto both surfaces using their signed residuals.
inline std::optional<Vec3> correct(const Primitive& A, const Primitive& B, Vec3 x, double tol, int iters = 30) {
  for (int it = 0; it < iters; ++it) {
    const double fa = signed_distance(A, x), fb = signed_distance(B, x);
    if (std::max(implicit_distance(A, x), implicit_distance(B, x)) <= tol) return x;
    const Vec3 na = surface_normal(A, x), nb = surface_normal(B, x);
    Eigen::Matrix<double, 2, 3> J;
    J.row(0) = na.transpose();
    J.row(1) = nb.transpose();
    const Eigen::Matrix2d JJ = J * J.transpose();
    if (std::abs(JJ.determinant()) < 1e-14) return std::nullopt;
    const Vec3 step = J.transpose() * JJ.inverse() * Eigen::Vector2d(fa, fb);
    if (!step.allFinite() || step.norm() > 0.1) return std::nullopt;
    x -= step;
  }
  if (std::max(implicit_distance(A, x), implicit_distance(B, x)) <= tol) return x;
  return std::nullopt;
}

inline bool inside(const Vec3& x, const IntersectOptions& o, double margin) {
  return (x.array() >= o.lo.array() - margin).all() && (x.array() <= o.hi.array() + margin).all();
}

/// Marches one branch from a converged seed. Returns samples and whether it closed.
inline std::pair<std::vector<Vec3>, bool> march(const Primitive& A, const Primitive& B, const Vec3& seed,
                                                const IntersectOptions& o) {
  const auto tangent = [&](const Vec3& x) { return Vec3(surface_normal(A, x).cross(surface_normal(B, x))); };
  const auto walk = [&](double sign, std::vector<Vec3>& pts) {
    Vec3 x = seed;
    Vec3 t_prev = sign * tangent(seed).normalized();
    for (int k = 0; k < o.max_steps; ++k) {
      double h = o.step;
      std::optional<Vec3> next;
      while (h >= o.step / 64) {
        const Vec3 t = tangent(x);
        if (t.norm() < 1e-9) break;
        Vec3 dir = t.normalized();
        if (dir.dot(t_prev) < 0) dir = -dir;
        next = correct(A, B, x + h * dir, o.tolerance);
        if (next && (*next - x).norm() <= 1.5 * h && (*next - x).norm() >= 0.25 * h) {
          t_prev = dir;
          break;
        }
        next.reset();
        h *= 0.5;
      }
      if (!next) return false;
      // Closing back onto the seed.
      if (pts.size() > 3 && (*next - seed).norm() < 0.75 * o.step) return true;
      pts.push_back(*next);
      x = *next;
      if (!inside(x, o, 2 * o.step)) return false;
    }
    return false;
  };
  std::vector<Vec3> fwd{seed};
  if (walk(1.0, fwd)) return {fwd, true};
  std::vector<Vec3> bwd;
  walk(-1.0, bwd);
  std::reverse(bwd.begin(), bwd.end());
  bwd.insert(bwd.end(), fwd.begin(), fwd.end());
  return {bwd, false};
}

inline std::vector<Curve> trace_intersection(const Primitive& A, const Primitive& B, const IntersectOptions& o) {
  const int n = o.grid;
  const Vec3 cell = (o.hi - o.lo) / (n - 1);
  const double near = cell.norm();
  std::vector<Vec3> seeds;
  bool tangential = false;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Vec3 x = o.lo + Vec3(i * cell.x(), j * cell.y(), k * cell.z());
        if (implicit_distance(A, x) + implicit_distance(B, x) > near) continue;
        for (int a = 0; a < o.alternations; ++a) x = project_point(B, project_point(A, x));
        const auto c = correct(A, B, x, o.tolerance);
        if (!c) {
          if (std::max(implicit_distance(A, x), implicit_distance(B, x)) < 1e-6) tangential = true;
          continue;
        }
        if (surface_normal(A, *c).cross(surface_normal(B, *c)).norm() < 1e-6) {
          tangential = true;
          continue;
        }
        if (inside(*c, o, 0.0)) seeds.push_back(*c);
      }
  std::vector<Curve> out;
  std::vector<Vec3> traced;
  for (const Vec3& s : seeds) {
    bool covered = false;
    for (const Vec3& p : traced)
      if ((p - s).squaredNorm() < 4 * o.step * o.step) {
        covered = true;
        break;
      }
    if (covered) continue;
    auto [pts, closed] = march(A, B, s, o);
    if (pts.size() < 2) continue;
    traced.insert(traced.end(), pts.begin(), pts.end());
    std::vector<Vec3> tangents;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Vec3 t = surface_normal(A, pts[i]).cross(surface_normal(B, pts[i])).normalized();
      const Vec3 along = pts[std::min(i + 1, pts.size() - 1)] - pts[i > 0 ? i - 1 : 0];
      if (t.dot(along) < 0) t = -t;
      tangents.push_back(t);
    }
    out.push_back(Curve::trace(std::move(pts), closed, std::move(tangents)));
  }
  if (out.empty() && tangential) throw Error(ErrorCode::TangentialContact, "surfaces touch without crossing");
  return out;
}

}  // namespace curve_detail

/// Intersection curves of two primitives: analytic for the listed special cases,
/// marched traces otherwise.
inline std::vector<Curve> intersect_surfaces(const Primitive& A, const Primitive& B, const IntersectOptions& o = {}) {
  using namespace curve_detail;
  const double tol = o.coaxial_tolerance;
  std::vector<Curve> out;

  if (A.kind == PrimitiveKind::Plane && B.kind == PrimitiveKind::Plane) {
    const Vec3 d = A.axis.cross(B.axis);
    if (d.norm() < 1e-12) return out;
    const double c = A.axis.dot(B.axis);
    const double da = A.axis.dot(A.position), db = B.axis.dot(B.position);
    const Vec3 p = ((da - db * c) * A.axis + (db - da * c) * B.axis) / (1 - c * c);
    out.push_back(Curve::line(p, d));
    return out;
  }

  if (const auto axis = common_axis(A, B, tol)) {
    const auto& [O, z] = *axis;
    const auto ma = meridian(A, O, z, tol), mb = meridian(B, O, z, tol);
    for (const auto& q : meridian_points(*ma, *mb, o.tangent_gap)) out.push_back(Curve::circle(O + q.y() * z, z, q.x()));
    return out;
  }

  const bool a_plane = A.kind == PrimitiveKind::Plane, b_plane = B.kind == PrimitiveKind::Plane;
  if (a_plane || b_plane) {
    const Primitive& P = a_plane ? A : B;
    const Primitive& Q = a_plane ? B : A;
    const Vec3 n = P.axis;
    if (Q.kind == PrimitiveKind::Cylinder) {
      const double c = n.dot(Q.axis);
      if (std::abs(c) <= 1e-12) {
        // Axis parallel to the plane: zero, one or two rulings.
        const double delta = n.dot(Q.position - P.position);
        const Vec3 foot = Q.position - delta * n;
        const Vec3 w = n.cross(Q.axis).normalized();
        const double h2 = Q.radius * Q.radius - delta * delta;
        if (h2 < -1e-12) return out;
        if (h2 <= 1e-12) {
          out.push_back(Curve::line(foot, Q.axis));
          return out;
        }
        const double h = std::sqrt(h2);
        out.push_back(Curve::line(foot - h * w, Q.axis));
        out.push_back(Curve::line(foot + h * w, Q.axis));
        return out;
      }
      const double s = n.dot(P.position - Q.position) / c;
      const Vec3 center = Q.position + s * Q.axis;
      const Vec3 major = Q.axis - c * n;
      out.push_back(Curve::ellipse(center, n, major, Q.radius / std::abs(c), Q.radius));
      return out;
    }
    if (Q.kind == PrimitiveKind::Cone) {
      const Vec3 a = Q.axis, V = Q.apex();
      double c = n.dot(a);
      const double sa = std::sin(Q.semi_angle), ca = std::cos(Q.semi_angle);
      if (std::abs(c) > sa + 1e-9) {
        const double s = n.dot(P.position - V) / c;  // axis meets the plane at V + s a
        if (s > 0) {
          const Vec3 C0 = V + s * a;
          const double k = std::sqrt(std::max(0.0, 1 - c * c));
          const Vec3 e1 = k > 1e-12 ? Vec3((a - c * n) / k) : orthonormal_frame(n).first;
          const double A2 = ca * ca - k * k;
          const double x0 = s * k * sa * sa / A2;
          const double R = s * s * sa * sa * ca * ca * c * c / A2;
          const double ax1 = std::sqrt(R / A2), ax2 = std::sqrt(R) / ca;
          out.push_back(Curve::ellipse(C0 + x0 * e1, n, e1, ax1, ax2));
        }
        return out;
      }
    }
  }
  return trace_intersection(A, B, o);
}

/// Mean distance from 32 arc-length-uniform samples of a polyline to each curve;
/// the nearest wins, ties to the lower curve kind then lower index.
inline std::vector<Vec3> resample_polyline(const std::vector<Vec3>& poly, int count) {
  std::vector<double> arc(poly.size(), 0.0);
  for (std::size_t i = 1; i < poly.size(); ++i) arc[i] = arc[i - 1] + (poly[i] - poly[i - 1]).norm();
  std::vector<Vec3> out;
  if (poly.empty()) return out;
  for (int k = 0; k < count; ++k) {
    const double s = count == 1 ? 0.0 : arc.back() * k / (count - 1);
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t i = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin()) - 1;
    if (i + 1 >= poly.size()) {
      out.push_back(poly.back());
      continue;
    }
    const double len = arc[i + 1] - arc[i];
    out.push_back(len > 0 ? Vec3(poly[i] + (s - arc[i]) / len * (poly[i + 1] - poly[i])) : poly[i]);
  }
  return out;
}

inline double mean_curve_distance(const Curve& c, const std::vector<Vec3>& samples) {
  double sum = 0;
  for (const auto& q : samples) sum += c.distance(q);
  return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

inline int select_curve(const std::vector<Curve>& curves, const std::vector<Vec3>& polyline) {
  if (curves.empty()) throw Error(ErrorCode::NoCurves, "no intersection curve for a topological edge");
  const auto samples = resample_polyline(polyline, 32);
  int best = 0;
  double best_d = mean_curve_distance(curves[0], samples);
  for (int i = 1; i < static_cast<int>(curves.size()); ++i) {
    const double d = mean_curve_distance(curves[i], samples);
    const bool tie = std::abs(d - best_d) <= 1e-12 * std::max(1.0, best_d);
    if ((!tie && d < best_d) || (tie && curves[i].kind < curves[best].kind)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

struct CurveHit {
  Vec3 point;
  double gap = 0;  // closest-approach distance between the curves
};

namespace curve_detail {

inline bool is_conic(const Curve& c) { return c.kind == CurveKind::Circle || c.kind == CurveKind::Ellipse; }

/// Line-conic intersections within the conic's plane (the line is assumed in-plane).
inline std::vector<double> line_conic_params(const Vec3& p, const Vec3& d, const Curve& c) {
  const Vec3 w = p - c.origin;
  const double px = w.dot(c.u) / c.r1, py = w.dot(c.v) / c.r2;
  const double dx = d.dot(c.u) / c.r1, dy = d.dot(c.v) / c.r2;
  const double a = dx * dx + dy * dy, b = 2 * (px * dx + py * dy), cc = px * px + py * py - 1;
  std::vector<double> r;
  if (a < 1e-300) return r;
  double disc = b * b - 4 * a * cc;
  if (disc < -1e-9 * std::max(b * b, 1e-300)) return r;
  disc = std::max(disc, 0.0);
  const double s = std::sqrt(disc);
  r.push_back((-b - s) / (2 * a));
  if (s > 0) r.push_back((-b + s) / (2 * a));
  return r;
}

inline void add_hit(std::vector<CurveHit>& hits, const Curve& c1, const Curve& c2, const Vec3& q) {
  const Vec3 p1 = c1.eval(c1.closest_param(q)), p2 = c2.eval(c2.closest_param(q));
  hits.push_back({0.5 * (p1 + p2), (p1 - p2).norm()});
}

/// Dense sampling of c1 against c2 with golden-section refinement of local minima.
inline void numeric_hits(const Curve& c1, const Curve& c2, std::vector<CurveHit>& hits, double span) {
  const auto [t0, t1] = c1.natural_range(span);
  const int n = c1.kind == CurveKind::Trace ? std::max<int>(64, static_cast<int>(c1.samples.size()) * 2) : 2048;
  const double dt = (t1 - t0) / n;
  const auto f = [&](double t) { return c2.distance(c1.eval(t)); };
  std::vector<double> val(n + 1);
  for (int i = 0; i <= n; ++i) val[i] = f(t0 + i * dt);
  for (int i = 0; i <= n; ++i) {
    const bool left = i == 0 ? !c1.periodic() || val[i] <= val[n - 1] : val[i] <= val[i - 1];
    const bool right = i == n ? !c1.periodic() || val[i] <= val[1] : val[i] <= val[i + 1];
    if (!left || !right || (c1.periodic() && i == n)) continue;
    double a = t0 + (i - 1) * dt, b = t0 + (i + 1) * dt;
    if (!c1.periodic()) a = std::max(a, t0), b = std::min(b, t1);
    const double g = (std::sqrt(5.0) - 1) / 2;
    double x1 = b - g * (b - a), x2 = a + g * (b - a), f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        b = x2, x2 = x1, f2 = f1, x1 = b - g * (b - a), f1 = f(x1);
      } else {
        a = x1, x1 = x2, f1 = f2, x2 = a + g * (b - a), f2 = f(x2);
      }
    }
    add_hit(hits, c1, c2, c1.eval(0.5 * (a + b)));
  }
}

}  // namespace curve_detail

/// Closest-approach points of two curves (candidate vertex positions), each with
/// its gap. Analytic for line and conic pairs with distinct planes.
inline std::vector<CurveHit> intersect_curves(const Curve& c1, const Curve& c2, double span = 4.0) {
  using namespace curve_detail;
  std::vector<CurveHit> hits;
  const bool l1 = c1.kind == CurveKind::Line, l2 = c2.kind == CurveKind::Line;
  if (l1 && l2) {
    const Vec3 w = c1.origin - c2.origin;
    const double b = c1.direction.dot(c2.direction);
    const double den = 1 - b * b;
    if (den < 1e-14) return hits;
    const double d1 = c1.direction.dot(w), d2 = c2.direction.dot(w);
    const double s = (b * d2 - d1) / den, t = (d2 - b * d1) / den;
    const Vec3 p1 = c1.eval(s), p2 = c2.eval(t);
    hits.push_back({0.5 * (p1 + p2), (p1 - p2).norm()});
    return hits;
  }
  if ((l1 && is_conic(c2)) || (l2 && is_conic(c1))) {
    const Curve& L = l1 ? c1 : c2;
    const Curve& C = l1 ? c2 : c1;
    const double dn = L.direction.dot(C.direction);
    if (std::abs(dn) > 1e-9) {
      const double t = (C.origin - L.origin).dot(C.direction) / dn;
      add_hit(hits, c1, c2, L.eval(t));
      return hits;
    }
    // Line parallel to the conic plane: project it in and solve the quadratic.
    const Vec3 p = L.origin - (L.origin - C.origin).dot(C.direction) * C.direction;
    for (double t : line_conic_params(p, L.direction, C)) add_hit(hits, c1, c2, p + t * L.direction);
    if (hits.empty()) numeric_hits(c1, c2, hits, span);
    return hits;
  }
  if (is_conic(c1) && is_conic(c2)) {
    const Vec3 d = c1.direction.cross(c2.direction);
    if (d.norm() > 1e-9) {
      const Vec3 n1 = c1.direction, n2 = c2.direction;
      const double a = n1.dot(c1.origin), b = n2.dot(c2.origin), c = n1.dot(n2);
      const Vec3 p = ((a - b * c) * n1 + (b - a * c) * n2) / (1 - c * c);
      const Vec3 dir = d.normalized();
      for (double t : line_conic_params(p, dir, c1)) add_hit(hits, c1, c2, p + t * dir);
      for (double t : line_conic_params(p, dir, c2)) add_hit(hits, c1, c2, p + t * dir);
      if (!hits.empty()) return hits;
    }
  }
  numeric_hits(c1, c2, hits, span);
  numeric_hits(c2, c1, hits, span);
  return hits;
}

}  // namespace primrep
