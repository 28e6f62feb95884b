#pragma once

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "primrep/error.hpp"
#include "primrep/mesh.hpp"
#include "primrep/primitive.hpp"

namespace primrep {

struct FitConfig {
  int budget = 1024;
  double eps_d = 0.01;
  double eps_n = std::cos(15.0 * std::numbers::pi / 180.0);
  int gn_steps = 20;
  std::uint64_t seed = 0;
  int max_score_points = 2000;
  double min_inlier_ratio = 0.5;
};

inline int minimal_sample_size(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Plane: return 1;
    case PrimitiveKind::Sphere:
    case PrimitiveKind::Cylinder: return 2;
    case PrimitiveKind::Cone: return 3;
    case PrimitiveKind::Torus: return 4;
  }
  return 1;
}

inline bool is_inlier(const Primitive& prim, const Vec3& q, const Vec3& n, double eps_d, double eps_n) {
  if (implicit_distance(prim, q) > eps_d) return false;
  return std::abs(surface_normal(prim, q).dot(n)) >= eps_n;
}

struct PatchSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
};

/// Vertices of one patch with normals. Stored mesh normals are used inside the
/// patch; vertices on its border get an area-weighted normal from the patch's own faces.
inline PatchSamples patch_samples(const TriangleMesh& mesh, const std::vector<int>& face_patch, int patch) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<Vec3> local(nv, Vec3::Zero());
  std::vector<char> mine(nv, 0), other(nv, 0);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const bool in = face_patch[f] == patch;
    const Vec3 an = in ? Vec3(0.5 * (mesh.vertices[mesh.triangles[f][1]] - mesh.vertices[mesh.triangles[f][0]])
                                         .cross(mesh.vertices[mesh.triangles[f][2]] - mesh.vertices[mesh.triangles[f][0]]))
                       : Vec3::Zero();
    for (int v : mesh.triangles[f]) {
      if (in) {
        mine[v] = 1;
        local[v] += an;
      } else {
        other[v] = 1;
      }
    }
  }
  PatchSamples s;
  for (std::size_t v = 0; v < nv; ++v) {
    if (!mine[v]) continue;
    Vec3 n = (!other[v] && mesh.has_normals()) ? mesh.normals[v] : local[v];
    if (n.norm() < 1e-300) continue;
    s.points.push_back(mesh.vertices[v]);
    s.normals.push_back(n.normalized());
  }
  return s;
}

namespace fit_detail {

inline bool closest_on_lines(const Vec3& p0, const Vec3& d0, const Vec3& p1, const Vec3& d1, Vec3& c0, Vec3& c1) {
  const double b = d0.dot(d1);
  const double den = 1 - b * b;
  if (den < 1e-8) return false;
  const Vec3 w = p0 - p1;
  const double e = d0.dot(w), f = d1.dot(w);
  const double s = (b * f - e) / den;
  const double t = (f - b * e) / den;
  c0 = p0 + s * d0;
  c1 = p1 + t * d1;
  return true;
}

// Least-squares intersection of 2D lines through p_i with direction d_i.
inline std::optional<Eigen::Vector2d> intersect_lines_2d(const std::vector<Eigen::Vector2d>& p,
                                                         const std::vector<Eigen::Vector2d>& d) {
  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double len = d[i].norm();
    if (len < 1e-12) return std::nullopt;
    const Eigen::Vector2d w(-d[i].y() / len, d[i].x() / len);
    A += w * w.transpose();
    b += w * w.dot(p[i]);
  }
  if (std::abs(A.determinant()) < 1e-10) return std::nullopt;
  return Eigen::Vector2d(A.ldlt().solve(b));
}

inline bool spread_ok(const std::vector<double>& v, double tol) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo <= tol;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::vector<Primitive> solve_plane(const std::vector<Vec3>& p, const std::vector<Vec3>& n) {
  return {make_plane(n[0].normalized(), p[0])};
}

inline std::vector<Primitive> solve_sphere(const std::vector<Vec3>& p, const std::vector<Vec3>& n, double tol) {
  Vec3 c0, c1;
  if (!closest_on_lines(p[0], n[0], p[1], n[1], c0, c1)) return {};
  if ((c0 - c1).norm() > tol) return {};
  const Vec3 c = 0.5 * (c0 + c1);
  const std::vector<double> r{(p[0] - c).norm(), (p[1] - c).norm()};
  if (!spread_ok(r, tol) || mean(r) < 1e-6) return {};
  return {make_sphere(c, mean(r))};
}

inline std::vector<Primitive> solve_cylinder(const std::vector<Vec3>& p, const std::vector<Vec3>& n, double tol) {
  Vec3 a = n[0].cross(n[1]);
  if (a.norm() < 0.02) return {};
  a.normalize();
  const auto [e1, e2] = orthonormal_frame(a);
  std::vector<Eigen::Vector2d> p2, d2;
  for (int i = 0; i < 2; ++i) {
    p2.emplace_back(p[i].dot(e1), p[i].dot(e2));
    d2.emplace_back(n[i].dot(e1), n[i].dot(e2));
  }
  const auto c = intersect_lines_2d(p2, d2);
  if (!c) return {};
  const std::vector<double> r{(p2[0] - *c).norm(), (p2[1] - *c).norm()};
  if (!spread_ok(r, tol) || mean(r) < 1e-6) return {};
  return {make_cylinder(a, c->x() * e1 + c->y() * e2 + p[0].dot(a) * a, mean(r))};
}

inline std::vector<Primitive> solve_cone(const std::vector<Vec3>& p, const std::vector<Vec3>& n, double tol) {
  Eigen::Matrix3d N;
  Vec3 b;
  for (int i = 0; i < 3; ++i) {
    N.row(i) = n[i].transpose();
    b[i] = n[i].dot(p[i]);
  }
  if (std::abs(N.determinant()) < 1e-6) return {};
  const Vec3 apex = N.partialPivLu().solve(b);
  Vec3 a = (n[0] - n[1]).cross(n[0] - n[2]);
  if (a.norm() < 1e-6) return {};
  a.normalize();
  double side = 0;
  for (int i = 0; i < 3; ++i) side += (p[i] - apex).dot(a);
  if (side < 0) a = -a;
  std::vector<double> ang;
  double h = 0;
  for (int i = 0; i < 3; ++i) {
    const Vec3 d = p[i] - apex;
    const double len = d.norm();
    if (len < 1e-9) return {};
    ang.push_back(std::acos(std::clamp(d.dot(a) / len, -1.0, 1.0)));
    h = std::max(h, d.dot(a));
  }
  const double alpha = mean(ang);
  if (alpha <= 1e-3 || alpha >= std::numbers::pi / 2 - 1e-3) return {};
  // Residual of each sample against the candidate surface.
  for (int i = 0; i < 3; ++i)
    if ((p[i] - apex).norm() * std::abs(std::sin(ang[i] - alpha)) > tol) return {};
  return {make_cone_from_apex(apex, a, alpha, std::max(2 * h, 1e-3))};
}

// Every normal line of a torus meets its axis. In Plücker coordinates the axis (d, m)
// satisfies d.m_i + n_i.m = 0 for each normal line (n_i, m_i) and d.m = 0.
inline std::vector<Primitive> solve_torus(const std::vector<Vec3>& p, const std::vector<Vec3>& n, double tol) {
  Eigen::Matrix<double, 4, 6> A;
  for (int i = 0; i < 4; ++i) {
    A.block<1, 3>(i, 0) = p[i].cross(n[i]).transpose();
    A.block<1, 3>(i, 3) = n[i].transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 6>> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[3] < 1e-9 * std::max(1.0, sv[0])) return {};
  const Eigen::Matrix<double, 6, 1> u = svd.matrixV().col(4), v = svd.matrixV().col(5);
  const double qa = v.head<3>().dot(v.tail<3>());
  const double qb = u.head<3>().dot(v.tail<3>()) + v.head<3>().dot(u.tail<3>());
  const double qc = u.head<3>().dot(u.tail<3>());
  std::vector<Eigen::Matrix<double, 6, 1>> lines;
  if (std::abs(qa) < 1e-12) {
    lines.push_back(v);
    if (std::abs(qb) > 1e-12) lines.push_back(u - (qc / qb) * v);
  } else {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc < 0) return {};
    const double sq = std::sqrt(disc);
    for (double lam : {(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)}) lines.push_back(u + lam * v);
  }
  std::vector<Primitive> out;
  for (const auto& w : lines) {
    Vec3 d = w.head<3>();
    const double dn = d.norm();
    if (dn < 1e-9) continue;
    d /= dn;
    const Vec3 m = w.tail<3>() / dn;
    const Vec3 c = d.cross(m);
    std::vector<Eigen::Vector2d> p2, d2;
    for (int i = 0; i < 4; ++i) {
      const Vec3 rel = p[i] - c;
      const double z = rel.dot(d);
      const Vec3 rad = rel - z * d;
      const double rho = rad.norm();
      if (rho < 1e-9) break;
      const Vec3 e = rad / rho;
      p2.emplace_back(rho, z);
      d2.emplace_back(n[i].dot(e), n[i].dot(d));
    }
    if (p2.size() != 4) continue;
    const auto core = intersect_lines_2d(p2, d2);
    if (!core) continue;
    std::vector<double> r;
    for (const auto& q : p2) r.push_back((q - *core).norm());
    const double minor = mean(r);
    if (!spread_ok(r, tol) || core->x() <= minor || minor < 1e-6) continue;
    out.push_back(make_torus(d, c + core->y() * d, core->x(), minor));
  }
  return out;
}

inline std::vector<Primitive> solve_minimal(PrimitiveKind k, const std::vector<Vec3>& p, const std::vector<Vec3>& n,
                                            double tol) {
  switch (k) {
    case PrimitiveKind::Plane: return solve_plane(p, n);
    case PrimitiveKind::Sphere: return solve_sphere(p, n, tol);
    case PrimitiveKind::Cylinder: return solve_cylinder(p, n, tol);
    case PrimitiveKind::Cone: return solve_cone(p, n, tol);
    case PrimitiveKind::Torus: return solve_torus(p, n, tol);
  }
  return {};
}

constexpr int kParams = 9;
using AD = Eigen::AutoDiffScalar<Eigen::Matrix<double, kParams, 1>>;
using ParamVec = Eigen::Matrix<double, kParams, 1>;

inline ParamVec pack(const Primitive& p) {
  ParamVec x = ParamVec::Zero();
  x.segment<3>(0) = p.axis;
  x.segment<3>(3) = p.position;
  switch (p.kind) {
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Sphere: x[6] = p.radius; break;
    case PrimitiveKind::Cone: x[6] = p.semi_angle; break;
    case PrimitiveKind::Torus:
      x[6] = p.major_radius;
      x[7] = p.minor_radius;
      break;
    case PrimitiveKind::Plane: break;
  }
  return x;
}

template <class T>
BasicPrimitive<T> unpack(const Primitive& shape, const Eigen::Matrix<T, kParams, 1>& x) {
  BasicPrimitive<T> p = shape.template cast<T>();
  Eigen::Matrix<T, 3, 1> a = x.template segment<3>(0);
  p.axis = a / a.norm();
  p.position = x.template segment<3>(3);
  switch (shape.kind) {
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Sphere: p.radius = x[6]; break;
    case PrimitiveKind::Cone: p.semi_angle = x[6]; break;
    case PrimitiveKind::Torus:
      p.major_radius = x[6];
      p.minor_radius = x[7];
      break;
    case PrimitiveKind::Plane: break;
  }
  return p;
}

inline double objective(const Primitive& p, const std::vector<Vec3>& pts) {
  double f = 0;
  for (const auto& q : pts) {
    const double r = signed_distance(p, q);
    f += r * r;
  }
  return f;
}

}  // namespace fit_detail

/// Gauss-Newton refinement of all surface parameters over the given points.
/// Accepted steps never increase the sum of squared residuals.
inline Primitive refit(const Primitive& prim, const std::vector<Vec3>& points, int steps = 20) {
  using namespace fit_detail;
  if (points.size() < static_cast<std::size_t>(minimal_sample_size(prim.kind))) return prim;
  Primitive cur = prim;
  double f = objective(cur, points);
  for (int it = 0; it < steps && f > 0; ++it) {
    const ParamVec x = pack(cur);
    Eigen::Matrix<AD, kParams, 1> xa;
    for (int k = 0; k < kParams; ++k) xa[k] = AD(x[k], kParams, k);
    const BasicPrimitive<AD> pa = unpack<AD>(cur, xa);
    Eigen::Matrix<double, kParams, kParams> JtJ = Eigen::Matrix<double, kParams, kParams>::Zero();
    ParamVec Jtr = ParamVec::Zero();
    for (const auto& q : points) {
      const AD r = signed_distance<AD>(pa, q.cast<AD>());
      const ParamVec g = r.derivatives();
      JtJ.noalias() += g * g.transpose();
      Jtr += r.value() * g;
    }
    const double lambda = 1e-9 * (1.0 + JtJ.diagonal().maxCoeff());
    JtJ.diagonal().array() += lambda;
    const ParamVec delta = -JtJ.ldlt().solve(Jtr);
    if (!delta.allFinite()) return prim;
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h < 30; ++h, step *= 0.5) {
      Primitive trial = unpack<double>(cur, ParamVec(x + step * delta));
      trial.axis.normalize();
      if (!is_valid(trial)) continue;
      const double ft = objective(trial, points);
      if (ft <= f) {
        accepted = ft < f;
        cur = trial;
        f = ft;
        break;
      }
    }
    if (!accepted || step * delta.norm() < 1e-15) break;
  }
  return cur;
}

/// Type-constrained RANSAC followed by least-squares refinement on the inliers.
inline Primitive ransac_fit(PrimitiveKind kind, const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                            const FitConfig& cfg = {}) {
  using namespace fit_detail;
  const int need = minimal_sample_size(kind);
  const int n = static_cast<int>(points.size());
  if (n < need || normals.size() != points.size())
    throw Error(ErrorCode::InsufficientSupport, "too few samples for a " + std::string(to_string(kind)) + " fit");
  if (cfg.eps_d <= 0 || cfg.budget < 1) throw Error(ErrorCode::Config, "invalid fit configuration");

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> score_idx(n);
  std::iota(score_idx.begin(), score_idx.end(), 0);
  if (n > cfg.max_score_points) {
    std::shuffle(score_idx.begin(), score_idx.end(), rng);
    score_idx.resize(cfg.max_score_points);
    std::sort(score_idx.begin(), score_idx.end());
  }
  const auto count_inliers = [&](const Primitive& p) {
    int c = 0;
    for (int i : score_idx) c += is_inlier(p, points[i], normals[i], cfg.eps_d, cfg.eps_n);
    return c;
  };

  std::optional<Primitive> best;
  int best_score = -1;
  std::vector<Vec3> sp(need), sn(need);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int it = 0; it < cfg.budget && best_score < static_cast<int>(score_idx.size()); ++it) {
    std::vector<int> idx;
    while (static_cast<int>(idx.size()) < need) {
      const int i = pick(rng);
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    for (int k = 0; k < need; ++k) {
      sp[k] = points[idx[k]];
      sn[k] = normals[idx[k]];
    }
    for (const auto& cand : solve_minimal(kind, sp, sn, cfg.eps_d)) {
      if (!is_valid(cand)) continue;
      const int s = count_inliers(cand);
      if (s > best_score) {
        best_score = s;
        best = cand;
      }
    }
  }
  if (!best) throw Error(ErrorCode::InsufficientSupport, "no non-degenerate sample found");

  Primitive prim = *best;
  std::vector<Vec3> inl, inl_n;
  const auto collect = [&](const Primitive& p) {
    inl.clear();
    inl_n.clear();
    for (int i = 0; i < n; ++i)
      if (is_inlier(p, points[i], normals[i], cfg.eps_d, cfg.eps_n)) {
        inl.push_back(points[i]);
        inl_n.push_back(normals[i]);
      }
  };
  collect(prim);
  for (int round = 0; round < 2 && inl.size() >= static_cast<std::size_t>(need); ++round) {
    prim = refit(prim, inl, cfg.gn_steps);
    collect(prim);
  }
  const double ratio = static_cast<double>(inl.size()) / n;
  if (ratio < cfg.min_inlier_ratio || inl.empty())
    throw Error(ErrorCode::InsufficientSupport,
                std::string(to_string(kind)) + " fit explains only " + std::to_string(ratio * 100) + "% of samples");

  // Canonical placement near the data.
  Vec3 centroid = Vec3::Zero();
  for (const auto& q : inl) centroid += q;
  centroid /= static_cast<double>(inl.size());
  switch (kind) {
    case PrimitiveKind::Plane: {
      double agree = 0;
      for (const auto& m : inl_n) agree += m.dot(prim.axis);
      if (agree < 0) prim.axis = -prim.axis;
      prim.position = centroid - (centroid - prim.position).dot(prim.axis) * prim.axis;
      break;
    }
    case PrimitiveKind::Cylinder:
      prim.position += (centroid - prim.position).dot(prim.axis) * prim.axis;
      break;
    case PrimitiveKind::Cone: {
      const Vec3 apex = prim.apex();
      double h = 0;
      for (const auto& q : inl) h = std::max(h, (q - apex).dot(prim.axis));
      prim = make_cone_from_apex(apex, prim.axis, prim.semi_angle, std::max(h, 1e-6));
      break;
    }
    case PrimitiveKind::Sphere:
      prim.axis = Vec3::UnitZ();
      break;
    case PrimitiveKind::Torus:
      break;
  }
  return prim;
}

}  // namespace primrep
