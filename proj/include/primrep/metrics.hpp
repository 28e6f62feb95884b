#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "primrep/brep.hpp"
#include "primrep/error.hpp"
#include "primrep/mesh.hpp"

namespace primrep {

/// Area-uniform samples with face normals and per-sample labels.
struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<int> labels;

  std::size_t size() const { return points.size(); }
};

inline constexpr int kDefaultMetricSamples = 10000;

/// Seeded sampling: the same mesh, n and seed always give the same samples, and two
/// meshes with equal connectivity and areas pick the same triangles and barycentrics.
inline SurfaceSamples sample_surface(const TriangleMesh& mesh, int n, std::uint64_t seed,
                                     const std::vector<int>& face_labels = {}) {
  if (n < 1) throw Error(ErrorCode::Config, "sample count must be positive");
  std::vector<double> cum(mesh.triangles.size(), 0.0);
  double total = 0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
    cum[f] = total;
  }
  if (!(total > 0)) throw Error(ErrorCode::EmptySurface, "surface has zero area");
  std::mt19937_64 rng(seed);
  const auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  SurfaceSamples s;
  s.points.reserve(n);
  s.normals.reserve(n);
  s.labels.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double pick = unit() * total;
    std::size_t f = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin());
    f = std::min(f, cum.size() - 1);
    double a = unit(), b = unit();
    if (a + b > 1) a = 1 - a, b = 1 - b;
    const auto& t = mesh.triangles[f];
    const Vec3& p0 = mesh.vertices[t[0]];
    s.points.push_back(p0 + a * (mesh.vertices[t[1]] - p0) + b * (mesh.vertices[t[2]] - p0));
    s.normals.push_back(mesh.face_normal(f));
    s.labels.push_back(face_labels.empty() ? 0 : face_labels[f]);
  }
  return s;
}

/// Uniform grid for exact nearest-neighbour queries; ties go to the lowest index,
/// exactly as a brute-force scan would.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec3>& pts) : pts_(pts) {
    if (pts.empty()) throw Error(ErrorCode::EmptySurface, "no points to index");
    const BoundingBox box = bounding_box(pts);
    lo_ = box.min;
    const double diag = box.diagonal();
    cell_ = diag > 0 ? diag / std::cbrt(static_cast<double>(pts.size())) : 1.0;
    for (int k = 0; k < 3; ++k) dims_[k] = std::max(1, static_cast<int>(std::floor((box.max[k] - lo_[k]) / cell_)) + 1);
    start_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
    std::vector<int> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = index(coord(pts[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(pts.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) items_[fill[cell_of[i]]++] = static_cast<int>(i);
  }

  int nearest(const Vec3& q) const {
    const auto c = coord(q);
    int best = -1;
    double best_d = 1e300;
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    for (int r = 0; r <= max_ring; ++r) {
      for (int x = c[0] - r; x <= c[0] + r; ++x)
        for (int y = c[1] - r; y <= c[1] + r; ++y)
          for (int z = c[2] - r; z <= c[2] + r; ++z) {
            if (std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])}) != r) continue;
            if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) continue;
            const int id = index({x, y, z});
            for (int k = start_[id]; k < start_[id + 1]; ++k) {
              const int i = items_[k];
              const double d = (pts_[i] - q).squaredNorm();
              if (d < best_d || (d == best_d && i < best)) best_d = d, best = i;
            }
          }
      // Unvisited cells lie at least r cells away from the (clamped) query.
      const double reach = r * cell_;
      if (best >= 0 && best_d < reach * reach) break;
    }
    return best;
  }

 private:
  std::array<int, 3> coord(const Vec3& q) const {
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k)
      c[k] = std::clamp(static_cast<int>(std::floor((q[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
    return c;
  }
  int index(const std::array<int, 3>& c) const { return (c[2] * dims_[1] + c[1]) * dims_[0] + c[0]; }

  const std::vector<Vec3>& pts_;
  Vec3 lo_;
  double cell_ = 1;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<int> start_;
  std::vector<int> items_;
};

inline std::vector<int> nearest_indices(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  const PointGrid grid(to);
  std::vector<int> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = grid.nearest(from[i]);
  return out;
}

inline std::vector<int> nearest_indices_brute(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  std::vector<int> out(from.size(), -1);
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = (to[j] - from[i]).squaredNorm();
      if (d < best) best = d, out[i] = static_cast<int>(j);
    }
  }
  return out;
}

namespace metrics_detail {

using NearestFn = std::vector<int> (*)(const std::vector<Vec3>&, const std::vector<Vec3>&);

inline double chamfer(const SurfaceSamples& X, const SurfaceSamples& Y, NearestFn nn) {
  if (X.size() == 0 || Y.size() == 0) throw Error(ErrorCode::EmptySurface, "empty sample set");
  const auto xy = nn(X.points, Y.points), yx = nn(Y.points, X.points);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < X.size(); ++i) a += (X.points[i] - Y.points[xy[i]]).norm();
  for (std::size_t i = 0; i < Y.size(); ++i) b += (Y.points[i] - X.points[yx[i]]).norm();
  return 0.5 * (a / X.size() + b / Y.size());
}

inline double normal_consistency(const SurfaceSamples& X, const SurfaceSamples& Y, NearestFn nn) {
  if (X.size() == 0 || Y.size() == 0) throw Error(ErrorCode::EmptySurface, "empty sample set");
  const auto xy = nn(X.points, Y.points), yx = nn(Y.points, X.points);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < X.size(); ++i) a += std::abs(X.normals[i].dot(Y.normals[xy[i]]));
  for (std::size_t i = 0; i < Y.size(); ++i) b += std::abs(Y.normals[i].dot(X.normals[yx[i]]));
  return 100.0 * 0.5 * (a / X.size() + b / Y.size());
}

inline double seg_vertex(const SurfaceSamples& pred, const SurfaceSamples& gt, NearestFn nn) {
  if (pred.size() == 0 || gt.size() == 0) return 0.0;
  const auto nearest = nn(pred.points, gt.points);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred.labels[i] == gt.labels[nearest[i]] ? 1 : 0;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(pred.size());
}

}  // namespace metrics_detail

/// Symmetric mean nearest-neighbour distance between two sample sets.
inline double chamfer_distance(const SurfaceSamples& X, const SurfaceSamples& Y) {
  return metrics_detail::chamfer(X, Y, nearest_indices);
}
inline double chamfer_distance_brute(const SurfaceSamples& X, const SurfaceSamples& Y) {
  return metrics_detail::chamfer(X, Y, nearest_indices_brute);
}
inline double chamfer_distance(const TriangleMesh& X, const TriangleMesh& Y, int n = kDefaultMetricSamples,
                               std::uint64_t seed = 0) {
  return chamfer_distance(sample_surface(X, n, seed), sample_surface(Y, n, seed));
}

/// Mean absolute cosine between nearest-neighbour normals, both directions, x100.
inline double normal_consistency(const SurfaceSamples& X, const SurfaceSamples& Y) {
  return metrics_detail::normal_consistency(X, Y, nearest_indices);
}
inline double normal_consistency_brute(const SurfaceSamples& X, const SurfaceSamples& Y) {
  return metrics_detail::normal_consistency(X, Y, nearest_indices_brute);
}
inline double normal_consistency(const TriangleMesh& X, const TriangleMesh& Y, int n = kDefaultMetricSamples,
                                 std::uint64_t seed = 0) {
  return normal_consistency(sample_surface(X, n, seed), sample_surface(Y, n, seed));
}

/// Percentage of predicted samples whose nearest ground-truth sample has the same type label.
inline double seg_vertex_accuracy(const SurfaceSamples& pred, const SurfaceSamples& gt) {
  return metrics_detail::seg_vertex(pred, gt, nearest_indices);
}
inline double seg_vertex_accuracy_brute(const SurfaceSamples& pred, const SurfaceSamples& gt) {
  return metrics_detail::seg_vertex(pred, gt, nearest_indices_brute);
}

/// Per-face primitive type labels of a segmentation.
inline std::vector<int> face_type_labels(const std::vector<int>& face_patch, const std::vector<PrimitiveKind>& kinds) {
  std::vector<int> out(face_patch.size());
  for (std::size_t f = 0; f < face_patch.size(); ++f) out[f] = static_cast<int>(kinds[face_patch[f]]);
  return out;
}

inline double seg_vertex_accuracy(const TriangleMesh& pred_mesh, const std::vector<int>& pred_labels,
                                  const TriangleMesh& gt_mesh, const std::vector<int>& gt_labels,
                                  int n = kDefaultMetricSamples, std::uint64_t seed = 0) {
  return seg_vertex_accuracy(sample_surface(pred_mesh, n, seed, pred_labels), sample_surface(gt_mesh, n, seed, gt_labels));
}

/// Percentage of cases whose predicted patch count equals the ground truth.
inline double seg_primitive_accuracy(const std::vector<std::pair<int, int>>& counts) {
  if (counts.empty()) throw Error(ErrorCode::Config, "no cases to score");
  const auto ok = std::count_if(counts.begin(), counts.end(), [](const auto& c) { return c.first == c.second; });
  return 100.0 * static_cast<double>(ok) / static_cast<double>(counts.size());
}

/// Mean per-case hanging-face fraction, x100.
inline double hanging_face_ratio(const std::vector<ValidationReport>& reports) {
  if (reports.empty()) return 0.0;
  double sum = 0;
  for (const auto& r : reports) sum += r.hanging_fraction();
  return 100.0 * sum / static_cast<double>(reports.size());
}

struct CaseMetrics {
  std::string id;
  std::string family;
  double cd = 0;  // raw; tables show x100
  double nc = 0;
  double seg_v = 0;
  int pred_patches = 0;
  int gt_patches = 0;
  int faces = 0;
  int hanging = 0;
  bool ok = true;
  std::string error;
};

struct MetricsReport {
  std::string label;
  double cd = 0;
  double nc = 0;
  double seg_v = 0;
  double seg_p = 0;
  double hf = 0;
  int cases = 0;
  int failures = 0;
  std::vector<CaseMetrics> per_case;
};

/// Aggregates over successful cases; failures are only counted.
inline MetricsReport aggregate(const std::string& label, const std::vector<CaseMetrics>& cases) {
  MetricsReport r;
  r.label = label;
  r.per_case = cases;
  std::vector<std::pair<int, int>> counts;
  double hf = 0;
  for (const auto& c : cases) {
    if (!c.ok) {
      ++r.failures;
      continue;
    }
    ++r.cases;
    r.cd += c.cd;
    r.nc += c.nc;
    r.seg_v += c.seg_v;
    counts.push_back({c.pred_patches, c.gt_patches});
    hf += c.faces > 0 ? double(c.hanging) / double(c.faces) : 0.0;
  }
  if (r.cases > 0) {
    r.cd /= r.cases;
    r.nc /= r.cases;
    r.seg_v /= r.cases;
    r.seg_p = seg_primitive_accuracy(counts);
  }
  r.hf = r.cases > 0 ? 100.0 * hf / r.cases : 0.0;
  return r;
}

inline std::string format_table(const std::vector<MetricsReport>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(18) << "run" << std::right << std::setw(10) << "CDx100" << std::setw(9) << "NC" << std::setw(9)
     << "SEG(V)" << std::setw(9) << "SEG(P)" << std::setw(9) << "HF" << std::setw(7) << "cases" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(18) << r.label << std::right << std::setw(10) << 100 * r.cd << std::setw(9) << r.nc
       << std::setw(9) << r.seg_v << std::setw(9) << r.seg_p << std::setw(9) << r.hf << std::setw(7) << r.cases + r.failures
       << '\n';
  return os.str();
}

}  // namespace primrep
