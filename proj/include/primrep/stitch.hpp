#pragma once

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "primrep/lbfgs.hpp"
#include "primrep/primitive.hpp"
#include "primrep/relate.hpp"
#include "primrep/segmented.hpp"
#include "primrep/topology.hpp"

namespace primrep {

struct StitchOptions {
  int k = 4;
  int budget = 500;
  bool use_constraints = true;
  bool analytic_gradient = false;
  double penalty_weight = 1.0;
  double fd_step = 1e-6;
  double grad_tol = 1e-8;
  double value_tol = 1e-10;
  int polish_iterations = 50;  // damped Gauss-Newton steps after a stalled line search; 0 disables
};

/// Stitching vertices for one intersect pair (a < b).
struct StitchingSet {
  int a = -1;
  int b = -1;
  std::vector<Vec3> vertices;
  bool short_boundary = false;  // fewer than k distinct candidates were available
};

/// Boundary polylines shared by patches a and b.
inline std::vector<std::vector<Vec3>> shared_boundary(const TopologicalComplex& tc, const TriangleMesh& mesh, int a,
                                                      int b) {
  std::vector<std::vector<Vec3>> out;
  for (int e : edges_between(tc, a, b)) out.push_back(tc.edges[e].points(mesh));
  return out;
}

/// Samples 4k arc-length-uniform boundary vertices between a and b and keeps, in
/// each of k consecutive strata, the one closest to both primitives. Near-ties
/// go to the stratum center.
inline StitchingSet sample_stitching_vertices(const TopologicalComplex& tc, const TriangleMesh& mesh, int a, int b,
                                              const std::vector<Primitive>& prims, int k) {
  StitchingSet set{std::min(a, b), std::max(a, b), {}, false};
  const auto lines = shared_boundary(tc, mesh, a, b);
  std::vector<Vec3> pts;
  std::vector<double> arc;
  double total = 0;
  for (const auto& line : lines) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) total += (line[i] - line[i - 1]).norm();
      // Closed loops repeat their first point; keep one copy.
      if (i + 1 == line.size() && line.size() > 1 && line.back() == line.front()) break;
      pts.push_back(line[i]);
      arc.push_back(total);
    }
  }
  if (pts.empty() || k < 1) {
    set.short_boundary = true;
    return set;
  }
  const int m = 4 * k;
  std::vector<int> cand(m);
  for (int j = 0; j < m; ++j) {
    const double s = (j + 0.5) * total / m;
    cand[j] = static_cast<int>(std::lower_bound(arc.begin(), arc.end(), s) - arc.begin());
    if (cand[j] >= static_cast<int>(pts.size())) cand[j] = static_cast<int>(pts.size()) - 1;
    if (cand[j] > 0 && s - arc[cand[j] - 1] < arc[cand[j]] - s) --cand[j];
  }
  const auto score = [&](int i) {
    return std::max(implicit_distance(prims[set.a], pts[i]), implicit_distance(prims[set.b], pts[i]));
  };
  std::vector<int> chosen;
  for (int s = 0; s < k; ++s) {
    int best = -1;
    double best_score = 0;
    for (int off : {2, 1, 3, 0}) {
      const int c = cand[4 * s + off];
      const double sc = score(c);
      if (best < 0 || sc < best_score - 1e-9) {
        best = c;
        best_score = sc;
      }
    }
    if (std::find(chosen.begin(), chosen.end(), best) == chosen.end()) chosen.push_back(best);
  }
  set.short_boundary = static_cast<int>(chosen.size()) < k;
  for (int i : chosen) set.vertices.push_back(pts[i]);
  return set;
}

/// Packing of all primitive parameters into one vector, with shared axes for
/// parallel groups and line parameters for collinear members.
class ParamLayout {
 public:
  ParamLayout() = default;

  ParamLayout(const std::vector<Primitive>& prims, const RelationshipGraph& rel, const std::vector<double>& areas,
              bool use_constraints)
      : shapes_(prims) {
    const int n = static_cast<int>(prims.size());
    group_.assign(n, -1);
    sign_.assign(n, 1.0);
    line_ref_.assign(n, -1);
    pos_slot_.assign(n, -1);
    scalar_slot_.assign(n, -1);

    // Parallel groups: connected components among axis-bearing primitives.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](int i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    if (use_constraints)
      for (const auto& [a, b] : rel.parallel_pairs())
        if (has_axis(prims[a].kind) && has_axis(prims[b].kind)) parent[find(a)] = find(b);
    std::map<int, int> root_group;
    for (int i = 0; i < n; ++i) {
      if (!has_axis(prims[i].kind)) continue;
      const auto [it, fresh] = root_group.emplace(find(i), static_cast<int>(members_.size()));
      if (fresh) members_.emplace_back();
      group_[i] = it->second;
      members_[it->second].push_back(i);
    }
    const auto bigger = [&](int i, int j) { return areas[i] > areas[j] || (areas[i] == areas[j] && i < j); };
    for (auto& mem : members_) {
      const int ref = *std::min_element(mem.begin(), mem.end(), bigger);
      for (int i : mem) sign_[i] = prims[i].axis.dot(prims[ref].axis) < 0 ? -1.0 : 1.0;
    }

    // Collinear components inside each group; spheres attach through their centers.
    if (use_constraints) {
      std::vector<char> attached(n, 0);
      for (const auto& mem : members_) {
        std::vector<int> pool;
        for (int i : mem)
          if (prims[i].kind != PrimitiveKind::Plane) pool.push_back(i);
        for (int i = 0; i < n; ++i)
          if (prims[i].kind == PrimitiveKind::Sphere && !attached[i]) pool.push_back(i);
        std::vector<int> comp_of(n, -1);
        int ncomp = 0;
        for (int s : pool) {
          if (comp_of[s] >= 0 || prims[s].kind == PrimitiveKind::Sphere) continue;
          std::vector<int> stack{s};
          comp_of[s] = ncomp;
          while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : pool)
              if (comp_of[v] < 0 && rel.get(u, v).collinear &&
                  (prims[v].kind != PrimitiveKind::Sphere || !attached[v])) {
                comp_of[v] = ncomp;
                if (prims[v].kind != PrimitiveKind::Sphere) stack.push_back(v);
              }
          }
          ++ncomp;
        }
        for (int c = 0; c < ncomp; ++c) {
          int ref = -1;
          for (int i : pool)
            if (comp_of[i] == c && prims[i].kind != PrimitiveKind::Sphere && (ref < 0 || bigger(i, ref))) ref = i;
          for (int i : pool)
            if (comp_of[i] == c && i != ref) {
              line_ref_[i] = ref;
              if (prims[i].kind == PrimitiveKind::Sphere) attached[i] = 1;
            }
        }
      }
    }

    // Slot assignment.
    int next = 0;
    group_slot_.resize(members_.size());
    for (std::size_t g = 0; g < members_.size(); ++g) {
      group_slot_[g] = next;
      next += 3;
    }
    for (int i = 0; i < n; ++i) {
      pos_slot_[i] = next;
      next += line_ref_[i] >= 0 ? 1 : 3;
      scalar_slot_[i] = next;
      next += scalar_count(prims[i].kind);
    }
    size_ = next;

    if (use_constraints)
      for (const auto& [a, b] : rel.perpendicular_pairs())
        if (has_axis(prims[a].kind) && has_axis(prims[b].kind)) perps_.emplace_back(a, b);
  }

  int size() const { return size_; }
  int num_primitives() const { return static_cast<int>(shapes_.size()); }
  int group(int i) const { return group_[i]; }
  int line_ref(int i) const { return line_ref_[i]; }
  const std::vector<std::vector<int>>& groups() const { return members_; }
  const std::vector<std::pair<int, int>>& perpendicular_pairs() const { return perps_; }

  static int scalar_count(PrimitiveKind k) {
    switch (k) {
      case PrimitiveKind::Plane: return 0;
      case PrimitiveKind::Torus: return 2;
      default: return 1;
    }
  }

  /// Initial vector: group axes are sign-aligned member averages, line parameters are projections.
  Eigen::VectorXd pack(const std::vector<Primitive>& prims) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(size_);
    for (std::size_t g = 0; g < members_.size(); ++g) {
      Vec3 s = Vec3::Zero();
      for (int i : members_[g]) s += sign_[i] * prims[i].axis;
      x.segment<3>(group_slot_[g]) = s.normalized();
    }
    const int n = num_primitives();
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < n; ++i) {
        const bool on_line = line_ref_[i] >= 0;
        if (on_line != (pass == 1)) continue;
        if (on_line) {
          const int r = line_ref_[i];
          const Vec3 ax = x.segment<3>(group_slot_[group_[r]]);
          x[pos_slot_[i]] = (prims[i].position - x.segment<3>(pos_slot_[r])).dot(ax);
        } else {
          x.segment<3>(pos_slot_[i]) = prims[i].position;
        }
      }
    for (int i = 0; i < n; ++i) {
      const int s = scalar_slot_[i];
      switch (prims[i].kind) {
        case PrimitiveKind::Cylinder:
        case PrimitiveKind::Sphere: x[s] = prims[i].radius; break;
        case PrimitiveKind::Cone: x[s] = prims[i].semi_angle; break;
        case PrimitiveKind::Torus:
          x[s] = prims[i].major_radius;
          x[s + 1] = prims[i].minor_radius;
          break;
        case PrimitiveKind::Plane: break;
      }
    }
    return x;
  }

  template <class T>
  std::vector<BasicPrimitive<T>> unpack(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x) const {
    using V3 = Eigen::Matrix<T, 3, 1>;
    const int n = num_primitives();
    std::vector<V3> axes(members_.size());
    for (std::size_t g = 0; g < members_.size(); ++g) {
      const V3 v = x.template segment<3>(group_slot_[g]);
      axes[g] = v / v.norm();
    }
    std::vector<BasicPrimitive<T>> out(n);
    for (int i = 0; i < n; ++i) {
      BasicPrimitive<T> p = shapes_[i].template cast<T>();
      if (group_[i] >= 0) p.axis = T(sign_[i]) * axes[group_[i]];
      const int s = scalar_slot_[i];
      switch (p.kind) {
        case PrimitiveKind::Cylinder:
        case PrimitiveKind::Sphere: p.radius = x[s]; break;
        case PrimitiveKind::Cone: p.semi_angle = x[s]; break;
        case PrimitiveKind::Torus:
          p.major_radius = x[s];
          p.minor_radius = x[s + 1];
          break;
        case PrimitiveKind::Plane: break;
      }
      out[i] = p;
    }
    for (int i = 0; i < n; ++i)
      if (line_ref_[i] < 0) out[i].position = x.template segment<3>(pos_slot_[i]);
    for (int i = 0; i < n; ++i)
      if (line_ref_[i] >= 0) {
        const int r = line_ref_[i];
        out[i].position = out[r].position + x[pos_slot_[i]] * axes[group_[r]];
      }
    return out;
  }

  std::vector<Primitive> unpack(const Eigen::VectorXd& x) const { return unpack<double>(x); }

 private:
  std::vector<Primitive> shapes_;  // kinds and cone heights
  std::vector<int> group_;
  std::vector<double> sign_;
  std::vector<int> line_ref_;
  std::vector<int> pos_slot_;
  std::vector<int> scalar_slot_;
  std::vector<int> group_slot_;
  std::vector<std::vector<int>> members_;
  std::vector<std::pair<int, int>> perps_;
  int size_ = 0;
};

/// Sum over stitching vertices of the gap between the two projections, plus the
/// weighted perpendicularity penalty.
template <class T>
T stitch_objective(const std::vector<BasicPrimitive<T>>& prims, const std::vector<StitchingSet>& sets,
                   const std::vector<std::pair<int, int>>& perps, double weight = 1.0) {
  using V3 = Eigen::Matrix<T, 3, 1>;
  using std::abs;
  using std::sqrt;
  T f = T(0);
  for (const auto& s : sets)
    for (const auto& v : s.vertices) {
      const V3 q = v.template cast<T>();
      const V3 d = project_point(prims[s.a], q) - project_point(prims[s.b], q);
      f += sqrt(d.squaredNorm() + T(1e-300));
    }
  for (const auto& [c, d] : perps) f += T(weight) * abs(prims[c].axis.dot(prims[d].axis));
  return f;
}

struct StitchResult {
  std::vector<Primitive> prims;
  std::vector<StitchingSet> sets;
  double initial_objective = 0;
  double final_objective = 0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  int polish_steps = 0;
  std::vector<double> history;  // objective at every accepted iterate
};

class StitchProblem {
 public:
  StitchProblem(const std::vector<Primitive>& prims, const RelationshipGraph& rel, const SegmentedMesh& seg,
                const TopologicalComplex& tc, const StitchOptions& opt)
      : opt_(opt) {
    const int n = static_cast<int>(prims.size());
    std::vector<double> areas(n, 0.0);
    for (std::size_t f = 0; f < seg.mesh().triangles.size(); ++f) areas[seg.face_patch[f]] += seg.mesh().face_area(f);
    layout_ = ParamLayout(prims, rel, areas, opt.use_constraints);
    for (const auto& [a, b] : rel.intersect_pairs())
      sets_.push_back(sample_stitching_vertices(tc, seg.mesh(), a, b, prims, opt.k));
    x0_ = layout_.pack(prims);
  }

  const ParamLayout& layout() const { return layout_; }
  const std::vector<StitchingSet>& sets() const { return sets_; }
  const Eigen::VectorXd& initial() const { return x0_; }

  double value(const Eigen::VectorXd& x) const {
    return stitch_objective(layout_.unpack(x), sets_, layout_.perpendicular_pairs(), opt_.penalty_weight);
  }

  Eigen::VectorXd gradient_fd(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd y = x;
    for (int i = 0; i < x.size(); ++i) {
      y[i] = x[i] + opt_.fd_step;
      const double fp = value(y);
      y[i] = x[i] - opt_.fd_step;
      const double fm = value(y);
      y[i] = x[i];
      g[i] = (fp - fm) / (2 * opt_.fd_step);
    }
    return g;
  }

  Eigen::VectorXd gradient_analytic(const Eigen::VectorXd& x) const {
    using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
    const int n = static_cast<int>(x.size());
    Eigen::Matrix<AD, Eigen::Dynamic, 1> xa(n);
    for (int i = 0; i < n; ++i) xa[i] = AD(x[i], n, i);
    const AD f = stitch_objective(layout_.unpack<AD>(xa), sets_, layout_.perpendicular_pairs(), opt_.penalty_weight);
    Eigen::VectorXd g = f.derivatives();
    if (g.size() != n) g = Eigen::VectorXd::Zero(n);
    return g;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    return opt_.analytic_gradient ? gradient_analytic(x) : gradient_fd(x);
  }

  /// Projection differences and weighted axis dots; zero exactly where the objective is.
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    const auto prims = layout_.unpack(x);
    std::vector<double> r;
    for (const auto& s : sets_)
      for (const auto& v : s.vertices) {
        const Vec3 d = project_point(prims[s.a], v) - project_point(prims[s.b], v);
        r.insert(r.end(), {d.x(), d.y(), d.z()});
      }
    for (const auto& [c, d] : layout_.perpendicular_pairs()) r.push_back(opt_.penalty_weight * prims[c].axis.dot(prims[d].axis));
    return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
  }

  Eigen::MatrixXd residual_jacobian(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd r0 = residuals(x);
    Eigen::MatrixXd J(r0.size(), x.size());
    Eigen::VectorXd y = x;
    for (int i = 0; i < x.size(); ++i) {
      y[i] = x[i] + opt_.fd_step;
      const Eigen::VectorXd rp = residuals(y);
      y[i] = x[i] - opt_.fd_step;
      const Eigen::VectorXd rm = residuals(y);
      y[i] = x[i];
      J.col(i) = (rp - rm) / (2 * opt_.fd_step);
    }
    return J;
  }

 private:
  StitchOptions opt_;
  ParamLayout layout_;
  std::vector<StitchingSet> sets_;
  Eigen::VectorXd x0_;
};

/// Cone heights are held fixed while stitching and re-derived from the patch
/// extent along the refined axis afterwards.
inline void update_cone_heights(std::vector<Primitive>& prims, const SegmentedMesh& seg) {
  for (int p = 0; p < static_cast<int>(prims.size()); ++p) {
    if (prims[p].kind != PrimitiveKind::Cone) continue;
    const Vec3 apex = prims[p].apex();
    double h = 0;
    for (int f : seg.patch_faces(p))
      for (int v : seg.mesh().triangles[f]) h = std::max(h, (seg.mesh().vertices[v] - apex).dot(prims[p].axis));
    if (h > 1e-9) prims[p] = make_cone_from_apex(apex, prims[p].axis, prims[p].semi_angle, h);
  }
}

inline StitchResult optimize(const std::vector<Primitive>& prims, const RelationshipGraph& rel,
                             const SegmentedMesh& seg, const TopologicalComplex& tc, const StitchOptions& opt = {}) {
  const StitchProblem problem(prims, rel, seg, tc, opt);
  LbfgsOptions lo;
  lo.max_iterations = opt.budget;
  lo.grad_tol = opt.grad_tol;
  lo.value_tol = opt.value_tol;
  const auto r = lbfgs_minimize([&](const Eigen::VectorXd& x) { return problem.value(x); },
                                [&](const Eigen::VectorXd& x) { return problem.gradient(x); }, problem.initial(), lo);
  Eigen::VectorXd x = r.x;
  double fx = r.value;
  std::vector<double> history = r.history;
  int polish_steps = 0;
  // The summed distances are kinked wherever a gap closes, which can stall the line
  // search short of zero. Damped Gauss-Newton on the smooth residual vector shares the
  // zero set; steps are kept only when they lower the objective itself.
  if (!r.converged && fx > opt.value_tol) {
    double lambda = 1e-3;
    for (int it = 0; it < opt.polish_iterations && fx > opt.value_tol && lambda < 1e12; ++it) {
      const Eigen::VectorXd res = problem.residuals(x);
      const Eigen::MatrixXd J = problem.residual_jacobian(x);
      const Eigen::MatrixXd JtJ = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * res;
      bool accepted = false;
      while (lambda < 1e12) {
        Eigen::MatrixXd A = JtJ;
        A.diagonal() += lambda * (JtJ.diagonal().array() + 1e-12).matrix();
        const Eigen::VectorXd step = A.ldlt().solve(-g);
        const Eigen::VectorXd xn = x + step;
        const double fn = step.allFinite() ? problem.value(xn) : fx;
        if (std::isfinite(fn) && fn < fx) {
          x = xn;
          fx = fn;
          history.push_back(fx);
          lambda = std::max(lambda / 3, 1e-12);
          accepted = true;
          ++polish_steps;
          break;
        }
        lambda *= 4;
      }
      if (!accepted) break;
    }
  }
  StitchResult out;
  out.prims = problem.layout().unpack(x);
  for (auto& p : out.prims) p.axis.normalize();
  update_cone_heights(out.prims, seg);
  out.sets = problem.sets();
  out.initial_objective = r.initial_value;
  out.final_objective = fx;
  out.iterations = r.iterations;
  out.polish_steps = polish_steps;
  out.converged = r.converged || fx <= opt.value_tol;
  out.line_search_failed = r.line_search_failed;
  out.history = std::move(history);
  return out;
}

}  // namespace primrep
