#include <gtest/gtest.h>

#include <numbers>

#include "primrep/brep.hpp"
#include "primrep/corpus.hpp"
#include "primrep/fit.hpp"
#include "primrep/relate.hpp"
#include "primrep/stitch.hpp"

using namespace primrep;

namespace {

double max_residual(const Curve& c, const Primitive& a, const Primitive& b, int n = 64) {
  double r = 0;
  const auto [t0, t1] = c.natural_range(2.0);
  for (int k = 0; k < n; ++k) {
    const Vec3 q = c.eval(t0 + (t1 - t0) * k / n);
    r = std::max({r, implicit_distance(a, q), implicit_distance(b, q)});
  }
  return r;
}

struct Built {
  corpus::GroundTruthCase gt;
  SegmentedMesh seg;
  TopologicalComplex tc;
  BRepModel model;
};

Built build_exact(const std::string& family, std::uint64_t seed) {
  Built b;
  b.gt = corpus::generate_case(family, seed);
  b.seg = corpus::ground_truth_segmentation(b.gt);
  b.tc = extract_topology(b.seg);
  b.model = reconstruct_brep(b.tc, b.gt.primitives, b.seg);
  return b;
}

}  // namespace

TEST(Intersect, PlanePlaneLine) {
  const auto cs = intersect_surfaces(make_plane(Vec3::UnitZ(), Vec3::Zero()), make_plane(Vec3::UnitX(), Vec3::Zero()));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].kind, CurveKind::Line);
  EXPECT_NEAR(std::abs(cs[0].direction.dot(Vec3::UnitY())), 1.0, 1e-15);
  EXPECT_LT(cs[0].distance(Vec3::Zero()), 1e-15);
}

TEST(Intersect, PlaneCylinderCircle) {
  const auto cs = intersect_surfaces(make_plane(Vec3::UnitZ(), Vec3::Zero()), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 1));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].kind, CurveKind::Circle);
  EXPECT_LT(cs[0].origin.norm(), 1e-15);
  EXPECT_DOUBLE_EQ(cs[0].r1, 1.0);
}

TEST(Intersect, SteinmetzBranches) {
  const Primitive a = make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 1);
  const Primitive b = make_cylinder(Vec3::UnitX(), Vec3::Zero(), 1);
  const auto cs = intersect_surfaces(a, b);
  ASSERT_EQ(cs.size(), 2u);
  int plus = 0, minus = 0;
  for (const auto& c : cs) {
    EXPECT_EQ(c.kind, CurveKind::Trace);
    EXPECT_TRUE(c.closed());
    double rx = 0, dp = 0, dm = 0;
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      const Vec3& q = c.samples[i];
      rx = std::max({rx, implicit_distance(a, q), implicit_distance(b, q)});
      dp = std::max(dp, std::abs(q.x() - q.z()));
      dm = std::max(dm, std::abs(q.x() + q.z()));
      const Vec3& nxt = c.samples[(i + 1) % c.samples.size()];
      EXPECT_LE((nxt - q).norm(), 0.01);
    }
    EXPECT_LE(rx, 1e-6);
    // Each branch lies in one of the planes x = z and x = -z.
    if (dp <= 1e-6) ++plus;
    if (dm <= 1e-6) ++minus;
  }
  EXPECT_EQ(plus, 1);
  EXPECT_EQ(minus, 1);
}

TEST(Intersect, AnalyticResiduals) {
  const Vec3 tilt = Vec3(0.3, -0.2, 1).normalized();
  const std::vector<std::pair<Primitive, Primitive>> pairs{
      {make_plane(Vec3(1, 2, 3).normalized(), Vec3(0.1, 0, 0)), make_plane(Vec3(-1, 0.5, 0.2).normalized(), Vec3(0, 0.2, 0))},
      {make_plane(tilt, Vec3(0, 0, 0.1)), make_cylinder(Vec3::UnitZ(), Vec3(0.1, 0, 0), 0.4)},
      {make_plane(Vec3::UnitX(), Vec3(0.2, 0, 0)), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 0.5)},
      {make_plane(tilt, Vec3(0, 0, -0.2)), make_cone_from_apex(Vec3(0, 0, 0.8), -Vec3::UnitZ(), 0.4, 1.5)},
      {make_plane(Vec3::UnitZ(), Vec3(0, 0, -0.2)), make_cone_from_apex(Vec3(0, 0, 0.8), -Vec3::UnitZ(), 0.4, 1.5)},
      {make_plane(tilt, Vec3(0, 0, 0.1)), make_sphere(Vec3(0.1, 0, 0), 0.6)},
      {make_sphere(Vec3::Zero(), 0.6), make_sphere(Vec3(0.3, 0.2, 0.1), 0.5)},
      {make_cylinder(tilt, Vec3::Zero(), 0.3), make_sphere(tilt * 0.2, 0.5)},
      {make_cone_from_apex(Vec3(0, 0, 0.8), -Vec3::UnitZ(), 0.4, 1.5), make_sphere(Vec3(0, 0, 0.1), 0.5)},
      {make_plane(Vec3::UnitZ(), Vec3(0, 0, 0.1)), make_torus(Vec3::UnitZ(), Vec3::Zero(), 0.6, 0.25)},
      {make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 0.7), make_torus(Vec3::UnitZ(), Vec3::Zero(), 0.6, 0.25)},
  };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [a, b] = pairs[i];
    const auto cs = intersect_surfaces(a, b);
    ASSERT_FALSE(cs.empty()) << i;
    for (const auto& c : cs) {
      EXPECT_NE(c.kind, CurveKind::Trace) << i;
      EXPECT_LE(max_residual(c, a, b), 1e-8) << i << " " << to_string(c.kind);
    }
  }
}

TEST(Intersect, PlaneCylinderRulings) {
  const auto cs = intersect_surfaces(make_plane(Vec3::UnitX(), Vec3(0.3, 0, 0)), make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 0.5));
  ASSERT_EQ(cs.size(), 2u);
  for (const auto& c : cs) {
    EXPECT_EQ(c.kind, CurveKind::Line);
    EXPECT_NEAR(std::abs(c.origin.y()), 0.4, 1e-12);
  }
}

TEST(Intersect, DisjointIsEmpty) {
  EXPECT_TRUE(intersect_surfaces(make_plane(Vec3::UnitZ(), Vec3(0, 0, 1)), make_sphere(Vec3::Zero(), 0.5)).empty());
  EXPECT_TRUE(intersect_surfaces(make_plane(Vec3::UnitZ(), Vec3(0, 0, 1)), make_plane(Vec3::UnitZ(), Vec3::Zero())).empty());
}

TEST(Intersect, NearTangentCoaxialGivesOneCircle) {
  // Fillet torus against the plane it blends into, slightly separated.
  const Primitive torus = make_torus(Vec3::UnitZ(), Vec3(0, 0, 0.1), 0.5, 0.1);
  for (double gap : {0.0, 1e-5, -1e-7}) {
    const auto cs = intersect_surfaces(make_plane(Vec3::UnitZ(), Vec3(0, 0, -gap)), torus);
    // A slight penetration crosses twice, at nearly the same radius.
    ASSERT_EQ(cs.size(), gap >= 0 ? 1u : 2u) << gap;
    for (const auto& c : cs) EXPECT_NEAR(c.r1, 0.5, 1e-3);
  }
}

TEST(Intersect, GeneralTraceResidual) {
  const Primitive a = make_sphere(Vec3::Zero(), 0.7);
  const Primitive b = make_cylinder(Vec3(1, 0.2, 0).normalized(), Vec3(0, 0.3, 0), 0.35);
  const auto cs = intersect_surfaces(a, b);
  ASSERT_FALSE(cs.empty());
  for (const auto& c : cs) {
    ASSERT_EQ(c.kind, CurveKind::Trace);
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      EXPECT_LE(std::max(implicit_distance(a, c.samples[i]), implicit_distance(b, c.samples[i])), 1e-6);
      if (i + 1 < c.samples.size()) EXPECT_LE((c.samples[i + 1] - c.samples[i]).norm(), 0.01);
    }
  }
}

TEST(SelectCurve, Examples) {
  const std::vector<Curve> one{Curve::line(Vec3::Zero(), Vec3::UnitX())};
  EXPECT_EQ(select_curve(one, {Vec3(5, 5, 5), Vec3(6, 5, 5)}), 0);

  const std::vector<Curve> two{Curve::line(Vec3(0, 0.4, 0), Vec3::UnitZ()), Curve::line(Vec3(0, -0.4, 0), Vec3::UnitZ())};
  EXPECT_EQ(select_curve(two, {Vec3(0, -0.4, -0.3), Vec3(0, -0.4, 0.3)}), 1);
  EXPECT_EQ(select_curve(two, {Vec3(0, 0.4, -0.3), Vec3(0, 0.4, 0.3)}), 0);

  // Ties go to the simpler kind, then the lower index.
  const std::vector<Curve> tied{Curve::circle(Vec3::Zero(), Vec3::UnitZ(), 1.0), Curve::line(Vec3(1, 0, 0), Vec3::UnitY()),
                                Curve::line(Vec3(1, 0, 0), Vec3::UnitY())};
  EXPECT_EQ(select_curve(tied, {Vec3(1, 0, 0)}), 1);

  EXPECT_THROW(
      {
        try {
          select_curve({}, {Vec3::Zero()});
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::NoCurves);
          throw;
        }
      },
      Error);
}

TEST(SelectCurve, SteinmetzHuggedBranch) {
  const Primitive a = make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 0.5);
  const Primitive b = make_cylinder(Vec3::UnitX(), Vec3::Zero(), 0.5);
  const auto cs = intersect_surfaces(a, b);
  ASSERT_EQ(cs.size(), 2u);
  // A polyline on the x = z branch, offset by a mesh-scale wobble.
  std::vector<Vec3> poly;
  for (int k = 0; k <= 40; ++k) {
    const double t = -0.4 * std::numbers::pi + 0.8 * std::numbers::pi * k / 40;
    const Vec3 q(0.5 * std::cos(t), 0.5 * std::sin(t), 0.5 * std::cos(t));
    poly.push_back(q + Vec3(0, 0, 0.003 * std::sin(7 * t)));
  }
  const int idx = select_curve(cs, poly);
  EXPECT_LE(std::abs(cs[idx].samples[0].x() - cs[idx].samples[0].z()), 1e-6);
  EXPECT_LE(mean_curve_distance(cs[idx], resample_polyline(poly, 32)), 0.01);
}

TEST(CurveCurve, AnalyticPairs) {
  const auto ll = intersect_curves(Curve::line(Vec3(0, 0, 0), Vec3::UnitX()), Curve::line(Vec3(0.3, -1, 0), Vec3::UnitY()));
  ASSERT_EQ(ll.size(), 1u);
  EXPECT_LT((ll[0].point - Vec3(0.3, 0, 0)).norm(), 1e-15);
  EXPECT_LT(ll[0].gap, 1e-15);

  const Curve circ = Curve::circle(Vec3::Zero(), Vec3::UnitZ(), 0.5);
  const auto lc = intersect_curves(Curve::line(Vec3(0, 0.3, 0), Vec3::UnitX()), circ);
  ASSERT_EQ(lc.size(), 2u);
  for (const auto& h : lc) EXPECT_NEAR(std::abs(h.point.x()), 0.4, 1e-12);

  const auto through = intersect_curves(Curve::line(Vec3(0.5, 0, -1), Vec3::UnitZ()), circ);
  ASSERT_EQ(through.size(), 1u);
  EXPECT_LT(through[0].gap, 1e-15);

  const Curve ell = Curve::ellipse(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.2);
  const auto ce = intersect_curves(circ, ell);
  ASSERT_EQ(ce.size(), 4u);
  int met = 0;
  for (const auto& h : ce) met += h.gap < 1e-12 ? 1 : 0;
  EXPECT_EQ(met, 4);  // two coincident points at (0, +-0.5, 0), each found from both sides
}

TEST(CurveCurve, NumericTrace) {
  const auto cs = intersect_surfaces(make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 0.5), make_cylinder(Vec3::UnitX(), Vec3::Zero(), 0.5));
  const Curve circ = Curve::circle(Vec3::Zero(), Vec3::UnitZ(), 0.5);
  int near = 0;
  for (const auto& h : intersect_curves(cs[0], circ)) near += h.gap <= 1e-4 ? 1 : 0;
  EXPECT_GE(near, 2);
}

TEST(Reconstruct, CubeExactPlanes) {
  corpus::GroundTruthCase gt;
  {
    std::mt19937_64 rng(0);
    auto r = corpus::build_family("box", rng);
    gt = corpus::assemble_case(std::move(r), "box", 0, Eigen::Matrix3d::Identity());
  }
  const auto seg = corpus::ground_truth_segmentation(gt);
  const auto tc = extract_topology(seg);
  const auto model = reconstruct_brep(tc, gt.primitives, seg);
  EXPECT_EQ(model.vertices.size(), 8u);
  EXPECT_EQ(model.edges.size(), 12u);
  EXPECT_EQ(model.faces.size(), 6u);
  EXPECT_TRUE(model.flags.empty());
  for (const auto& e : model.edges) EXPECT_EQ(model.curves[e.curve].kind, CurveKind::Line);
  // Corners at (+-a, +-b, +-c) of the centered box.
  const auto box = bounding_box(gt.mesh.vertices);
  for (const auto& v : model.vertices) {
    EXPECT_LT((v.position.cwiseAbs() - box.max).norm(), 1e-9);
    EXPECT_LT((v.position - tc.vertices[v.topo_vertex].position).norm(), 1e-9);
  }
  const auto rep = validate_watertight(model);
  EXPECT_TRUE(rep.watertight());
  EXPECT_EQ(rep.hanging_count(), 0);
  EXPECT_EQ(rep.suspect_count(), 0);
  EXPECT_EQ(rep.euler, 2);
  EXPECT_LE(rep.max_vertex_residual, 1e-12);
  EXPECT_LE(rep.max_edge_residual, 1e-12);
  EXPECT_EQ(rep.orientation_violations, 0);
}

TEST(Reconstruct, CylCapped) {
  const auto b = build_exact("cyl-capped", 0);
  EXPECT_EQ(b.model.vertices.size(), 0u);
  ASSERT_EQ(b.model.edges.size(), 2u);
  EXPECT_EQ(b.model.faces.size(), 3u);
  for (const auto& e : b.model.edges) {
    EXPECT_TRUE(e.closed);
    EXPECT_EQ(b.model.curves[e.curve].kind, CurveKind::Circle);
  }
  const auto rep = validate_watertight(b.model);
  EXPECT_TRUE(rep.watertight());
  EXPECT_EQ(rep.euler, 2);
  EXPECT_EQ(rep.orientation_violations, 0);
}

TEST(Validate, OpenBoxHangingFraction) {
  auto b = build_exact("box", 0);
  // Remove the face whose plane normal is most aligned with +z in the case frame.
  int top = 0;
  for (int f = 1; f < 6; ++f)
    if (b.model.faces[f].surface.axis.z() > b.model.faces[top].surface.axis.z()) top = f;
  b.model.faces.erase(b.model.faces.begin() + top);
  const auto rep = validate_watertight(b.model);
  EXPECT_EQ(rep.hanging.size(), 5u);
  EXPECT_EQ(rep.hanging_count(), 4);
  EXPECT_DOUBLE_EQ(rep.hanging_fraction(), 0.8);
  EXPECT_FALSE(rep.watertight());
}

TEST(Validate, FailedVertexMarksIncidentFacesSuspect) {
  auto b = build_exact("box", 0);
  b.model.vertices[0].failed = true;
  const auto rep = validate_watertight(b.model);
  // A box corner is shared by three faces.
  EXPECT_EQ(rep.suspect_count(), 3);
  std::set<int> expected(b.tc.vertices[0].patches.begin(), b.tc.vertices[0].patches.end());
  for (int f = 0; f < 6; ++f) EXPECT_EQ(rep.suspect[f] != 0, expected.count(b.model.faces[f].patch) > 0);
}

TEST(Validate, BrokenLoopIsHanging) {
  auto b = build_exact("box", 0);
  // Shift one edge's curve so its ends miss the vertices.
  b.model.curves[b.model.edges[0].curve].origin += Vec3(0.01, 0.01, 0.01);
  const auto rep = validate_watertight(b.model);
  EXPECT_EQ(rep.hanging_count(), 2);
}

class BrepFamily : public ::testing::TestWithParam<std::string> {};

TEST_P(BrepFamily, CountsPreservedWithExactPrimitives) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto b = build_exact(GetParam(), seed);
    EXPECT_TRUE(b.model.flags.empty()) << seed;
    EXPECT_EQ(b.model.vertices.size(), b.tc.vertices.size());
    EXPECT_EQ(b.model.edges.size(), b.tc.edges.size());
    EXPECT_EQ(b.model.faces.size(), b.tc.faces.size());
    const auto rep = validate_watertight(b.model);
    EXPECT_TRUE(rep.watertight()) << seed;
    EXPECT_EQ(rep.euler, b.tc.mesh_euler);
    EXPECT_LE(rep.max_vertex_residual, 1e-6);
    EXPECT_LE(rep.max_edge_residual, 1e-6);
    EXPECT_EQ(rep.orientation_violations, 0) << seed;
    for (const auto& c : b.model.curves)
      if (c.kind != CurveKind::Trace) {
        // Residual against the two surfaces of every edge using the curve.
        for (const auto& e : b.model.edges)
          if (e.valid() && &b.model.curves[e.curve] == &c)
            EXPECT_LE(max_residual(c, b.gt.primitives[e.left], b.gt.primitives[e.right]), 1e-8);
      }

    const auto tess = tessellate(b.model, b.tc, b.seg);
    EXPECT_EQ(tess.triangles.size(), b.gt.mesh.triangles.size());
    EXPECT_LE(max_chord_error(tess, b.model, b.seg), 0.005);
    double moved = 0;
    for (std::size_t v = 0; v < tess.vertices.size(); ++v) moved = std::max(moved, (tess.vertices[v] - b.gt.mesh.vertices[v]).norm());
    EXPECT_LE(moved, 1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(Corpus, BrepFamily, ::testing::ValuesIn(std::vector<std::string>(corpus::kFamilies.begin(), corpus::kFamilies.end())),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(Reconstruct, BoxCylBossNoisyStitched) {
  const auto gt0 = corpus::generate_case("box-cyl-boss", 0);
  const auto gt = corpus::perturb_mesh(gt0, 0.005, 0);
  const auto seg = corpus::ground_truth_segmentation(gt);
  const auto tc = extract_topology(seg);
  std::vector<Primitive> prims;
  for (int p = 0; p < gt.num_patches(); ++p) {
    const auto s = patch_samples(gt.mesh, gt.face_patch, p);
    FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(p);
    prims.push_back(ransac_fit(gt.patch_kind(p), s.points, s.normals, cfg));
  }
  const auto rel = detect_relations(seg, prims);
  const auto st = optimize(prims, rel, seg, tc);
  const auto model = reconstruct_brep(tc, st.prims, seg);
  EXPECT_TRUE(model.flags.empty());
  const auto rep = validate_watertight(model);
  EXPECT_TRUE(rep.watertight());
  EXPECT_LE(rep.max_vertex_residual, 1e-4);
  EXPECT_EQ(model.vertices.size(), tc.vertices.size());
  EXPECT_EQ(model.edges.size(), tc.edges.size());
}

TEST(Intersect, TraceInterpolantStaysOnBothSurfaces) {
  const Primitive a = make_cylinder(Vec3::UnitZ(), Vec3::Zero(), 1);
  const Primitive b = make_cylinder(Vec3(1, 0, 0.2).normalized(), Vec3(0, 0.3, 0), 0.8);
  const auto cs = intersect_surfaces(a, b);
  ASSERT_FALSE(cs.empty());
  for (const auto& c : cs) {
    ASSERT_EQ(c.tangents.size(), c.samples.size());
    // Midpoints between samples are where linear interpolation would be worst.
    double r = 0;
    for (std::size_t i = 0; i + 1 < c.arc.size(); ++i) {
      const Vec3 q = c.eval(0.5 * (c.arc[i] + c.arc[i + 1]));
      r = std::max({r, implicit_distance(a, q), implicit_distance(b, q)});
    }
    EXPECT_LE(r, 1e-6);
    for (int k = 0; k < 50; ++k) {
      const double t = c.trace_length() * k / 50.0;
      EXPECT_LE(c.distance(c.eval(t)), 1e-9);
      EXPECT_GE(c.tangent(t).dot(c.eval(t + 1e-4) - c.eval(t)), 0.0);
    }
  }
}
