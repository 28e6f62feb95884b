#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "primrep/corpus.hpp"
#include "primrep/metrics.hpp"

using namespace primrep;

namespace {

TriangleMesh square(double z, bool flip = false) {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, z), Vec3(1, 0, z), Vec3(1, 1, z), Vec3(0, 1, z)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  if (flip) m.triangles = {{0, 2, 1}, {0, 3, 2}};
  return m;
}

TriangleMesh uv_sphere(double r, int rings = 24, int sectors = 48) {
  TriangleMesh m;
  for (int i = 0; i <= rings; ++i) {
    const double th = std::numbers::pi * i / rings;
    for (int j = 0; j < sectors; ++j) {
      const double ph = 2 * std::numbers::pi * j / sectors;
      m.vertices.push_back(r * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)));
    }
  }
  for (int i = 0; i < rings; ++i)
    for (int j = 0; j < sectors; ++j) {
      const int a = i * sectors + j, b = i * sectors + (j + 1) % sectors;
      const int c = a + sectors, d = b + sectors;
      if (i > 0) m.triangles.push_back({a, c, b});
      if (i + 1 < rings) m.triangles.push_back({b, c, d});
    }
  return m;
}

corpus::GroundTruthCase upright(const std::string& family, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return corpus::assemble_case(corpus::build_family(family, rng), family, seed, Eigen::Matrix3d::Identity());
}

}  // namespace

TEST(Chamfer, IdenticalIsZero) {
  const auto gt = corpus::generate_case("composite-random", 0);
  EXPECT_EQ(chamfer_distance(gt.mesh, gt.mesh, 2000, 7), 0.0);
  EXPECT_NEAR(normal_consistency(gt.mesh, gt.mesh, 2000, 7), 100.0, 1e-9);
}

TEST(Chamfer, ParallelSquares) {
  for (double d : {0.05, 0.1, 0.3}) EXPECT_NEAR(chamfer_distance(square(0), square(d), 10000, 3), d, 1e-3);
}

TEST(Chamfer, MatchesBruteForceExactly) {
  const auto gt = corpus::generate_case("sphere-cap-on-box", 1);
  const auto other = corpus::generate_case("box", 1);
  for (int n : {1, 17, 100, 200}) {
    const auto X = sample_surface(gt.mesh, n, 11), Y = sample_surface(other.mesh, n, 12);
    EXPECT_EQ(chamfer_distance(X, Y), chamfer_distance_brute(X, Y)) << n;
    EXPECT_EQ(normal_consistency(X, Y), normal_consistency_brute(X, Y)) << n;
  }
}

TEST(Chamfer, Symmetric) {
  const auto X = sample_surface(uv_sphere(1.0), 500, 1), Y = sample_surface(square(0.2), 500, 2);
  EXPECT_DOUBLE_EQ(chamfer_distance(X, Y), chamfer_distance(Y, X));
  EXPECT_DOUBLE_EQ(normal_consistency(X, Y), normal_consistency(Y, X));
}

TEST(Chamfer, MonotoneInOffset) {
  const auto gt = corpus::generate_case("cyl-capped", 0);
  double prev = -1;
  for (double d : {0.0, 0.01, 0.02, 0.05}) {
    TriangleMesh moved = gt.mesh;
    for (auto& v : moved.vertices) v += Vec3(d, 0, 0);
    const double cd = chamfer_distance(gt.mesh, moved, 10000, 5);
    EXPECT_GE(cd, prev) << d;
    prev = cd;
  }
}

TEST(Chamfer, EmptySurfaceThrows) {
  TriangleMesh empty;
  try {
    chamfer_distance(empty, square(0), 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySurface);
  }
}

TEST(NearestGrid, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> lattice(-5, 5);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<Vec3> pts, queries;
  // Lattice points and duplicates force equal distances.
  for (int i = 0; i < 1500; ++i) pts.push_back(0.1 * Vec3(lattice(rng), lattice(rng), lattice(rng)));
  for (int i = 0; i < 500; ++i) pts.push_back(Vec3(u(rng), u(rng), u(rng)));
  for (int i = 0; i < 1000; ++i) queries.push_back(0.05 * Vec3(lattice(rng), lattice(rng), lattice(rng)));
  for (int i = 0; i < 1000; ++i) queries.push_back(Vec3(3 * u(rng), 3 * u(rng), 3 * u(rng)));
  EXPECT_EQ(nearest_indices(queries, pts), nearest_indices_brute(queries, pts));
}

TEST(NormalConsistency, FlippedPlaneIs100) {
  EXPECT_DOUBLE_EQ(normal_consistency(square(0), square(0, true), 1000, 2), 100.0);
}

TEST(NormalConsistency, ScaledSphere) {
  const auto X = sample_surface(uv_sphere(1.0), 1000, 4), Y = sample_surface(uv_sphere(0.9), 1000, 4);
  const double nc = normal_consistency(X, Y);
  EXPECT_EQ(nc, normal_consistency_brute(X, Y));
  EXPECT_NEAR(nc, 100.0, 0.5);
}

TEST(SegVertex, Examples) {
  const auto gt = upright("box", 0);
  const auto labels = face_type_labels(gt.face_patch, std::vector<PrimitiveKind>(6, PrimitiveKind::Plane));
  EXPECT_EQ(seg_vertex_accuracy(gt.mesh, labels, gt.mesh, labels, 10000, 1), 100.0);

  const auto wrong = face_type_labels(gt.face_patch, std::vector<PrimitiveKind>(6, PrimitiveKind::Cylinder));
  EXPECT_EQ(seg_vertex_accuracy(gt.mesh, wrong, gt.mesh, labels, 10000, 1), 0.0);

  // One face relabelled: the expected score is the remaining area share.
  std::vector<PrimitiveKind> one(6, PrimitiveKind::Plane);
  one[5] = PrimitiveKind::Cylinder;
  const auto mixed = face_type_labels(gt.face_patch, one);
  double total = 0, top = 0;
  for (std::size_t f = 0; f < gt.mesh.triangles.size(); ++f) {
    const auto& t = gt.mesh.triangles[f];
    const double a = 0.5 * (gt.mesh.vertices[t[1]] - gt.mesh.vertices[t[0]]).cross(gt.mesh.vertices[t[2]] - gt.mesh.vertices[t[0]]).norm();
    total += a;
    if (gt.face_patch[f] == 5) top += a;
  }
  EXPECT_NEAR(seg_vertex_accuracy(gt.mesh, mixed, gt.mesh, labels, 10000, 1), 100 * (1 - top / total), 1.0);

  const auto P = sample_surface(gt.mesh, 150, 8, mixed), G = sample_surface(gt.mesh, 150, 9, labels);
  EXPECT_EQ(seg_vertex_accuracy(P, G), seg_vertex_accuracy_brute(P, G));
}

TEST(SegVertex, CubeOneFaceWrong) {
  // Unit cube built from two squares per face.
  TriangleMesh cube;
  std::vector<int> patch;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      const int base = static_cast<int>(cube.vertices.size());
      for (int k = 0; k < 4; ++k) {
        Vec3 p;
        p[axis] = side;
        p[(axis + 1) % 3] = (k == 1 || k == 2) ? 1 : 0;
        p[(axis + 2) % 3] = (k >= 2) ? 1 : 0;
        cube.vertices.push_back(p);
      }
      cube.triangles.push_back({base, base + 1, base + 2});
      cube.triangles.push_back({base, base + 2, base + 3});
      patch.push_back(axis * 2 + side);
      patch.push_back(axis * 2 + side);
    }
  std::vector<PrimitiveKind> kinds(6, PrimitiveKind::Plane);
  const auto gt_labels = face_type_labels(patch, kinds);
  kinds[0] = PrimitiveKind::Cylinder;
  const auto pred = face_type_labels(patch, kinds);
  EXPECT_NEAR(seg_vertex_accuracy(cube, pred, cube, gt_labels, 10000, 0), 500.0 / 6.0, 1.0);
}

TEST(SegPrimitive, Examples) {
  EXPECT_EQ(seg_primitive_accuracy({{3, 3}, {8, 8}}), 100.0);
  EXPECT_EQ(seg_primitive_accuracy({{3, 3}, {8, 8}, {6, 7}, {2, 2}}), 75.0);
  EXPECT_THROW(seg_primitive_accuracy({}), Error);
}

TEST(HangingFaces, Ratios) {
  ValidationReport ok;
  ok.hanging.assign(6, 0);
  EXPECT_EQ(hanging_face_ratio({ok, ok}), 0.0);

  ValidationReport open;
  open.hanging = {1, 1, 1, 1, 0};
  EXPECT_DOUBLE_EQ(hanging_face_ratio({open}), 80.0);

  // Ten cases of five faces, one hanging face in one case: mean of per-case fractions.
  ValidationReport five;
  five.hanging.assign(5, 0);
  ValidationReport one = five;
  one.hanging[2] = 1;
  std::vector<ValidationReport> reps(9, five);
  reps.push_back(one);
  EXPECT_NEAR(hanging_face_ratio(reps), 2.0, 1e-12);
}

TEST(Aggregate, SingleCaseEqualsCase) {
  CaseMetrics c;
  c.id = "x";
  c.cd = 0.002;
  c.nc = 99.0;
  c.seg_v = 98.0;
  c.pred_patches = c.gt_patches = 3;
  c.faces = 3;
  c.hanging = 1;
  const auto r = aggregate("default", {c});
  EXPECT_DOUBLE_EQ(r.cd, 0.002);
  EXPECT_DOUBLE_EQ(r.nc, 99.0);
  EXPECT_DOUBLE_EQ(r.seg_v, 98.0);
  EXPECT_DOUBLE_EQ(r.seg_p, 100.0);
  EXPECT_NEAR(r.hf, 100.0 / 3.0, 1e-12);

  CaseMetrics bad;
  bad.ok = false;
  const auto r2 = aggregate("default", {c, bad});
  EXPECT_EQ(r2.cases, 1);
  EXPECT_EQ(r2.failures, 1);
  EXPECT_DOUBLE_EQ(r2.cd, 0.002);
  const std::string table = format_table({r, r2});
  EXPECT_NE(table.find("CDx100"), std::string::npos);
  EXPECT_NE(table.find("0.20"), std::string::npos);
}
