#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "primrep/corpus.hpp"
#include "primrep/render.hpp"

using namespace primrep;
using namespace primrep::corpus;

namespace {

int count_kind(const GroundTruthCase& gt, PrimitiveKind k) {
  int n = 0;
  for (const auto& p : gt.primitives) n += p.kind == k;
  return n;
}

GroundTruthCase unit_sphere_case() {
  BuildResult r;
  r.prims = {make_sphere(Vec3::Zero(), 1.0)};
  r.sign = {1};
  corpus::detail::revolve(r.builder, {corpus::detail::arc_segment({0, 0}, 1.0, -std::numbers::pi / 2, std::numbers::pi / 2, 0.035, 0)},
                  corpus::detail::uniform_angles(96));
  r.topology = {0, 0, 1};
  return assemble_case(std::move(r), "sphere", 0, Eigen::Matrix3d::Identity());
}

GroundTruthCase upright_case(const std::string& family, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return assemble_case(build_family(family, rng), family, seed, Eigen::Matrix3d::Identity());
}

// Lengths of consecutive feature-line runs down one image column.
std::vector<int> feature_runs(const SemanticMap& m, int col) {
  std::vector<int> runs;
  int run = 0;
  for (int row = 0; row < m.height; ++row) {
    if (m.at(col, row) == Label::FeatureLine) {
      ++run;
    } else if (run > 0) {
      runs.push_back(run);
      run = 0;
    }
  }
  if (run > 0) runs.push_back(run);
  return runs;
}

}  // namespace

class FamilyTest : public ::testing::TestWithParam<std::string> {};

TEST_P(FamilyTest, WatertightExactAndConsistent) {
  for (std::uint64_t seed : {0u, 1u, 2u, 7u}) {
    const GroundTruthCase gt = generate_case(GetParam(), seed);
    SCOPED_TRACE(gt.id);
    HalfEdgeMesh he(gt.mesh);
    EXPECT_TRUE(he.watertight());
    ASSERT_EQ(gt.face_patch.size(), gt.mesh.triangles.size());

    std::vector<int> faces_per_patch(gt.num_patches(), 0);
    for (int p : gt.face_patch) {
      ASSERT_GE(p, 0);
      ASSERT_LT(p, gt.num_patches());
      ++faces_per_patch[p];
    }
    for (int n : faces_per_patch) EXPECT_GT(n, 0);
    for (const auto& prim : gt.primitives) EXPECT_TRUE(is_valid(prim));

    double worst = 0;
    for (std::size_t f = 0; f < gt.mesh.triangles.size(); ++f)
      for (int v : gt.mesh.triangles[f])
        worst = std::max(worst, implicit_distance(gt.primitives[gt.face_patch[f]], gt.mesh.vertices[v]));
    EXPECT_LE(worst, 1e-9);

    const BoundingBox box = bounding_box(gt.mesh.vertices);
    EXPECT_NEAR(box.extent().maxCoeff(), 2.0, 1e-9);
    for (int k = 0; k < 3; ++k) {
      EXPECT_GE(box.min[k], -1 - 1e-9);
      EXPECT_LE(box.max[k], 1 + 1e-9);
    }

    // Outward orientation: the enclosed volume is positive.
    double volume = 0;
    for (const auto& t : gt.mesh.triangles)
      volume += gt.mesh.vertices[t[0]].dot(gt.mesh.vertices[t[1]].cross(gt.mesh.vertices[t[2]])) / 6;
    EXPECT_GT(volume, 0);
    EXPECT_EQ(gt.topology.faces, gt.num_patches());
  }
}

TEST_P(FamilyTest, Deterministic) {
  const GroundTruthCase a = generate_case(GetParam(), 11);
  const GroundTruthCase b = generate_case(GetParam(), 11);
  ASSERT_EQ(a.mesh.vertices.size(), b.mesh.vertices.size());
  for (std::size_t i = 0; i < a.mesh.vertices.size(); ++i) ASSERT_EQ(a.mesh.vertices[i], b.mesh.vertices[i]);
  EXPECT_EQ(a.mesh.triangles, b.mesh.triangles);
  EXPECT_EQ(a.face_patch, b.face_patch);
  const auto rig = CameraRig::ring(6, 0, 64);
  const auto ma = render_semantic_maps(a, rig), mb = render_semantic_maps(b, rig);
  for (std::size_t v = 0; v < ma.size(); ++v) EXPECT_EQ(ma[v].labels, mb[v].labels);
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, FamilyTest, ::testing::Values("box", "box-cyl-boss", "cyl-capped", "cone-capped",
                                                                    "sphere-cap-on-box", "torus-ring-on-plane",
                                                                    "prism-n", "composite-random"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(Corpus, BoxCounts) {
  for (std::uint64_t seed : {0u, 5u, 123u}) {
    const auto gt = generate_case("box", seed);
    EXPECT_EQ(gt.num_patches(), 6);
    EXPECT_EQ(count_kind(gt, PrimitiveKind::Plane), 6);
    EXPECT_EQ(gt.topology, (TopologyCounts{8, 12, 6}));
  }
}

TEST(Corpus, CylCappedCounts) {
  const auto gt = generate_case("cyl-capped", 3);
  EXPECT_EQ(count_kind(gt, PrimitiveKind::Plane), 2);
  EXPECT_EQ(count_kind(gt, PrimitiveKind::Cylinder), 1);
  EXPECT_EQ(gt.topology, (TopologyCounts{0, 2, 3}));
}

TEST(Corpus, BoxCylBossCounts) {
  // Six box planes, the boss cylinder and the boss cap.
  const auto gt = generate_case("box-cyl-boss", 7);
  EXPECT_EQ(count_kind(gt, PrimitiveKind::Plane), 7);
  EXPECT_EQ(count_kind(gt, PrimitiveKind::Cylinder), 1);
  EXPECT_EQ(gt.topology, (TopologyCounts{8, 14, 8}));
}

TEST(Corpus, CompositeDrawsBoundedPrimitiveCount) {
  std::set<int> sizes;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto gt = generate_case("composite-random", seed);
    EXPECT_GE(gt.num_patches(), 3);
    EXPECT_LE(gt.num_patches(), 8);
    sizes.insert(gt.num_patches());
  }
  EXPECT_GT(sizes.size(), 1u);
}

TEST(Corpus, UnknownFamilyRejected) {
  try {
    generate_case("teapot", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

TEST(Perturb, ZeroSigmaIsIdentity) {
  const auto gt = generate_case("box", 1);
  const auto p = perturb_mesh(gt, 0.0, 9);
  for (std::size_t i = 0; i < gt.mesh.vertices.size(); ++i) ASSERT_EQ(gt.mesh.vertices[i], p.mesh.vertices[i]);
}

TEST(Perturb, ClampedNormalDisplacement) {
  const double sigma = 0.005;
  for (const char* fam : {"box", "torus-ring-on-plane", "composite-random"}) {
    const auto gt = generate_case(fam, 2);
    const auto p = perturb_mesh(gt, sigma, 4);
    EXPECT_EQ(p.mesh.triangles, gt.mesh.triangles);
    EXPECT_EQ(p.face_patch, gt.face_patch);
    double max_d = 0, sum = 0, sum2 = 0;
    for (std::size_t i = 0; i < gt.mesh.vertices.size(); ++i) {
      const Vec3 d = p.mesh.vertices[i] - gt.mesh.vertices[i];
      max_d = std::max(max_d, d.norm());
      EXPECT_LE(d.cross(gt.mesh.normals[i]).norm(), 1e-12);
      const double s = d.dot(gt.mesh.normals[i]);
      sum += s;
      sum2 += s * s;
    }
    const double n = static_cast<double>(gt.mesh.vertices.size());
    EXPECT_LE(max_d, 5 * sigma + 1e-15);
    EXPECT_NEAR(sum / n, 0.0, 4 * sigma / std::sqrt(n));
    EXPECT_NEAR(std::sqrt(sum2 / n), sigma, 0.1 * sigma);
    const auto again = perturb_mesh(gt, sigma, 4);
    for (std::size_t i = 0; i < gt.mesh.vertices.size(); ++i) ASSERT_EQ(again.mesh.vertices[i], p.mesh.vertices[i]);
  }
}

TEST(Render, DefaultRig) {
  const auto rig = CameraRig::ring();
  ASSERT_EQ(rig.views.size(), 6u);
  EXPECT_EQ(rig.width, 256);
  EXPECT_EQ(rig.height, 256);
  for (const auto& c : rig.views) {
    EXPECT_NEAR(c.direction.norm(), 1.0, 1e-15);
    EXPECT_NEAR(c.direction.z(), 0.0, 1e-15);
  }
  EXPECT_NEAR(rig.views[0].direction.dot(rig.views[1].direction), 0.5, 1e-12);
}

TEST(Render, UnitSphereFrontView) {
  const auto gt = unit_sphere_case();
  ASSERT_TRUE(HalfEdgeMesh(gt.mesh).watertight());
  const auto maps = render_semantic_maps(gt, CameraRig::ring(1));
  const auto& m = maps[0];
  int covered = 0;
  for (int row = 0; row < m.height; ++row)
    for (int col = 0; col < m.width; ++col) {
      const Label l = m.at(col, row);
      if (l == Label::Background) continue;
      ++covered;
      EXPECT_TRUE(l == Label::Sphere || l == Label::FeatureLine);
      // Feature pixels only occur on the silhouette, never inside the disk.
      if (l == Label::FeatureLine) {
        bool near_background = false;
        for (int dr = -2; dr <= 2; ++dr)
          for (int dc = -2; dc <= 2; ++dc) {
            const int r = row + dr, c = col + dc;
            if (r < 0 || c < 0 || r >= m.height || c >= m.width || m.patch_ids[r * m.width + c] < 0)
              near_background = true;
          }
        EXPECT_TRUE(near_background);
      }
    }
  EXPECT_GT(covered, 0);
  EXPECT_EQ(m.at(128, 128), Label::Sphere);
}

TEST(Render, CubeFrontView) {
  const auto gt = upright_case("box", 3);
  const auto maps = render_semantic_maps(gt, CameraRig::ring(1));
  const auto& m = maps[0];
  std::set<int> interior_patches;
  int feature = 0;
  for (int row = 0; row < m.height; ++row)
    for (int col = 0; col < m.width; ++col) {
      const int id = m.patch_ids[row * m.width + col];
      if (m.at(col, row) == Label::FeatureLine) ++feature;
      else if (id >= 0) interior_patches.insert(id);
    }
  ASSERT_EQ(interior_patches.size(), 1u);
  // The +x face is patch 1 and the camera looks down -x.
  EXPECT_EQ(*interior_patches.begin(), 1);
  EXPECT_EQ(m.at(128, 128), Label::Plane);
  EXPECT_GT(feature, 0);
  for (int run : feature_runs(m, 128)) EXPECT_EQ(run, 3);
}

TEST(Render, CylCappedSideView) {
  const auto gt = upright_case("cyl-capped", 5);
  const auto maps = render_semantic_maps(gt, CameraRig::ring(1));
  const auto& m = maps[0];
  EXPECT_EQ(m.at(128, 128), Label::Cylinder);
  const auto runs = feature_runs(m, 128);
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0], 3);
  EXPECT_EQ(runs[1], 3);
  int cylinder_rows = 0;
  for (int row = 0; row < m.height; ++row) cylinder_rows += m.at(128, row) == Label::Cylinder;
  EXPECT_GT(cylinder_rows, 100);
}

TEST(Render, LabelsMatchBackProjection) {
  for (const char* fam : {"box-cyl-boss", "composite-random", "torus-ring-on-plane"}) {
    const auto gt = generate_case(fam, 1);
    const CameraRig rig = CameraRig::ring(6, 0, 128);
    const auto maps = render_semantic_maps(gt, rig);
    const MeshBvh bvh(gt.mesh);
    for (int v = 0; v < 6; ++v) {
      int agree = 0, total = 0;
      for (int row = 0; row < rig.height; ++row)
        for (int col = 0; col < rig.width; ++col) {
          const Label l = maps[v].at(col, row);
          if (l == Label::FeatureLine) continue;
          ++total;
          const auto hit = bvh.first_hit(rig.pixel_ray(v, col, row));
          const Label expect = hit ? label_of(gt.patch_kind(gt.face_patch[hit->face])) : Label::Background;
          agree += expect == l;
        }
      EXPECT_GE(agree, 0.99 * total);
    }
  }
}

TEST(Render, HorizontalViewsSeeEveryPatch) {
  for (const auto& fam : kFamilies) {
    const auto gt = generate_case(std::string(fam), 0);
    const auto maps = render_semantic_maps(gt, CameraRig::ring());
    std::map<int, int> pixels;
    for (const auto& m : maps)
      for (std::size_t i = 0; i < m.labels.size(); ++i)
        if (m.patch_ids[i] >= 0 && m.labels[i] != Label::FeatureLine) ++pixels[m.patch_ids[i]];
    for (int p = 0; p < gt.num_patches(); ++p) EXPECT_GT(pixels[p], 16) << gt.id << " patch " << p;
  }
}

TEST(Render, PngRoundTrip) {
  const auto gt = generate_case("cone-capped", 0);
  const auto maps = render_semantic_maps(gt, CameraRig::ring(2, 0, 64));
  const auto path = std::filesystem::temp_directory_path() / "primrep_label_roundtrip.png";
  io::write_label_png(path.string(), maps[1]);
  const auto back = io::read_label_png(path.string());
  EXPECT_EQ(back.width, 64);
  EXPECT_EQ(back.height, 64);
  EXPECT_EQ(back.labels, maps[1].labels);
  std::filesystem::remove(path);
}
