#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "primrep/pipeline.hpp"

using namespace primrep;
namespace pl = primrep::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("primrep_test_" + name);
  fs::remove_all(p);
  return p;
}

pl::PipelineConfig small_config(const fs::path& root) {
  pl::PipelineConfig c;
  c.families = {"box", "cyl-capped"};
  c.seeds = {0};
  c.metric_samples = 2000;
  c.output_root = root.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

bool throws_config(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == ErrorCode::Config;
  }
  return false;
}

}  // namespace

TEST(PipelineConfig, RoundTripsThroughFile) {
  pl::PipelineConfig c;
  c.families = {"prism-n", "torus-ring-on-plane"};
  c.seeds = {4, 9};
  c.sigmas = {0.0, 0.0025};
  c.rig.views = 4;
  c.rig.elevation_deg = 12.5;
  c.fit.budget = 300;
  c.fit.eps_n = 0.123456789012345;
  c.gt_segmentation = true;
  c.stitch.k = 6;
  c.stitch.analytic_gradient = true;
  c.variants = {"no-stitch", "default"};
  c.metric_samples = 777;
  c.metric_seed = 3;
  c.parallelism = 3;
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  io::write_json((dir / "run.json").string(), pl::to_json(c));
  const auto back = pl::load_config((dir / "run.json").string());
  EXPECT_EQ(pl::to_json(back), pl::to_json(c));
  EXPECT_EQ(back.fit.eps_n, c.fit.eps_n);
  EXPECT_EQ(back.rig.elevation_deg, 12.5);
}

TEST(PipelineConfig, PartialFileKeepsDefaults) {
  const auto c = pl::config_from_json(io::json::parse(R"({"seeds": [5], "stitch": {"k": 2}})"));
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{5});
  EXPECT_EQ(c.stitch.k, 2);
  EXPECT_EQ(c.stitch.budget, StitchOptions{}.budget);
  EXPECT_EQ(c.families.size(), corpus::kFamilies.size());
}

TEST(PipelineConfig, RejectsBadInput) {
  EXPECT_TRUE(throws_config([] { pl::config_from_json(io::json::parse(R"({"seedz": [1]})")); }));
  EXPECT_TRUE(throws_config([] { pl::config_from_json(io::json::parse(R"({"rig": {"views": "six"}})")); }));
  EXPECT_TRUE(throws_config([] { pl::load_config("/nonexistent/run.json"); }));
  pl::PipelineConfig c;
  c.variants = {"fancy"};
  EXPECT_TRUE(throws_config([&] { pl::validate(c); }));
  c = {};
  c.sigmas = {-0.1};
  EXPECT_TRUE(throws_config([&] { pl::validate(c); }));
}

TEST(PipelineConfig, EnvironmentOverridesOutputRoot) {
  pl::PipelineConfig c;
  c.output_root = "from_config";
  unsetenv("PRIMREP_OUTPUT_ROOT");
  EXPECT_EQ(pl::resolve_output_root(c), "from_config");
  setenv("PRIMREP_OUTPUT_ROOT", "from_env", 1);
  EXPECT_EQ(pl::resolve_output_root(c), "from_env");
  unsetenv("PRIMREP_OUTPUT_ROOT");
}

TEST(Pipeline, ParallelRunKeepsIndexOrder) {
  const auto rs = pl::run_parallel(23, 4, [](int i) { return pl::StageResult{std::to_string(i), i % 5 != 0, ""}; });
  ASSERT_EQ(rs.size(), 23u);
  for (int i = 0; i < 23; ++i) {
    EXPECT_EQ(rs[i].id, std::to_string(i));
    EXPECT_EQ(rs[i].ok, i % 5 != 0);
  }
}

TEST(Pipeline, GenWritesOneDirectoryPerCaseAndIsRepeatable) {
  unsetenv("PRIMREP_OUTPUT_ROOT");
  const fs::path root = scratch("gen");
  auto c = small_config(root);
  c.families = {"box", "cyl-capped", "prism-n"};
  c.seeds = {0, 1};
  c.parallelism = 2;
  const auto s = pl::cmd_gen(c);
  EXPECT_EQ(s.failures, 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(root / "cases")) {
    ++dirs;
    for (const char* f : {"mesh.ply", "gt_mesh.ply", "labels.json", "gt_topology.json", "maps/view_0.png"})
      EXPECT_TRUE(fs::exists(e.path() / f)) << e.path() << " " << f;
  }
  EXPECT_EQ(dirs, 6);
  const auto manifest = io::read_json((root / "manifest.json").string());
  ASSERT_EQ(manifest.at("cases").size(), 6u);
  for (const auto& e : manifest.at("cases")) EXPECT_EQ(e.at("stages").at("gen"), "ok");

  const auto first = snapshot(root);
  pl::cmd_gen(c);
  EXPECT_EQ(snapshot(root), first);
}

TEST(Pipeline, InvalidFamilyFailsBeforeAnyOutput) {
  const fs::path root = scratch("badfamily");
  auto c = small_config(root);
  c.families = {"box", "dodecahedron"};
  EXPECT_TRUE(throws_config([&] { pl::cmd_gen(c); }));
  EXPECT_FALSE(fs::exists(root));
}

TEST(Pipeline, MissingInputsNameTheAbsentFiles) {
  const fs::path root = scratch("missing");
  auto c = small_config(root);
  c.families = {"box"};
  pl::cmd_gen(c);
  const auto cases = pl::plan_cases(c);
  const std::string dir = pl::case_dir(root.string(), cases[0]);
  fs::remove_all(fs::path(dir) / "maps");
  try {
    pl::reconstruct_one(c, dir, "default");
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("segmented.json"), std::string::npos) << msg;
    EXPECT_NE(msg.find("maps"), std::string::npos) << msg;
  }
  // The stage wrapper reports the case id and stage.
  const auto s = pl::cmd_reconstruct(c);
  ASSERT_EQ(s.failures, 1);
  EXPECT_NE(s.errors[0].find("box-s0-n0"), std::string::npos);
  EXPECT_NE(s.errors[0].find("reconstruct/default"), std::string::npos);
}

TEST(Pipeline, RunContinuesPastCaseFailure) {
  const fs::path root = scratch("continue");
  auto c = small_config(root);
  pl::cmd_gen(c);
  fs::remove(root / "cases" / "box-s0-n0" / "mesh.ply");
  const auto s = pl::cmd_segment(c);
  EXPECT_EQ(s.cases, 2);
  EXPECT_EQ(s.failures, 1);
  EXPECT_TRUE(fs::exists(root / "cases" / "cyl-capped-s0-n0" / "segmented.json"));
  const auto manifest = io::read_json((root / "manifest.json").string());
  EXPECT_NE(manifest["cases"][0]["stages"]["segment"].get<std::string>().find("box-s0-n0"), std::string::npos);
  EXPECT_EQ(manifest["cases"][1]["stages"]["segment"], "ok");
}

TEST(Pipeline, CylCappedReconstructsWatertight) {
  const fs::path root = scratch("cylcapped");
  auto c = small_config(root);
  c.families = {"cyl-capped"};
  pl::cmd_gen(c);
  const auto s = pl::cmd_reconstruct(c);  // segments on demand from the maps
  EXPECT_EQ(s.failures, 0);
  const fs::path dir = root / "cases" / "cyl-capped-s0-n0";
  for (const char* f : {"segmented.json", "relations.json", "topology.json", "default/stitch.json", "default/brep.obj"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto brep = io::read_json((dir / "default" / "brep.json").string());
  EXPECT_TRUE(brep["validation"]["watertight"].get<bool>());
  EXPECT_EQ(brep["validation"]["hanging_faces"], 0);
  EXPECT_EQ(brep["faces"].size(), 3u);
  EXPECT_EQ(brep["edges"].size(), 2u);
  EXPECT_TRUE(brep["flags"].empty());
}

TEST(Pipeline, SingleCaseEvalEqualsCase) {
  const fs::path root = scratch("single");
  auto c = small_config(root);
  c.families = {"box"};
  c.variants = {"default", "no-stitch"};
  const auto s = pl::cmd_all(c);
  EXPECT_EQ(s.failures, 0);
  const auto m = io::read_json((root / "metrics.json").string());
  ASSERT_EQ(m["rows"].size(), 2u);
  for (const auto& row : m["rows"]) {
    ASSERT_EQ(row["per_case"].size(), 1u);
    const auto& pc = row["per_case"][0];
    EXPECT_EQ(row["cd"], pc["cd"]);
    EXPECT_EQ(row["nc"], pc["nc"]);
    EXPECT_EQ(row["seg_v"], pc["seg_v"]);
    EXPECT_EQ(row["hf"], 0.0);
    EXPECT_EQ(row["seg_p"], 100.0);
  }
  const std::string table = slurp(root / "metrics.txt");
  EXPECT_NE(table.find("default"), std::string::npos);
  EXPECT_NE(table.find("no-stitch"), std::string::npos);
}

TEST(Pipeline, StagesAreIdempotent) {
  const fs::path root = scratch("idempotent");
  auto c = small_config(root);
  c.families = {"box-cyl-boss"};
  c.sigmas = {0.005};
  pl::cmd_all(c);
  const auto first = snapshot(root);
  pl::cmd_segment(c);
  pl::cmd_reconstruct(c);
  pl::cmd_eval(c);
  EXPECT_EQ(snapshot(root), first);
}

TEST(Serialize, PrimitivesAndRelationsRoundTrip) {
  const auto gt = corpus::generate_case("composite-random", 3);
  const auto back = io::primitives_from_json(io::json::parse(io::to_json(gt.primitives).dump()));
  ASSERT_EQ(back.size(), gt.primitives.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].kind, gt.primitives[i].kind);
    EXPECT_EQ(back[i].axis, gt.primitives[i].axis);
    EXPECT_EQ(back[i].position, gt.primitives[i].position);
    EXPECT_EQ(back[i].radius, gt.primitives[i].radius);
    EXPECT_EQ(back[i].semi_angle, gt.primitives[i].semi_angle);
    EXPECT_EQ(back[i].height, gt.primitives[i].height);
    EXPECT_EQ(back[i].major_radius, gt.primitives[i].major_radius);
    EXPECT_EQ(back[i].minor_radius, gt.primitives[i].minor_radius);
  }
  const auto rel = corpus::declared_relations(gt);
  EXPECT_EQ(io::to_json(io::relations_from_json(io::to_json(rel))), io::to_json(rel));
  EXPECT_EQ(io::counts_from_json(io::counts_to_json(gt.topology)).edges, gt.topology.edges);
}

TEST(Serialize, ValidationReportRoundTrip) {
  ValidationReport r;
  r.hanging = {0, 1, 0};
  r.suspect = {1, 0, 0};
  r.edge_uses = {2, 2, 1};
  r.euler = 2;
  r.max_vertex_residual = 1.5e-9;
  r.orientation_violations = 1;
  EXPECT_EQ(io::to_json(io::validation_from_json(io::to_json(r))), io::to_json(r));
}
