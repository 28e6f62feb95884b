#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "primrep/brep.hpp"
#include "primrep/corpus.hpp"
#include "primrep/fit.hpp"
#include "primrep/mesh_io.hpp"
#include "primrep/metrics.hpp"
#include "primrep/relate.hpp"
#include "primrep/render.hpp"
#include "primrep/segment.hpp"
#include "primrep/serialize.hpp"
#include "primrep/stitch.hpp"
#include "primrep/topology.hpp"

namespace primrep::pipeline {

namespace fs = std::filesystem;
using io::json;

inline const std::vector<std::string> kVariants{"default", "no-stitch", "no-constraints"};

struct RigConfig {
  int views = 6;
  double elevation_deg = 0.0;
  int resolution = 256;
  double half_extent = 1.5;

  CameraRig make() const {
    return CameraRig::ring(views, elevation_deg * std::numbers::pi / 180.0, resolution, half_extent);
  }
};

struct PipelineConfig {
  std::vector<std::string> families{corpus::kFamilies.begin(), corpus::kFamilies.end()};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> sigmas{0.0};
  RigConfig rig;
  FitConfig fit;
  double same_view_merge = 0.9;
  bool gt_segmentation = false;  // fit on the ground-truth partition instead of the label maps
  StitchOptions stitch;
  std::vector<std::string> variants{"default"};
  int metric_samples = kDefaultMetricSamples;
  std::uint64_t metric_seed = 0;
  std::string output_root = "primrep_out";
  int parallelism = 1;
};

inline void validate(const PipelineConfig& c) {
  const auto bad = [](const std::string& m) { throw Error(ErrorCode::Config, m); };
  if (c.families.empty()) bad("no families selected");
  for (const auto& f : c.families)
    if (!corpus::is_family(f)) bad("unknown case family '" + f + "'");
  if (c.seeds.empty()) bad("no seeds selected");
  if (c.sigmas.empty()) bad("no noise levels selected");
  for (double s : c.sigmas)
    if (!(s >= 0)) bad("noise sigma must be non-negative");
  if (c.variants.empty()) bad("no variants selected");
  for (const auto& v : c.variants)
    if (std::find(kVariants.begin(), kVariants.end(), v) == kVariants.end()) bad("unknown variant '" + v + "'");
  if (c.rig.views < 1 || c.rig.resolution < 8 || !(c.rig.half_extent > 0)) bad("invalid camera rig");
  if (c.fit.budget < 1 || !(c.fit.eps_d > 0)) bad("invalid fit settings");
  if (c.stitch.k < 1 || c.stitch.budget < 1 || c.stitch.polish_iterations < 0) bad("invalid stitch settings");
  if (c.metric_samples < 1) bad("metric sample count must be positive");
  if (c.parallelism < 1) bad("parallelism must be at least 1");
  if (c.output_root.empty()) bad("output root is empty");
}

inline json to_json(const PipelineConfig& c) {
  json j;
  j["families"] = c.families;
  j["seeds"] = c.seeds;
  j["sigmas"] = c.sigmas;
  j["rig"] = {{"views", c.rig.views},
              {"elevation_deg", c.rig.elevation_deg},
              {"resolution", c.rig.resolution},
              {"half_extent", c.rig.half_extent}};
  j["fit"] = {{"budget", c.fit.budget},         {"eps_d", c.fit.eps_d},
              {"eps_n", c.fit.eps_n},           {"gn_steps", c.fit.gn_steps},
              {"seed", c.fit.seed},             {"max_score_points", c.fit.max_score_points},
              {"min_inlier_ratio", c.fit.min_inlier_ratio}};
  j["segment"] = {{"same_view_merge", c.same_view_merge}, {"ground_truth", c.gt_segmentation}};
  j["stitch"] = {{"k", c.stitch.k},
                 {"budget", c.stitch.budget},
                 {"penalty_weight", c.stitch.penalty_weight},
                 {"analytic_gradient", c.stitch.analytic_gradient},
                 {"fd_step", c.stitch.fd_step},
                 {"grad_tol", c.stitch.grad_tol},
                 {"value_tol", c.stitch.value_tol},
                 {"polish_iterations", c.stitch.polish_iterations}};
  j["variants"] = c.variants;
  j["metrics"] = {{"samples", c.metric_samples}, {"seed", c.metric_seed}};
  j["output_root"] = c.output_root;
  j["parallelism"] = c.parallelism;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  const auto check_keys = [](const json& o, std::initializer_list<const char*> keys, const std::string& where) {
    if (!o.is_object()) throw Error(ErrorCode::Config, where + " must be an object");
    for (const auto& [k, v] : o.items())
      if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
        throw Error(ErrorCode::Config, "unknown key '" + k + "' in " + where);
  };
  try {
    check_keys(j, {"families", "seeds", "sigmas", "rig", "fit", "segment", "stitch", "variants", "metrics", "output_root",
                   "parallelism"},
               "config");
    if (j.contains("families")) c.families = j["families"].get<std::vector<std::string>>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("sigmas")) c.sigmas = j["sigmas"].get<std::vector<double>>();
    if (j.contains("rig")) {
      const auto& r = j["rig"];
      check_keys(r, {"views", "elevation_deg", "resolution", "half_extent"}, "rig");
      c.rig.views = r.value("views", c.rig.views);
      c.rig.elevation_deg = r.value("elevation_deg", c.rig.elevation_deg);
      c.rig.resolution = r.value("resolution", c.rig.resolution);
      c.rig.half_extent = r.value("half_extent", c.rig.half_extent);
    }
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      check_keys(f, {"budget", "eps_d", "eps_n", "gn_steps", "seed", "max_score_points", "min_inlier_ratio"}, "fit");
      c.fit.budget = f.value("budget", c.fit.budget);
      c.fit.eps_d = f.value("eps_d", c.fit.eps_d);
      c.fit.eps_n = f.value("eps_n", c.fit.eps_n);
      c.fit.gn_steps = f.value("gn_steps", c.fit.gn_steps);
      c.fit.seed = f.value("seed", c.fit.seed);
      c.fit.max_score_points = f.value("max_score_points", c.fit.max_score_points);
      c.fit.min_inlier_ratio = f.value("min_inlier_ratio", c.fit.min_inlier_ratio);
    }
    if (j.contains("segment")) {
      const auto& s = j["segment"];
      check_keys(s, {"same_view_merge", "ground_truth"}, "segment");
      c.same_view_merge = s.value("same_view_merge", c.same_view_merge);
      c.gt_segmentation = s.value("ground_truth", c.gt_segmentation);
    }
    if (j.contains("stitch")) {
      const auto& s = j["stitch"];
      check_keys(s, {"k", "budget", "penalty_weight", "analytic_gradient", "fd_step", "grad_tol", "value_tol", "polish_iterations"},
                 "stitch");
      c.stitch.k = s.value("k", c.stitch.k);
      c.stitch.budget = s.value("budget", c.stitch.budget);
      c.stitch.penalty_weight = s.value("penalty_weight", c.stitch.penalty_weight);
      c.stitch.analytic_gradient = s.value("analytic_gradient", c.stitch.analytic_gradient);
      c.stitch.fd_step = s.value("fd_step", c.stitch.fd_step);
      c.stitch.grad_tol = s.value("grad_tol", c.stitch.grad_tol);
      c.stitch.value_tol = s.value("value_tol", c.stitch.value_tol);
      c.stitch.polish_iterations = s.value("polish_iterations", c.stitch.polish_iterations);
    }
    if (j.contains("variants")) c.variants = j["variants"].get<std::vector<std::string>>();
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      check_keys(m, {"samples", "seed"}, "metrics");
      c.metric_samples = m.value("samples", c.metric_samples);
      c.metric_seed = m.value("seed", c.metric_seed);
    }
    c.output_root = j.value("output_root", c.output_root);
    c.parallelism = j.value("parallelism", c.parallelism);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed config: ") + e.what());
  }
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  try {
    return config_from_json(io::read_json(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw Error(ErrorCode::Config, e.what());
    throw;
  }
}

/// Output root after the environment override.
inline std::string resolve_output_root(const PipelineConfig& c) {
  if (const char* env = std::getenv("PRIMREP_OUTPUT_ROOT"); env && *env) return env;
  return c.output_root;
}

struct CaseEntry {
  std::string id;
  std::string family;
  std::uint64_t seed = 0;
  double sigma = 0;
  std::string dir;  // relative to the output root
};

inline std::string sigma_tag(double sigma) {
  std::ostringstream os;
  os << sigma;
  return os.str();
}

inline std::vector<CaseEntry> plan_cases(const PipelineConfig& c) {
  std::vector<CaseEntry> out;
  for (const auto& f : c.families)
    for (auto s : c.seeds)
      for (double sigma : c.sigmas) {
        CaseEntry e;
        e.family = f;
        e.seed = s;
        e.sigma = sigma;
        e.id = f + "-s" + std::to_string(s) + "-n" + sigma_tag(sigma);
        e.dir = "cases/" + e.id;
        out.push_back(e);
      }
  return out;
}

/// Per-stage outcome of one case.
struct StageResult {
  std::string id;
  bool ok = true;
  std::string error;
};

/// Runs fn over [0, n) with the given number of workers; results keep index order.
inline std::vector<StageResult> run_parallel(int n, int workers, const std::function<StageResult(int)>& fn) {
  std::vector<StageResult> out(n);
  std::atomic<int> next{0};
  const auto work = [&] {
    for (int i = next++; i < n; i = next++) out[i] = fn(i);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(workers, n); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return out;
}

inline StageResult guarded(const std::string& id, const std::string& stage, const std::function<void()>& fn) {
  StageResult r{id, true, {}};
  try {
    fn();
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = "case " + id + ", stage " + stage + ": " + e.what();
  }
  return r;
}

/// Manifest: case list plus the latest outcome of every stage.
class Manifest {
 public:
  explicit Manifest(std::string root) : root_(std::move(root)) {}

  std::string path() const { return (fs::path(root_) / "manifest.json").string(); }
  bool exists() const { return fs::exists(path()); }

  void load() { data_ = io::read_json(path()); }

  void create(const PipelineConfig& cfg, const std::vector<CaseEntry>& cases) {
    data_ = json::object();
    data_["config"] = to_json(cfg);
    data_["config"].erase("output_root");  // the manifest's own location; kept out so copies compare equal
    json list = json::array();
    for (const auto& c : cases)
      list.push_back({{"id", c.id}, {"family", c.family}, {"seed", c.seed}, {"sigma", c.sigma}, {"dir", c.dir},
                      {"stages", json::object()}});
    data_["cases"] = list;
  }

  std::vector<CaseEntry> cases() const {
    std::vector<CaseEntry> out;
    for (const auto& c : data_.at("cases"))
      out.push_back({c.at("id").get<std::string>(), c.at("family").get<std::string>(), c.at("seed").get<std::uint64_t>(),
                     c.at("sigma").get<double>(), c.at("dir").get<std::string>()});
    return out;
  }

  bool stage_ok(int i, const std::string& stage) const {
    const auto& s = data_.at("cases").at(i).at("stages");
    return s.contains(stage) && s.at(stage) == "ok";
  }

  void record(const std::string& stage, const std::vector<StageResult>& results) {
    auto& list = data_.at("cases");
    for (std::size_t i = 0; i < results.size(); ++i) list[i]["stages"][stage] = results[i].ok ? "ok" : results[i].error;
  }

  void save() const { io::write_json(path(), data_); }

 private:
  std::string root_;
  json data_;
};

inline std::string case_dir(const std::string& root, const CaseEntry& c) { return (fs::path(root) / c.dir).string(); }

/// Writes one corpus case: meshes, labels, label maps and topology counts.
inline void generate_one(const PipelineConfig& cfg, const CaseEntry& e, const std::string& dir) {
  const auto clean = corpus::generate_case(e.family, e.seed);
  const auto noisy = corpus::perturb_mesh(clean, e.sigma, e.seed);
  fs::create_directories(fs::path(dir) / "maps");
  io::write_ply((fs::path(dir) / "mesh.ply").string(), noisy.mesh);
  io::write_ply((fs::path(dir) / "gt_mesh.ply").string(), clean.mesh);
  io::write_json((fs::path(dir) / "labels.json").string(), io::labels_to_json(noisy));
  io::write_json((fs::path(dir) / "gt_topology.json").string(), io::counts_to_json(clean.topology));
  const auto maps = render_semantic_maps(noisy, cfg.rig.make());
  for (std::size_t v = 0; v < maps.size(); ++v)
    io::write_label_png((fs::path(dir) / "maps" / ("view_" + std::to_string(v) + ".png")).string(), maps[v]);
}

struct CaseInputs {
  TriangleMesh mesh;
  std::vector<int> gt_face_patch;
  std::vector<PrimitiveKind> gt_kinds;
};

inline CaseInputs read_inputs(const std::string& dir) {
  CaseInputs in;
  in.mesh = io::read_ply((fs::path(dir) / "mesh.ply").string());
  const auto labels = io::read_json((fs::path(dir) / "labels.json").string());
  in.gt_face_patch = labels.at("face_patch").get<std::vector<int>>();
  in.gt_kinds = io::kinds_from_json(labels.at("patch_kinds"));
  return in;
}

inline std::vector<SemanticMap> read_maps(const std::string& dir, int views) {
  std::vector<SemanticMap> maps;
  for (int v = 0; v < views; ++v) {
    const fs::path p = fs::path(dir) / "maps" / ("view_" + std::to_string(v) + ".png");
    if (!fs::exists(p)) throw Error(ErrorCode::Io, "missing input " + p.string());
    maps.push_back(io::read_label_png(p.string()));
  }
  return maps;
}

inline std::vector<Primitive> fit_patches(const SegmentedMesh& seg, const FitConfig& fit) {
  std::vector<Primitive> prims;
  for (int p = 0; p < seg.num_patches(); ++p) {
    const auto s = patch_samples(seg.mesh(), seg.face_patch, p);
    FitConfig c = fit;
    c.seed = fit.seed + static_cast<std::uint64_t>(p);
    prims.push_back(ransac_fit(seg.patch_kind[p], s.points, s.normals, c));
  }
  return prims;
}

/// Segmentation and fitting of one case; writes segmented.json.
inline void segment_one(const PipelineConfig& cfg, const std::string& dir) {
  const auto in = read_inputs(dir);
  SegmentedMesh seg;
  if (cfg.gt_segmentation) {
    seg = make_segmented(in.mesh, in.gt_face_patch, in.gt_kinds);
  } else {
    SegmentConfig sc;
    sc.fit = cfg.fit;
    sc.same_view_merge = cfg.same_view_merge;
    seg = segment_mesh(in.mesh, read_maps(dir, cfg.rig.views), cfg.rig.make(), sc);
  }
  const auto prims = fit_patches(seg, cfg.fit);
  io::write_json((fs::path(dir) / "segmented.json").string(), io::segmented_to_json(seg, prims));
}

inline IntersectOptions intersect_region(const TriangleMesh& mesh) {
  IntersectOptions o;
  const auto box = bounding_box(mesh.vertices);
  o.lo = box.min - Vec3::Constant(0.25);
  o.hi = box.max + Vec3::Constant(0.25);
  return o;
}

struct Reconstruction {
  SegmentedMesh seg;
  TopologicalComplex tc;
  RelationshipGraph rel;
  std::vector<Primitive> fitted;
  std::vector<Primitive> prims;  // after stitching
  std::optional<StitchResult> stitch;
  BRepModel model;
  ValidationReport report;
  TriangleMesh tessellation;
};

/// In-memory reconstruction from a segmentation and fitted primitives.
inline Reconstruction reconstruct(SegmentedMesh seg, std::vector<Primitive> fitted, const std::string& variant,
                                  const StitchOptions& stitch_opt) {
  Reconstruction r;
  r.seg = std::move(seg);
  r.fitted = std::move(fitted);
  r.rel = detect_relations(r.seg, r.fitted);
  r.tc = extract_topology(r.seg);
  r.prims = r.fitted;
  if (variant != "no-stitch") {
    StitchOptions so = stitch_opt;
    so.use_constraints = variant != "no-constraints";
    r.stitch = optimize(r.fitted, r.rel, r.seg, r.tc, so);
    r.prims = r.stitch->prims;
  }
  BrepOptions bo;
  bo.intersect = intersect_region(r.seg.mesh());
  r.model = reconstruct_brep(r.tc, r.prims, r.seg, bo);
  r.report = validate_watertight(r.model);
  r.tessellation = tessellate(r.model, r.tc, r.seg);
  return r;
}

/// Reconstruction stage of one case and variant; runs segmentation first when only
/// the label maps are present.
inline void reconstruct_one(const PipelineConfig& cfg, const std::string& dir, const std::string& variant) {
  const fs::path seg_path = fs::path(dir) / "segmented.json";
  if (!fs::exists(seg_path)) {
    if (!cfg.gt_segmentation && !fs::exists(fs::path(dir) / "maps" / "view_0.png"))
      throw Error(ErrorCode::Io, "missing inputs: neither segmented.json nor maps/view_0.png in " + dir);
    segment_one(cfg, dir);
  }
  const TriangleMesh mesh = io::read_ply((fs::path(dir) / "mesh.ply").string());
  const auto sj = io::read_json(seg_path.string());
  auto seg = make_segmented(mesh, sj.at("face_patch").get<std::vector<int>>(), io::kinds_from_json(sj.at("patch_kinds")));
  auto fitted = io::primitives_from_json(sj.at("primitives"));
  if (static_cast<int>(fitted.size()) != seg.num_patches())
    throw Error(ErrorCode::Io, "segmented.json has " + std::to_string(fitted.size()) + " primitives for " +
                                   std::to_string(seg.num_patches()) + " patches");
  const auto r = reconstruct(std::move(seg), std::move(fitted), variant, cfg.stitch);

  io::write_json((fs::path(dir) / "relations.json").string(), io::to_json(r.rel));
  io::write_json((fs::path(dir) / "topology.json").string(), io::to_json(r.tc));
  const fs::path out = fs::path(dir) / variant;
  fs::create_directories(out);
  json st{{"enabled", r.stitch.has_value()}, {"primitives", io::to_json(r.prims)}};
  if (r.stitch) {
    st["initial_objective"] = r.stitch->initial_objective;
    st["final_objective"] = r.stitch->final_objective;
    st["iterations"] = r.stitch->iterations;
    st["polish_steps"] = r.stitch->polish_steps;
    st["line_search_failed"] = r.stitch->line_search_failed;
    st["converged"] = r.stitch->converged;
  }
  io::write_json((out / "stitch.json").string(), st);
  io::write_json((out / "brep.json").string(), io::brep_to_json(r.model, r.report));
  io::write_obj((out / "brep.obj").string(), r.tessellation);
}

/// Metrics of one case and variant from the files written by earlier stages.
inline CaseMetrics evaluate_one(const PipelineConfig& cfg, const CaseEntry& e, const std::string& dir,
                                const std::string& variant) {
  CaseMetrics m;
  m.id = e.id;
  m.family = e.family;
  const fs::path d(dir);
  const TriangleMesh gt_mesh = io::read_ply((d / "gt_mesh.ply").string());
  const TriangleMesh mesh = io::read_ply((d / "mesh.ply").string());
  const auto labels = io::read_json((d / "labels.json").string());
  const auto seg = io::read_json((d / "segmented.json").string());
  const auto brep = io::read_json((d / variant / "brep.json").string());
  const TriangleMesh tess = io::read_obj((d / variant / "brep.obj").string()).mesh;

  const auto gt_kinds = io::kinds_from_json(labels.at("patch_kinds"));
  const auto pred_kinds = io::kinds_from_json(seg.at("patch_kinds"));
  const auto gt_labels = face_type_labels(labels.at("face_patch").get<std::vector<int>>(), gt_kinds);
  const auto pred_labels = face_type_labels(seg.at("face_patch").get<std::vector<int>>(), pred_kinds);

  const auto X = sample_surface(tess, cfg.metric_samples, cfg.metric_seed);
  const auto Y = sample_surface(gt_mesh, cfg.metric_samples, cfg.metric_seed);
  m.cd = chamfer_distance(X, Y);
  m.nc = normal_consistency(X, Y);
  m.seg_v = seg_vertex_accuracy(sample_surface(mesh, cfg.metric_samples, cfg.metric_seed, pred_labels),
                                sample_surface(gt_mesh, cfg.metric_samples, cfg.metric_seed, gt_labels));
  m.pred_patches = static_cast<int>(pred_kinds.size());
  m.gt_patches = static_cast<int>(gt_kinds.size());
  const auto report = io::validation_from_json(brep.at("validation"));
  m.faces = static_cast<int>(report.hanging.size());
  m.hanging = report.hanging_count();
  return m;
}

struct RunSummary {
  int cases = 0;
  int failures = 0;
  std::vector<std::string> errors;
};

inline RunSummary summarize(const std::vector<StageResult>& rs) {
  RunSummary s;
  s.cases = static_cast<int>(rs.size());
  for (const auto& r : rs)
    if (!r.ok) {
      ++s.failures;
      s.errors.push_back(r.error);
    }
  return s;
}

inline RunSummary cmd_gen(const PipelineConfig& cfg) {
  validate(cfg);
  const std::string root = resolve_output_root(cfg);
  fs::create_directories(root);
  const auto cases = plan_cases(cfg);
  Manifest man(root);
  man.create(cfg, cases);
  const auto rs = run_parallel(static_cast<int>(cases.size()), cfg.parallelism, [&](int i) {
    return guarded(cases[i].id, "gen", [&] { generate_one(cfg, cases[i], case_dir(root, cases[i])); });
  });
  man.record("gen", rs);
  man.save();
  return summarize(rs);
}

inline Manifest open_manifest(const std::string& root) {
  Manifest man(root);
  if (!man.exists()) throw Error(ErrorCode::Io, "no manifest.json under " + root + " (run gen first)");
  man.load();
  return man;
}

inline RunSummary cmd_segment(const PipelineConfig& cfg) {
  validate(cfg);
  const std::string root = resolve_output_root(cfg);
  Manifest man = open_manifest(root);
  const auto cases = man.cases();
  const auto rs = run_parallel(static_cast<int>(cases.size()), cfg.parallelism, [&](int i) {
    if (!man.stage_ok(i, "gen")) return StageResult{cases[i].id, false, "case " + cases[i].id + ": not generated"};
    return guarded(cases[i].id, "segment", [&] { segment_one(cfg, case_dir(root, cases[i])); });
  });
  man.record("segment", rs);
  man.save();
  return summarize(rs);
}

inline RunSummary cmd_reconstruct(const PipelineConfig& cfg) {
  validate(cfg);
  const std::string root = resolve_output_root(cfg);
  Manifest man = open_manifest(root);
  const auto cases = man.cases();
  RunSummary total;
  for (const auto& variant : cfg.variants) {
    const auto rs = run_parallel(static_cast<int>(cases.size()), cfg.parallelism, [&](int i) {
      return guarded(cases[i].id, "reconstruct/" + variant,
                     [&] { reconstruct_one(cfg, case_dir(root, cases[i]), variant); });
    });
    man.record("reconstruct/" + variant, rs);
    const auto s = summarize(rs);
    total.cases += s.cases;
    total.failures += s.failures;
    total.errors.insert(total.errors.end(), s.errors.begin(), s.errors.end());
  }
  man.save();
  return total;
}

/// Evaluates every variant; writes metrics.json and metrics.txt under the root.
inline std::vector<MetricsReport> cmd_eval(const PipelineConfig& cfg, RunSummary* summary = nullptr) {
  validate(cfg);
  const std::string root = resolve_output_root(cfg);
  Manifest man = open_manifest(root);
  const auto cases = man.cases();
  std::vector<MetricsReport> rows;
  RunSummary total;
  for (const auto& variant : cfg.variants) {
    std::vector<CaseMetrics> per(cases.size());
    const auto rs = run_parallel(static_cast<int>(cases.size()), cfg.parallelism, [&](int i) {
      auto r = guarded(cases[i].id, "eval/" + variant,
                       [&] { per[i] = evaluate_one(cfg, cases[i], case_dir(root, cases[i]), variant); });
      if (!r.ok) {
        per[i] = CaseMetrics{};
        per[i].id = cases[i].id;
        per[i].family = cases[i].family;
        per[i].ok = false;
        per[i].error = r.error;
      }
      return r;
    });
    rows.push_back(aggregate(variant, per));
    const auto s = summarize(rs);
    total.cases += s.cases;
    total.failures += s.failures;
    total.errors.insert(total.errors.end(), s.errors.begin(), s.errors.end());
  }
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows) j["rows"].push_back(io::to_json(r));
  io::write_json((fs::path(root) / "metrics.json").string(), j);
  std::ofstream((fs::path(root) / "metrics.txt").string(), std::ios::binary) << format_table(rows);
  if (summary) *summary = total;
  return rows;
}

inline RunSummary cmd_all(const PipelineConfig& cfg) {
  RunSummary total = cmd_gen(cfg);
  for (const auto& s : {cmd_segment(cfg), cmd_reconstruct(cfg)}) {
    total.failures += s.failures;
    total.errors.insert(total.errors.end(), s.errors.begin(), s.errors.end());
  }
  RunSummary ev;
  cmd_eval(cfg, &ev);
  total.failures += ev.failures;
  total.errors.insert(total.errors.end(), ev.errors.begin(), ev.errors.end());
  return total;
}

}  // namespace primrep::pipeline
