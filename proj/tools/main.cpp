#include <CLI11.hpp>

#include <iostream>

#include "primrep/pipeline.hpp"

using namespace primrep;
namespace pl = primrep::pipeline;

namespace {

struct Overrides {
  std::string config_path;
  std::string output_root;
  std::vector<std::string> families;
  std::vector<std::uint64_t> seeds;
  std::vector<double> sigmas;
  std::vector<std::string> variants;
  int parallelism = 0;
  int samples = 0;
  bool no_stitch = false;
  bool no_constraints = false;
  bool gt_segmentation = false;
};

pl::PipelineConfig resolve(const Overrides& o) {
  pl::PipelineConfig c = o.config_path.empty() ? pl::PipelineConfig{} : pl::load_config(o.config_path);
  if (!o.families.empty()) c.families = o.families;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.sigmas.empty()) c.sigmas = o.sigmas;
  if (!o.variants.empty()) c.variants = o.variants;
  if (o.no_stitch || o.no_constraints) {
    c.variants.clear();
    if (o.no_stitch) c.variants.push_back("no-stitch");
    if (o.no_constraints) c.variants.push_back("no-constraints");
  }
  if (o.parallelism > 0) c.parallelism = o.parallelism;
  if (o.samples > 0) c.metric_samples = o.samples;
  if (o.gt_segmentation) c.gt_segmentation = true;
  // Flag beats environment beats file.
  c.output_root = pl::resolve_output_root(c);
  if (!o.output_root.empty()) c.output_root = o.output_root;
  pl::validate(c);
  return c;
}

int report(const pl::RunSummary& s) {
  for (const auto& e : s.errors) std::cerr << e << '\n';
  if (s.failures > 0) std::cerr << s.failures << " of " << s.cases << " case runs failed\n";
  return s.failures > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primitive-based mesh to B-rep reconstruction pipeline"};
  app.require_subcommand(1);
  Overrides o;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "JSON run configuration");
    sub->add_option("-o,--output-root", o.output_root, "Output root (overrides PRIMREP_OUTPUT_ROOT and the config)");
    sub->add_option("--families", o.families, "Corpus families");
    sub->add_option("--seeds", o.seeds, "Corpus seeds");
    sub->add_option("--sigmas", o.sigmas, "Vertex noise levels");
    sub->add_option("--variants", o.variants, "Reconstruction variants: default, no-stitch, no-constraints");
    sub->add_flag("--no-stitch", o.no_stitch, "Skip primitive stitching");
    sub->add_flag("--no-constraints", o.no_constraints, "Stitch without geometric constraints");
    sub->add_flag("--gt-segmentation", o.gt_segmentation, "Fit on the ground-truth partition");
    sub->add_option("-j,--parallelism", o.parallelism, "Cases processed concurrently");
    sub->add_option("--samples", o.samples, "Surface samples per metric");
  };

  auto* gen = app.add_subcommand("gen", "Generate corpus cases and label maps");
  auto* seg = app.add_subcommand("segment", "Segment meshes and fit primitives");
  auto* rec = app.add_subcommand("reconstruct", "Relate, stitch, and build the B-rep");
  auto* ev = app.add_subcommand("eval", "Compute metrics and write the table");
  auto* all = app.add_subcommand("all", "Run every stage");
  auto* dump = app.add_subcommand("config", "Print the resolved configuration as JSON");
  for (auto* s : {gen, seg, rec, ev, all, dump}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  pl::PipelineConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (dump->parsed()) {
      std::cout << pl::to_json(cfg).dump(2) << '\n';
      return 0;
    }
    if (gen->parsed()) return report(pl::cmd_gen(cfg));
    if (seg->parsed()) return report(pl::cmd_segment(cfg));
    if (rec->parsed()) return report(pl::cmd_reconstruct(cfg));
    if (ev->parsed()) {
      pl::RunSummary s;
      const auto rows = pl::cmd_eval(cfg, &s);
      std::cout << format_table(rows);
      return report(s);
    }
    if (all->parsed()) {
      const auto s = pl::cmd_all(cfg);
      std::ifstream table((std::filesystem::path(cfg.output_root) / "metrics.txt").string());
      std::cout << table.rdbuf();
      return report(s);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
