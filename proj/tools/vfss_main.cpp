// vfss: batch driver for segmentation, evaluation, threshold sweeps, tagger
// perturbation studies and container validation.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vfss/error.hpp"
#include "vfss/runner.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string manifest;
  std::string weights;
  std::string tagger;
  std::string out;
  std::string predictions;
  std::string mode;
  std::string drop_mode;
  double tsbert = 0.0;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::size_t guidance_dim = 0;
  std::vector<double> thresholds;
  std::vector<double> drop_rates;
  std::vector<std::size_t> fp_counts;
  bool macro_acc = false;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run config; flags override its values");
  cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)");
  cmd->add_option("--weights", o.weights, "Aggregation weights file (VFSW); default: seeded init");
  cmd->add_option("--tagger", o.tagger, "oracle | file | file:PATH | perturb");
  cmd->add_option("--tsbert", o.tsbert, "Soft-assignment similarity threshold in [0, 1]");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--predictions", o.predictions, "Prediction index (default: OUT/predictions.json)");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Master seed for weight init and perturbation");
  cmd->add_option("--iterations", o.iterations, "Aggregation rounds K for seeded weights");
  cmd->add_option("--guidance-dim", o.guidance_dim, "Guidance width for seeded weights");
  cmd->add_option("--mode", o.mode, "Headline assignment mode: hard | soft");
  cmd->add_option("--thresholds", o.thresholds, "Thresholds for sweep-threshold")->delimiter(',');
  cmd->add_option("--drop-rates", o.drop_rates, "Drop rates (simulate grid / perturb tagger)")->delimiter(',');
  cmd->add_option("--fp-counts", o.fp_counts, "False-positive counts (simulate grid / perturb tagger)")
      ->delimiter(',');
  cmd->add_option("--drop-mode", o.drop_mode, "bernoulli | fixed");
  cmd->add_flag("--macro-acc", o.macro_acc, "Also report per-image averaged tagging accuracy");
}

vfss::RunConfig build_config(const CLI::App* cmd, const Overrides& o) {
  vfss::RunConfig cfg = o.config.empty() ? vfss::RunConfig::defaults() : vfss::RunConfig::load(o.config);
  auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
  if (given("--manifest")) cfg.manifest = o.manifest;
  if (given("--weights")) cfg.weights = o.weights;
  if (given("--tagger")) cfg.set_tagger(o.tagger);
  if (given("--tsbert")) cfg.tsbert = o.tsbert;
  if (given("--out")) cfg.out = o.out;
  if (given("--predictions")) cfg.predictions = o.predictions;
  if (given("--threads")) cfg.threads = o.threads;
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--iterations")) cfg.iterations = o.iterations;
  if (given("--guidance-dim")) cfg.guidance_dim = o.guidance_dim;
  if (given("--mode")) {
    if (o.mode != "hard" && o.mode != "soft") {
      throw vfss::Error(vfss::ErrorKind::kConfig, "--mode must be hard or soft");
    }
    cfg.mode = o.mode == "hard" ? vfss::AssignmentMode::kHard : vfss::AssignmentMode::kSoft;
  }
  if (given("--thresholds")) cfg.thresholds = o.thresholds;
  if (given("--drop-rates")) cfg.drop_rates = o.drop_rates;
  if (given("--fp-counts")) cfg.fp_counts = o.fp_counts;
  if (given("--drop-mode")) {
    if (o.drop_mode != "bernoulli" && o.drop_mode != "fixed") {
      throw vfss::Error(vfss::ErrorKind::kConfig, "--drop-mode must be bernoulli or fixed");
    }
    cfg.drop_mode = o.drop_mode == "fixed" ? vfss::DropMode::kFixedCount : vfss::DropMode::kBernoulli;
  }
  if (given("--macro-acc")) cfg.macro_acc = o.macro_acc;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vocabulary-free semantic segmentation engine and evaluation harness"};
  app.require_subcommand(1);

  Overrides o;
  auto* segment = app.add_subcommand("segment", "Segment every manifest image from its tag list");
  auto* evaluate = app.add_subcommand("evaluate", "Hard/soft mIoU and tagging statistics for predictions");
  auto* sweep = app.add_subcommand("sweep-threshold", "Soft mIoU and matched names across thresholds");
  auto* simulate = app.add_subcommand("simulate", "Tagger false-negative / false-positive sweep");
  for (auto* cmd : {segment, evaluate, sweep, simulate}) add_run_options(cmd, o);

  auto* validate = app.add_subcommand("validate", "Lint container, map, weights, tag and manifest files");
  std::vector<std::filesystem::path> files;
  std::optional<std::size_t> classes;
  validate->add_option("files", files, "Files to check")->required();
  validate->add_option("--classes", classes, "Upper bound for SEGM labels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return vfss::cmd_validate(files, classes, std::cout, std::cerr);
    for (auto* cmd : {segment, evaluate, sweep, simulate}) {
      if (!cmd->parsed()) continue;
      const auto cfg = build_config(cmd, o);
      if (cmd == segment) return vfss::cmd_segment(cfg, std::cerr);
      if (cmd == evaluate) return vfss::cmd_evaluate(cfg, std::cerr);
      if (cmd == sweep) return vfss::cmd_sweep_threshold(cfg, std::cerr);
      return vfss::cmd_simulate(cfg, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
