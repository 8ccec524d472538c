#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vfss/assigner.hpp"
#include "vfss/perturb.hpp"

namespace vfss {

enum class TaggerSource { kOracle, kFile, kPerturb };

// Settings for one batch run. Loaded from a JSON config whose keys mirror the
// command-line flags (manifest, weights, seed, iterations, guidance_dim,
// tagger, tsbert, mode, out, predictions, threads, thresholds, drop_rates,
// fp_counts, drop_mode, macro_acc).
struct RunConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> weights;
  std::uint64_t seed = 0;
  std::size_t iterations = 2;
  std::size_t guidance_dim = 8;
  TaggerSource tagger = TaggerSource::kOracle;
  // Single tag file for every image; when unset the file tagger uses each
  // manifest entry's own tag file.
  std::optional<std::filesystem::path> tag_file;
  double tsbert = 0.5;
  AssignmentMode mode = AssignmentMode::kSoft;
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> predictions;
  unsigned threads = 1;
  std::vector<double> thresholds;
  std::vector<double> drop_rates;
  std::vector<std::size_t> fp_counts;
  DropMode drop_mode = DropMode::kBernoulli;
  bool macro_acc = false;

  static RunConfig defaults();
  // Unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::filesystem::path& path);

  // "oracle", "file", "file:PATH" or "perturb".
  void set_tagger(const std::string& source);
  std::string tagger_spec() const;

  // Throws kConfig on an invalid combination.
  void validate() const;

  // Settings that determine output content. Omits threads and paths that only
  // place outputs, so runs differing in those produce identical reports.
  nlohmann::json echo() const;
};

// Each command writes its artifacts under cfg.out and returns a process exit
// code. Failures are described on `err`, one line per image where applicable.
int cmd_segment(const RunConfig& cfg, std::ostream& err);
int cmd_evaluate(const RunConfig& cfg, std::ostream& err);
int cmd_sweep_threshold(const RunConfig& cfg, std::ostream& err);
int cmd_simulate(const RunConfig& cfg, std::ostream& err);
// Lints VFSE / SEGM / VFSW binaries, tag files, manifests and name lists.
// `class_count`, when given, bounds SEGM labels.
int cmd_validate(std::span<const std::filesystem::path> paths, std::optional<std::size_t> class_count,
                 std::ostream& out, std::ostream& err);

// Output locations under cfg.out.
std::filesystem::path predictions_index_path(const RunConfig& cfg);
std::filesystem::path report_path(const RunConfig& cfg);

struct ThresholdRow {
  double threshold = 0.0;
  double soft_miou = 0.0;
  std::size_t matched_names = 0;
};

// Rows for the given thresholds. Values in (1, 1 + 1e-6] clamp to 1; others
// outside [0, 1] throw kOutOfRange. Throws kMonotonicity if matched counts
// ever increase with the threshold.
std::vector<ThresholdRow> sweep_thresholds(const Dataset& dataset, std::span<const Prediction> predictions,
                                           std::span<const double> thresholds, unsigned threads);
std::string threshold_csv(std::span<const ThresholdRow> rows);

// Prediction index written by cmd_segment: {"config", "images": [{image_id,
// classes, map}]}.
std::vector<Prediction> read_predictions(const std::filesystem::path& index_path);

}  // namespace vfss
