#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/dataset.hpp"
#include "vfss/segmenter.hpp"

namespace vfss {

enum class DropMode {
  kBernoulli,   // each GT class dropped independently with probability drop_rate
  kFixedCount,  // exactly round(drop_rate * |gt|) classes dropped, chosen uniformly
};

struct PerturbationConfig {
  double drop_rate = 0.0;
  std::size_t fp_count = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> vocabulary;
  DropMode drop_mode = DropMode::kBernoulli;

  void validate() const;
};

struct PerturbedTagSet {
  std::string image_id;
  std::vector<std::string> surviving;
  std::vector<std::string> injected;
  std::vector<std::string> dropped;
  std::uint64_t seed = 0;

  // surviving then injected.
  std::vector<std::string> tags() const;
};

// Per-image stream seed: derive_seed(master_seed, image_id).
std::uint64_t image_stream_seed(std::uint64_t master_seed, std::string_view image_id);

// Draw order on the image stream: drop decisions for the GT classes in order
// (Bernoulli: one uniform per class; fixed count: a partial Fisher-Yates over
// class positions), then a partial Fisher-Yates over vocabulary \ GT for the
// false positives. Throws kOutOfRange when fp_count exceeds the candidates.
PerturbedTagSet perturb_tags(std::span<const std::string> gt_classes, const PerturbationConfig& cfg,
                             std::string_view image_id);

struct GridPoint {
  double drop_rate = 0.0;
  std::size_t fp_count = 0;
};

struct SweepRow {
  double drop_rate = 0.0;
  std::size_t fp_count = 0;
  double soft_miou = 0.0;
  double hard_miou = 0.0;
  std::optional<double> acc;
  double fp_mean = 0.0;
  double fn_mean = 0.0;
};

// For each grid point: perturb the oracle tags of every image, segment with
// the perturbed lists, evaluate. `base` supplies seed, vocabulary and drop
// mode; its rate and count are replaced by each grid point. Tagging columns
// come from the soft assignment.
std::vector<SweepRow> sweep_perturbation(const Dataset& dataset, std::span<const GridPoint> grid,
                                         const PerturbationConfig& base, const AggregationWeights& weights,
                                         double threshold, unsigned threads);

// "# master_seed=<seed>" comment line, then
// drop_rate,fp_count,soft_miou,hard_miou,acc,fp_mean,fn_mean
std::string sweep_csv(std::span<const SweepRow> rows, std::uint64_t master_seed);

}  // namespace vfss
