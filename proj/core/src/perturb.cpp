#include "vfss/perturb.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "vfss/error.hpp"
#include "vfss/rng.hpp"

namespace vfss {

void PerturbationConfig::validate() const {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) {
    throw Error(ErrorKind::kConfig, "drop_rate must lie in [0, 1]");
  }
  if (fp_count > 0 && vocabulary.empty()) {
    throw Error(ErrorKind::kConfig, "false-positive injection needs a non-empty vocabulary");
  }
}

std::vector<std::string> PerturbedTagSet::tags() const {
  std::vector<std::string> out = surviving;
  out.insert(out.end(), injected.begin(), injected.end());
  return out;
}

std::uint64_t image_stream_seed(std::uint64_t master_seed, std::string_view image_id) {
  return derive_seed(master_seed, image_id);
}

PerturbedTagSet perturb_tags(std::span<const std::string> gt_classes, const PerturbationConfig& cfg,
                             std::string_view image_id) {
  cfg.validate();
  PerturbedTagSet out;
  out.image_id = std::string(image_id);
  out.seed = image_stream_seed(cfg.master_seed, image_id);
  SplitMix64 rng(out.seed);

  std::vector<bool> drop(gt_classes.size(), false);
  if (cfg.drop_mode == DropMode::kBernoulli) {
    for (std::size_t k = 0; k < gt_classes.size(); ++k) drop[k] = rng.next_double() < cfg.drop_rate;
  } else {
    const auto count = static_cast<std::size_t>(std::lround(cfg.drop_rate * static_cast<double>(gt_classes.size())));
    std::vector<std::size_t> order(gt_classes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = k + rng.next_below(order.size() - k);
      std::swap(order[k], order[j]);
      drop[order[k]] = true;
    }
  }
  for (std::size_t k = 0; k < gt_classes.size(); ++k) {
    (drop[k] ? out.dropped : out.surviving).push_back(gt_classes[k]);
  }

  if (cfg.fp_count > 0) {
    const std::set<std::string_view> gt_set(gt_classes.begin(), gt_classes.end());
    std::vector<std::string> candidates;
    std::set<std::string_view> seen;
    for (const auto& v : cfg.vocabulary) {
      if (!gt_set.contains(v) && seen.insert(v).second) candidates.push_back(v);
    }
    if (cfg.fp_count > candidates.size()) {
      throw Error(ErrorKind::kOutOfRange, "cannot inject " + std::to_string(cfg.fp_count) +
                                              " false positives for '" + std::string(image_id) + "': only " +
                                              std::to_string(candidates.size()) + " candidates");
    }
    for (std::size_t k = 0; k < cfg.fp_count; ++k) {
      const std::size_t j = k + rng.next_below(candidates.size() - k);
      std::swap(candidates[k], candidates[j]);
      out.injected.push_back(candidates[k]);
    }
  }
  return out;
}

std::vector<SweepRow> sweep_perturbation(const Dataset& dataset, std::span<const GridPoint> grid,
                                         const PerturbationConfig& base, const AggregationWeights& weights,
                                         double threshold, unsigned threads) {
  const auto& images = dataset.images();
  std::vector<std::vector<std::string>> gt_classes;
  gt_classes.reserve(images.size());
  for (const auto& im : images) gt_classes.push_back(oracle_tags(im.gt, dataset.vocabulary()));

  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const auto& point : grid) {
    PerturbationConfig cfg = base;
    cfg.drop_rate = point.drop_rate;
    cfg.fp_count = point.fp_count;
    cfg.validate();

    std::vector<std::vector<std::string>> tags(images.size());
    for (std::size_t k = 0; k < images.size(); ++k) {
      const auto perturbed = perturb_tags(gt_classes[k], cfg, images[k].image_id);
      for (const auto& inj : perturbed.injected) {
        for (const auto& g : gt_classes[k]) {
          if (inj == g) throw Error(ErrorKind::kInvariant, "injected class collides with GT class '" + g + "'");
        }
      }
      tags[k] = perturbed.tags();
    }
    const auto predictions = segment_dataset(dataset, tags, weights, threads);
    const auto eval = evaluate_predictions(dataset, predictions, threshold, threads);
    rows.push_back({point.drop_rate, point.fp_count, eval.soft.miou, eval.hard.miou, eval.soft_tagging.acc,
                    eval.soft_tagging.fp_mean, eval.soft_tagging.fn_mean});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows, std::uint64_t master_seed) {
  std::string out = fmt::format("# master_seed={}\n", master_seed);
  out += "drop_rate,fp_count,soft_miou,hard_miou,acc,fp_mean,fn_mean\n";
  for (const auto& r : rows) {
    out += fmt::format("{:.4f},{},{:.6f},{:.6f},{},{:.4f},{:.4f}\n", r.drop_rate, r.fp_count, r.soft_miou,
                       r.hard_miou, r.acc ? fmt::format("{:.4f}", *r.acc) : std::string(), r.fp_mean, r.fn_mean);
  }
  return out;
}

}  // namespace vfss
