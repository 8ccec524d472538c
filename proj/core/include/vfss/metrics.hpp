#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vfss/assigner.hpp"
#include "vfss/tensor_io.hpp"

namespace vfss {

// N x (N + 1) pixel counts indexed [gt][pred]; the last column counts
// predictions carrying kUnmatchedLabel.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * (classes + 1), 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::size_t unmatched_column() const noexcept { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * (classes_ + 1) + pred]; }
  std::uint64_t total() const;

  // GT-ignore pixels are skipped; every other pixel increments one cell.
  // Throws kShapeMismatch on differing sizes and kOutOfRange on bad labels.
  void accumulate(const SegmentationMap& gt, const SegmentationMap& pred);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix accumulate(ConfusionMatrix conf, const SegmentationMap& gt, const SegmentationMap& pred);

struct IouResult {
  // nullopt where TP + FP + FN == 0.
  std::vector<std::optional<double>> per_class;
  double miou = 0.0;
  std::size_t scored_classes = 0;
};

// IoU_c = TP / (TP + FP + FN); the unmatched column adds to FN only.
// Throws kEmpty if no pixel was accumulated.
IouResult miou(const ConfusionMatrix& conf);

struct ImageTagging {
  std::string image_id;
  std::size_t gt_classes = 0;
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t false_positives = 0;
};

struct TaggingStats {
  std::vector<ImageTagging> images;
  // 100 * matched GT classes / GT classes, pooled over images.
  std::optional<double> acc;
  // Per-image recall averaged over images with at least one GT class.
  std::optional<double> acc_macro;
  double fp_mean = 0.0;
  double fn_mean = 0.0;

  nlohmann::json to_json(bool include_macro = false) const;
};

// A GT class is matched when some predicted name is assigned to it. A
// predicted name is a false positive when unmatched or assigned to a class
// absent from that image's GT. Throws kMisaligned if the key sets differ.
TaggingStats tagging_stats(const std::map<std::string, std::vector<std::string>>& gt_classes,
                           const std::map<std::string, AssignmentMap>& assignments);

// "class,iou" with one row per class; classes without support get an empty
// IoU field.
std::string per_class_csv(std::span<const std::string> names, const IouResult& result);

}  // namespace vfss
