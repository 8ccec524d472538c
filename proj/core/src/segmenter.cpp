#include "vfss/error.hpp"
#include "vfss/segmenter.hpp"

namespace vfss {

SegmentationMap segment_image(const DenseImageEmbedding& img, std::span<const std::string> active_classes,
                              const TextEmbeddingSet& text_bank, const AggregationWeights& w,
                              std::size_t target_height, std::size_t target_width) {
  if (target_height == 0 || target_width == 0) {
    throw Error(ErrorKind::kZeroDim, "segment_image: target dims must be positive");
  }
  if (active_classes.empty()) {
    return SegmentationMap(static_cast<std::uint32_t>(target_height), static_cast<std::uint32_t>(target_width),
                           kIgnoreLabel);
  }
  const TextEmbeddingSet active = text_bank.select(active_classes);
  const CostVolume cost = compute_cost_volume(img, active);
  const CostVolume refined = aggregate(cost, img, active, w);
  return upsample_and_argmax(refined, target_height, target_width, active.names());
}

}  // namespace vfss
