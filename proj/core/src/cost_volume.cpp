#include <algorithm>

#include "vfss/error.hpp"
#include "vfss/segmenter.hpp"

namespace vfss {

CostVolume compute_cost_volume(const DenseImageEmbedding& img, const TextEmbeddingSet& txt) {
  if (img.dim() != txt.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "image embedding dim " + std::to_string(img.dim()) +
                                                   " != text embedding dim " + std::to_string(txt.dim()));
  }
  // Norms are computed once; the per-cell value is dot / (|u| |v|), the same
  // expression cosine() evaluates.
  std::vector<double> text_norms(txt.size());
  for (std::size_t n = 0; n < txt.size(); ++n) text_norms[n] = l2_norm(txt.row(n));

  CostVolume c(img.height(), img.width(), txt.size());
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const auto u = img.pixel(i);
    const double nu = l2_norm(u);
    if (!(nu > 0.0)) throw Error(ErrorKind::kDegenerateVector, "zero-norm image pixel");
    for (std::size_t n = 0; n < txt.size(); ++n) {
      const double s = dot(u, txt.row(n)) / (nu * text_norms[n]);
      c.at(i, n) = static_cast<float>(std::clamp(s, -1.0, 1.0));
    }
  }
  return c;
}

}  // namespace vfss
