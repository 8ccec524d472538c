#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vfss/embed.hpp"
#include "vfss/tensor_io.hpp"

namespace vfss {

// (H*W) x N scores, row-major: values[i * classes + n] with i = y * W + x.
// Holds the raw cosine cost volume and every refined feature map after it.
struct CostVolume {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<float> values;

  CostVolume() = default;
  CostVolume(std::size_t h, std::size_t w, std::size_t n) : height(h), width(w), classes(n), values(h * w * n) {}

  std::size_t locations() const noexcept { return height * width; }
  float& at(std::size_t i, std::size_t n) { return values[i * classes + n]; }
  float at(std::size_t i, std::size_t n) const { return values[i * classes + n]; }

  bool operator==(const CostVolume&) const = default;
};

// Single-head self-attention with a residual connection and no feed-forward
// sublayer. All four matrices are model_dim x model_dim and act on row
// vectors (token * W).
struct AttentionBlock {
  Matrix query;
  Matrix key;
  Matrix value;
  Matrix output;
};

// Weights for K rounds of spatial-then-class aggregation. Tokens are
// [cost (1 channel) ; projected guidance (guidance_dim)], so
// model_dim = 1 + guidance_dim. Guidance is the L2-normalised embedding
// multiplied by the d x guidance_dim projection.
struct AggregationWeights {
  static constexpr std::uint32_t kFileVersion = 1;
  static constexpr float kInitScale = 0.05f;

  std::size_t embed_dim = 0;
  std::size_t guidance_dim = 0;
  Matrix visual_projection;  // embed_dim x guidance_dim
  Matrix text_projection;    // embed_dim x guidance_dim
  std::vector<AttentionBlock> spatial;
  std::vector<AttentionBlock> cross_class;
  std::string provenance;

  std::size_t iterations() const noexcept { return spatial.size(); }
  std::size_t model_dim() const noexcept { return 1 + guidance_dim; }

  // Throws kShapeMismatch / kNonFinite.
  void validate() const;

  // K = 0: aggregation is the identity.
  static AggregationWeights none();
  // Every entry uniform in [-kInitScale, kInitScale). Each matrix draws from
  // its own SplitMix64 stream derived from (seed, matrix name).
  static AggregationWeights initialize(std::uint64_t seed, std::size_t iterations, std::size_t embed_dim,
                                       std::size_t guidance_dim);
};

// "VFSW" weights file, little-endian:
//   magic "VFSW", version u32, K u32, embed_dim u32, guidance_dim u32,
//   visual_projection (d x g f32), text_projection (d x g f32),
//   then per iteration: spatial Q, K, V, O, class Q, K, V, O (m x m f32 each),
//   then provenance (u32 length + UTF-8).
std::vector<std::byte> encode_weights(const AggregationWeights& w);
AggregationWeights decode_weights(std::span<const std::byte> bytes);
AggregationWeights read_weights(const std::filesystem::path& path);
void write_weights(const AggregationWeights& w, const std::filesystem::path& path);

// C[i][n] = cos(D^V(i), D^L(n)).
CostVolume compute_cost_volume(const DenseImageEmbedding& img, const TextEmbeddingSet& txt);

// Row-stochastic attention matrix softmax(Q K^T / sqrt(model_dim)) for the
// given L x model_dim tokens.
Matrix attention_probabilities(const Matrix& tokens, const AttentionBlock& block);
// tokens + softmax(Q K^T / sqrt(m)) V O.
Matrix attend(const Matrix& tokens, const AttentionBlock& block);

// One spatial round: per class channel, attention across the H*W locations.
CostVolume spatial_aggregate(const CostVolume& features, const DenseImageEmbedding& img,
                             const AggregationWeights& w, std::size_t iteration);
// One class round: per location, attention across the N classes.
CostVolume class_aggregate(const CostVolume& features, const TextEmbeddingSet& txt, const AggregationWeights& w,
                           std::size_t iteration);
// K rounds of class_aggregate(spatial_aggregate(.)); K = 0 returns the input.
CostVolume aggregate(const CostVolume& cost, const DenseImageEmbedding& img, const TextEmbeddingSet& txt,
                     const AggregationWeights& w);

// Bilinear resize of one H x W channel, half-pixel centres (align_corners
// false): source = (dst + 0.5) * (in / out) - 0.5, clamped to the grid.
std::vector<double> bilinear_resize(std::span<const float> channel, std::size_t height, std::size_t width,
                                    std::size_t target_height, std::size_t target_width);

// Bilinear upsampling of every channel, then per-pixel argmax with ties to the
// lowest class index.
SegmentationMap upsample_and_argmax(const CostVolume& features, std::size_t target_height,
                                    std::size_t target_width, std::span<const std::string> names);

// Full pipeline for one image. Labels index into `active_classes`. An empty
// active set yields an all-ignore map.
SegmentationMap segment_image(const DenseImageEmbedding& img, std::span<const std::string> active_classes,
                              const TextEmbeddingSet& text_bank, const AggregationWeights& w,
                              std::size_t target_height, std::size_t target_width);

}  // namespace vfss
