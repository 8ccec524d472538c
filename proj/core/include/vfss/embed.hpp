#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/tensor_io.hpp"

namespace vfss {

// Dense row-major float matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Sums in index order with a double accumulator.
double dot(std::span<const float> a, std::span<const float> b);
double l2_norm(std::span<const float> v);

// u.v / (|u||v|), clamped to [-1, 1]. Throws kDegenerateVector on a zero
// norm and kDimensionMismatch on unequal lengths.
double cosine(std::span<const float> u, std::span<const float> v);

// Each row scaled to unit L2 norm. Throws kDegenerateVector on a zero row.
Matrix l2_normalize_rows(const Matrix& m);

// Per-pixel visual features, H x W x d, spatial index i = y * W + x.
class DenseImageEmbedding {
 public:
  DenseImageEmbedding(std::size_t height, std::size_t width, std::size_t dim, std::vector<float> data,
                      std::string provenance = {});
  static DenseImageEmbedding from_container(const EmbeddingContainer& c);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::span<const float> pixel(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<float>& data() const noexcept { return data_; }
  const std::string& provenance() const noexcept { return provenance_; }

  // (H*W) x d view of the features.
  Matrix as_matrix() const;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t dim_;
  std::vector<float> data_;
  std::string provenance_;
};

// Named class embeddings, one row per name.
class TextEmbeddingSet {
 public:
  TextEmbeddingSet(std::vector<std::string> names, Matrix vectors, std::string provenance = {});
  static TextEmbeddingSet from_container(std::vector<std::string> names, const EmbeddingContainer& c);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t dim() const noexcept { return vectors_.cols; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::span<const float> row(std::size_t n) const { return vectors_.row(n); }
  const std::string& provenance() const noexcept { return provenance_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Rows for `names` in the given order; throws kUnknownClass for a missing
  // name and kEmpty for an empty list.
  TextEmbeddingSet select(std::span<const std::string> names) const;
  // Appends rows of `other`; throws kDuplicate on a shared name.
  TextEmbeddingSet concat(const TextEmbeddingSet& other) const;

 private:
  std::vector<std::string> names_;
  Matrix vectors_;
  std::string provenance_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Prompt pattern with a "{class}" placeholder and an optional "{adjective}".
class PromptTemplate {
 public:
  static constexpr std::string_view kDefault = "A photo of a {class}";
  static constexpr std::string_view kAdjective = "A photo of a {adjective} {class}";

  explicit PromptTemplate(std::string pattern = std::string(kDefault));

  const std::string& pattern() const noexcept { return pattern_; }
  bool has_adjective() const noexcept { return has_adjective_; }

  // Without an adjective the "{adjective}" slot and one neighbouring space
  // are dropped.
  std::string render(std::string_view name, std::optional<std::string_view> adjective = std::nullopt) const;

 private:
  std::string pattern_;
  bool has_adjective_ = false;
};

using AdjectiveMap = std::map<std::string, std::vector<std::string>, std::less<>>;

// One prompt per (name, adjective) in name-then-adjective order, or one per
// name when the template has no adjective slot. A name mapped to an empty
// list yields one adjective-free prompt. Throws kInvariant when the template
// needs adjectives and a name has no entry.
std::vector<std::string> expand_prompts(std::span<const std::string> names, const PromptTemplate& tmpl,
                                        const std::optional<AdjectiveMap>& adjectives = std::nullopt);

}  // namespace vfss
