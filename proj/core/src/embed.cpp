#include "vfss/embed.hpp"

#include <algorithm>
#include <cmath>

#include "vfss/error.hpp"

namespace vfss {
namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

void replace_once(std::string& s, std::string_view from, std::string_view to) {
  const auto pos = s.find(from);
  if (pos != std::string::npos) s.replace(pos, from.size(), to);
}

}  // namespace

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "dot: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
  return s;
}

double l2_norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const float> u, std::span<const float> v) {
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorKind::kDegenerateVector, "cosine of a zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double n = l2_norm(m.row(r));
    if (!(n > 0.0)) {
      throw Error(ErrorKind::kDegenerateVector, "row " + std::to_string(r) + " has zero norm");
    }
    auto src = m.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) dst[c] = static_cast<float>(src[c] / n);
  }
  return out;
}

// ---------------------------------------------------------------------------

DenseImageEmbedding::DenseImageEmbedding(std::size_t height, std::size_t width, std::size_t dim,
                                         std::vector<float> data, std::string provenance)
    : height_(height), width_(width), dim_(dim), data_(std::move(data)), provenance_(std::move(provenance)) {
  if (height_ == 0 || width_ == 0 || dim_ == 0) {
    throw Error(ErrorKind::kZeroDim, "image embedding must have positive H, W, d");
  }
  if (data_.size() != height_ * width_ * dim_) {
    throw Error(ErrorKind::kShapeMismatch, "image embedding payload does not match H*W*d");
  }
  for (std::size_t i = 0; i < pixels(); ++i) {
    if (!(l2_norm(pixel(i)) > 0.0)) {
      throw Error(ErrorKind::kDegenerateVector,
                  "image embedding pixel (" + std::to_string(i / width_) + ", " + std::to_string(i % width_) +
                      ") has zero norm");
    }
  }
}

DenseImageEmbedding DenseImageEmbedding::from_container(const EmbeddingContainer& c) {
  c.validate();
  if (c.rank() != 3) throw Error(ErrorKind::kBadRank, "image embedding must be rank 3 (H x W x d)");
  return DenseImageEmbedding(c.dims[0], c.dims[1], c.dims[2], c.data, c.provenance);
}

Matrix DenseImageEmbedding::as_matrix() const {
  Matrix m;
  m.rows = pixels();
  m.cols = dim_;
  m.data = data_;
  return m;
}

TextEmbeddingSet::TextEmbeddingSet(std::vector<std::string> names, Matrix vectors, std::string provenance)
    : names_(std::move(names)), vectors_(std::move(vectors)), provenance_(std::move(provenance)) {
  if (names_.empty()) throw Error(ErrorKind::kEmpty, "text embedding set needs at least one class");
  if (vectors_.rows != names_.size()) {
    throw Error(ErrorKind::kCountMismatch, std::to_string(names_.size()) + " names but " +
                                               std::to_string(vectors_.rows) + " embedding rows");
  }
  if (vectors_.cols == 0) throw Error(ErrorKind::kZeroDim, "text embeddings have zero dimension");
  for (std::size_t n = 0; n < names_.size(); ++n) {
    if (!index_.emplace(names_[n], n).second) {
      throw Error(ErrorKind::kDuplicate, "duplicate class name '" + names_[n] + "'");
    }
    if (!(l2_norm(vectors_.row(n)) > 0.0)) {
      throw Error(ErrorKind::kDegenerateVector, "text embedding for '" + names_[n] + "' has zero norm");
    }
  }
}

TextEmbeddingSet TextEmbeddingSet::from_container(std::vector<std::string> names, const EmbeddingContainer& c) {
  c.validate();
  if (c.rank() != 2) throw Error(ErrorKind::kBadRank, "text embeddings must be rank 2 (N x d)");
  Matrix m;
  m.rows = c.dims[0];
  m.cols = c.dims[1];
  m.data = c.data;
  return TextEmbeddingSet(std::move(names), std::move(m), c.provenance);
}

std::optional<std::size_t> TextEmbeddingSet::find(std::string_view name) const {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  return std::nullopt;
}

TextEmbeddingSet TextEmbeddingSet::select(std::span<const std::string> names) const {
  Matrix m(names.size(), dim());
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto idx = find(names[k]);
    if (!idx) throw Error(ErrorKind::kUnknownClass, "no text embedding for class '" + names[k] + "'");
    std::copy_n(row(*idx).begin(), dim(), m.row(k).begin());
  }
  return TextEmbeddingSet(std::vector<std::string>(names.begin(), names.end()), std::move(m), provenance_);
}

TextEmbeddingSet TextEmbeddingSet::concat(const TextEmbeddingSet& other) const {
  if (other.dim() != dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "cannot join text banks of dims " + std::to_string(dim()) +
                                                   " and " + std::to_string(other.dim()));
  }
  auto names = names_;
  names.insert(names.end(), other.names_.begin(), other.names_.end());
  Matrix m = vectors_;
  m.rows += other.vectors_.rows;
  m.data.insert(m.data.end(), other.vectors_.data.begin(), other.vectors_.data.end());
  std::string prov = provenance_;
  if (!other.provenance_.empty() && other.provenance_ != provenance_) prov += "+" + other.provenance_;
  return TextEmbeddingSet(std::move(names), std::move(m), std::move(prov));
}

// ---------------------------------------------------------------------------

PromptTemplate::PromptTemplate(std::string pattern) : pattern_(std::move(pattern)) {
  if (count_occurrences(pattern_, "{class}") != 1) {
    throw Error(ErrorKind::kInvariant, "prompt template must contain {class} exactly once: '" + pattern_ + "'");
  }
  const auto adjectives = count_occurrences(pattern_, "{adjective}");
  if (adjectives > 1) {
    throw Error(ErrorKind::kInvariant, "prompt template may contain {adjective} at most once");
  }
  has_adjective_ = adjectives == 1;
}

std::string PromptTemplate::render(std::string_view name, std::optional<std::string_view> adjective) const {
  std::string out = pattern_;
  if (has_adjective_) {
    if (adjective) {
      replace_once(out, "{adjective}", *adjective);
    } else if (out.find("{adjective} ") != std::string::npos) {
      replace_once(out, "{adjective} ", "");
    } else if (out.find(" {adjective}") != std::string::npos) {
      replace_once(out, " {adjective}", "");
    } else {
      replace_once(out, "{adjective}", "");
    }
  }
  replace_once(out, "{class}", name);
  return out;
}

std::vector<std::string> expand_prompts(std::span<const std::string> names, const PromptTemplate& tmpl,
                                        const std::optional<AdjectiveMap>& adjectives) {
  std::vector<std::string> prompts;
  for (const auto& name : names) {
    if (!tmpl.has_adjective()) {
      prompts.push_back(tmpl.render(name));
      continue;
    }
    const std::vector<std::string>* list = nullptr;
    if (adjectives) {
      if (auto it = adjectives->find(name); it != adjectives->end()) list = &it->second;
    }
    if (list == nullptr) throw Error(ErrorKind::kInvariant, "no adjective entry for class '" + name + "'");
    if (list->empty()) {
      prompts.push_back(tmpl.render(name));
      continue;
    }
    for (const auto& adj : *list) prompts.push_back(tmpl.render(name, adj));
  }
  return prompts;
}

}  // namespace vfss
