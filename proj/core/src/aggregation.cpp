#include <algorithm>
#include <cmath>
#include <limits>

#include "vfss/error.hpp"
#include "vfss/rng.hpp"
#include "vfss/segmenter.hpp"

namespace vfss {
namespace {

using DMatrix = std::vector<double>;  // row-major, shape carried by caller

// out (rows x m) = in (rows x k) * w (k x m).
DMatrix multiply(const DMatrix& in, std::size_t rows, std::size_t k, const Matrix& w) {
  DMatrix out(rows * w.cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      const double a = in[r * k + j];
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < w.cols; ++c) out[r * w.cols + c] += a * w(j, c);
    }
  }
  return out;
}

// Row-normalised guidance, then projected: rows x g.
DMatrix project_guidance(const Matrix& features, const Matrix& projection) {
  const Matrix unit = l2_normalize_rows(features);
  DMatrix in(unit.data.begin(), unit.data.end());
  return multiply(in, unit.rows, unit.cols, projection);
}

// Softmax over each row of an L x L score matrix, in place.
void softmax_rows(DMatrix& scores, std::size_t length) {
  for (std::size_t r = 0; r < length; ++r) {
    double* row = scores.data() + r * length;
    const double peak = *std::max_element(row, row + length);
    double total = 0.0;
    for (std::size_t c = 0; c < length; ++c) {
      row[c] = std::exp(row[c] - peak);
      total += row[c];
    }
    for (std::size_t c = 0; c < length; ++c) row[c] /= total;
  }
}

DMatrix probabilities(const DMatrix& tokens, std::size_t length, const AttentionBlock& block) {
  const std::size_t m = block.query.rows;
  const DMatrix q = multiply(tokens, length, m, block.query);
  const DMatrix k = multiply(tokens, length, m, block.key);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  DMatrix scores(length * length);
  for (std::size_t a = 0; a < length; ++a) {
    for (std::size_t b = 0; b < length; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) s += q[a * m + c] * k[b * m + c];
      scores[a * length + b] = s * scale;
    }
  }
  softmax_rows(scores, length);
  return scores;
}

// Residual-updated cost channel only: tokens[:,0] + (P V O)[:,0].
std::vector<double> attend_cost_channel(const DMatrix& tokens, std::size_t length, const AttentionBlock& block) {
  const std::size_t m = block.query.rows;
  const DMatrix p = probabilities(tokens, length, block);
  const DMatrix v = multiply(tokens, length, m, block.value);
  // (V O)[:,0] collapses the output projection to one column.
  std::vector<double> vo(length, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += v[t * m + c] * block.output(c, 0);
    vo[t] = s;
  }
  std::vector<double> out(length);
  for (std::size_t a = 0; a < length; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < length; ++b) s += p[a * length + b] * vo[b];
    out[a] = tokens[a * m] + s;
  }
  return out;
}

void check_block(const AttentionBlock& b, std::size_t m) {
  for (const Matrix* mat : {&b.query, &b.key, &b.value, &b.output}) {
    if (mat->rows != m || mat->cols != m || mat->data.size() != m * m) {
      throw Error(ErrorKind::kShapeMismatch, "attention matrix must be " + std::to_string(m) + "x" +
                                                 std::to_string(m));
    }
    for (float v : mat->data) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kNonFinite, "non-finite attention weight");
    }
  }
}

void check_iteration(const AggregationWeights& w, std::size_t iteration, std::size_t embed_dim) {
  if (iteration >= w.iterations()) {
    throw Error(ErrorKind::kOutOfRange, "iteration " + std::to_string(iteration) + " >= K = " +
                                            std::to_string(w.iterations()));
  }
  if (embed_dim != w.embed_dim) {
    throw Error(ErrorKind::kDimensionMismatch, "weights expect embedding dim " + std::to_string(w.embed_dim) +
                                                   ", got " + std::to_string(embed_dim));
  }
}

Matrix random_matrix(std::uint64_t seed, const std::string& name, std::size_t rows, std::size_t cols) {
  SplitMix64 rng(derive_seed(seed, name));
  Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.next_float(-AggregationWeights::kInitScale, AggregationWeights::kInitScale);
  return m;
}

}  // namespace

void AggregationWeights::validate() const {
  if (spatial.size() != cross_class.size()) {
    throw Error(ErrorKind::kShapeMismatch, "spatial and class block counts differ");
  }
  if (spatial.empty()) return;
  if (embed_dim == 0 || guidance_dim == 0) {
    throw Error(ErrorKind::kShapeMismatch, "embed_dim and guidance_dim must be positive");
  }
  for (const Matrix* p : {&visual_projection, &text_projection}) {
    if (p->rows != embed_dim || p->cols != guidance_dim || p->data.size() != embed_dim * guidance_dim) {
      throw Error(ErrorKind::kShapeMismatch, "projection must be embed_dim x guidance_dim");
    }
    for (float v : p->data) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kNonFinite, "non-finite projection weight");
    }
  }
  for (std::size_t k = 0; k < spatial.size(); ++k) {
    check_block(spatial[k], model_dim());
    check_block(cross_class[k], model_dim());
  }
}

AggregationWeights AggregationWeights::none() {
  AggregationWeights w;
  w.provenance = "none";
  return w;
}

AggregationWeights AggregationWeights::initialize(std::uint64_t seed, std::size_t iterations,
                                                  std::size_t embed_dim, std::size_t guidance_dim) {
  AggregationWeights w;
  w.embed_dim = embed_dim;
  w.guidance_dim = guidance_dim;
  w.provenance = "splitmix64-uniform(seed=" + std::to_string(seed) + ")";
  if (iterations == 0) return w;
  const std::size_t m = w.model_dim();
  w.visual_projection = random_matrix(seed, "visual_projection", embed_dim, guidance_dim);
  w.text_projection = random_matrix(seed, "text_projection", embed_dim, guidance_dim);
  for (std::size_t k = 0; k < iterations; ++k) {
    const std::string sa = "spatial." + std::to_string(k) + ".";
    const std::string ca = "class." + std::to_string(k) + ".";
    w.spatial.push_back({random_matrix(seed, sa + "query", m, m), random_matrix(seed, sa + "key", m, m),
                         random_matrix(seed, sa + "value", m, m), random_matrix(seed, sa + "output", m, m)});
    w.cross_class.push_back({random_matrix(seed, ca + "query", m, m), random_matrix(seed, ca + "key", m, m),
                             random_matrix(seed, ca + "value", m, m), random_matrix(seed, ca + "output", m, m)});
  }
  return w;
}

Matrix attention_probabilities(const Matrix& tokens, const AttentionBlock& block) {
  check_block(block, tokens.cols);
  const DMatrix in(tokens.data.begin(), tokens.data.end());
  const DMatrix p = probabilities(in, tokens.rows, block);
  Matrix out(tokens.rows, tokens.rows);
  std::transform(p.begin(), p.end(), out.data.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

Matrix attend(const Matrix& tokens, const AttentionBlock& block) {
  check_block(block, tokens.cols);
  const std::size_t length = tokens.rows;
  const std::size_t m = tokens.cols;
  const DMatrix in(tokens.data.begin(), tokens.data.end());
  const DMatrix p = probabilities(in, length, block);
  const DMatrix v = multiply(in, length, m, block.value);
  DMatrix pv(length * m, 0.0);
  for (std::size_t a = 0; a < length; ++a) {
    for (std::size_t b = 0; b < length; ++b) {
      const double weight = p[a * length + b];
      for (std::size_t c = 0; c < m; ++c) pv[a * m + c] += weight * v[b * m + c];
    }
  }
  const DMatrix o = multiply(pv, length, m, block.output);
  Matrix out(length, m);
  for (std::size_t i = 0; i < length * m; ++i) out.data[i] = static_cast<float>(in[i] + o[i]);
  return out;
}

CostVolume spatial_aggregate(const CostVolume& features, const DenseImageEmbedding& img,
                             const AggregationWeights& w, std::size_t iteration) {
  check_iteration(w, iteration, img.dim());
  if (features.height != img.height() || features.width != img.width() ||
      features.values.size() != features.locations() * features.classes) {
    throw Error(ErrorKind::kShapeMismatch, "feature grid does not match image embedding grid");
  }
  const auto& block = w.spatial[iteration];
  check_block(block, w.model_dim());
  const std::size_t length = features.locations();
  const std::size_t m = w.model_dim();
  const DMatrix guidance = project_guidance(img.as_matrix(), w.visual_projection);

  CostVolume out = features;
  DMatrix tokens(length * m);
  for (std::size_t t = 0; t < length; ++t) {
    std::copy_n(guidance.begin() + t * w.guidance_dim, w.guidance_dim, tokens.begin() + t * m + 1);
  }
  for (std::size_t n = 0; n < features.classes; ++n) {
    for (std::size_t t = 0; t < length; ++t) tokens[t * m] = features.at(t, n);
    const auto cost = attend_cost_channel(tokens, length, block);
    for (std::size_t t = 0; t < length; ++t) out.at(t, n) = static_cast<float>(cost[t]);
  }
  return out;
}

CostVolume class_aggregate(const CostVolume& features, const TextEmbeddingSet& txt, const AggregationWeights& w,
                           std::size_t iteration) {
  check_iteration(w, iteration, txt.dim());
  if (features.classes != txt.size() || features.values.size() != features.locations() * features.classes) {
    throw Error(ErrorKind::kShapeMismatch, "feature class count does not match text embedding count");
  }
  const auto& block = w.cross_class[iteration];
  check_block(block, w.model_dim());
  const std::size_t length = features.classes;
  const std::size_t m = w.model_dim();
  const DMatrix guidance = project_guidance(txt.vectors(), w.text_projection);

  CostVolume out = features;
  DMatrix tokens(length * m);
  for (std::size_t n = 0; n < length; ++n) {
    std::copy_n(guidance.begin() + n * w.guidance_dim, w.guidance_dim, tokens.begin() + n * m + 1);
  }
  for (std::size_t i = 0; i < features.locations(); ++i) {
    for (std::size_t n = 0; n < length; ++n) tokens[n * m] = features.at(i, n);
    const auto cost = attend_cost_channel(tokens, length, block);
    for (std::size_t n = 0; n < length; ++n) out.at(i, n) = static_cast<float>(cost[n]);
  }
  return out;
}

CostVolume aggregate(const CostVolume& cost, const DenseImageEmbedding& img, const TextEmbeddingSet& txt,
                     const AggregationWeights& w) {
  w.validate();
  CostVolume f = cost;
  for (std::size_t k = 0; k < w.iterations(); ++k) {
    f = class_aggregate(spatial_aggregate(f, img, w, k), txt, w, k);
  }
  return f;
}

}  // namespace vfss
