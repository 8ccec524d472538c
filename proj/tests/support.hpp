#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "vfss/embed.hpp"
#include "vfss/rng.hpp"
#include "vfss/segmenter.hpp"
#include "vfss/tensor_io.hpp"

namespace vfss::test {

inline std::filesystem::path data_dir() { return std::filesystem::path(VFSS_TEST_DATA_DIR); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vfss_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> random_floats(SplitMix64& rng, std::size_t n, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.next_float(lo, hi);
  return v;
}

// Rows bounded away from zero norm.
inline std::vector<float> random_rows(SplitMix64& rng, std::size_t rows, std::size_t dim) {
  std::vector<float> v = random_floats(rng, rows * dim);
  for (std::size_t r = 0; r < rows; ++r) v[r * dim] += v[r * dim] >= 0 ? 0.5f : -0.5f;
  return v;
}

inline DenseImageEmbedding random_image(SplitMix64& rng, std::size_t h, std::size_t w, std::size_t d) {
  return DenseImageEmbedding(h, w, d, random_rows(rng, h * w, d));
}

inline std::vector<std::string> class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) names.push_back("class_" + std::to_string(k));
  return names;
}

inline TextEmbeddingSet random_text(SplitMix64& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  m.data = random_rows(rng, n, d);
  return TextEmbeddingSet(class_names(n), std::move(m));
}

inline Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, float scale = 1.0f) {
  Matrix m(rows, cols);
  m.data = random_floats(rng, rows * cols, -scale, scale);
  return m;
}

// Scalar-loop cosine, written independently of the library.
inline double oracle_cosine(const float* u, const float* v, std::size_t d) {
  double uv = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    uv += static_cast<double>(u[k]) * v[k];
    uu += static_cast<double>(u[k]) * u[k];
    vv += static_cast<double>(v[k]) * v[k];
  }
  return uv / std::sqrt(uu * vv);
}

using Grid = std::vector<std::vector<double>>;

inline Grid matmul(const Grid& a, const Matrix& b) {
  Grid out(a.size(), std::vector<double>(b.cols, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.rows; ++k) s += a[i][k] * b(k, j);
      out[i][j] = s;
    }
  }
  return out;
}

// Full softmax attention with explicit Q, K, V, O products; returns the
// updated token matrix.
inline Grid oracle_attend(const Grid& tokens, const AttentionBlock& blk) {
  const Grid q = matmul(tokens, blk.query);
  const Grid k = matmul(tokens, blk.key);
  const Grid v = matmul(tokens, blk.value);
  const std::size_t len = tokens.size();
  const std::size_t m = tokens.front().size();
  Grid mixed(len, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> s(len);
    for (std::size_t j = 0; j < len; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m; ++c) acc += q[i][c] * k[j][c];
      s[j] = acc / std::sqrt(static_cast<double>(m));
    }
    const double top = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (auto& x : s) z += (x = std::exp(x - top));
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t c = 0; c < m; ++c) mixed[i][c] += s[j] / z * v[j][c];
    }
  }
  Grid out = matmul(mixed, blk.output);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t c = 0; c < m; ++c) out[i][c] += tokens[i][c];
  }
  return out;
}

// Guidance rows: normalised embedding times projection.
inline Grid oracle_guidance(const std::vector<std::vector<float>>& rows, const Matrix& proj) {
  Grid unit;
  for (const auto& r : rows) {
    double n = 0.0;
    for (float x : r) n += static_cast<double>(x) * x;
    n = std::sqrt(n);
    std::vector<double> u;
    for (float x : r) u.push_back(x / n);
    unit.push_back(std::move(u));
  }
  return matmul(unit, proj);
}

// Reference for K rounds of spatial-then-class aggregation, kept in double
// between rounds.
inline Grid oracle_aggregate(const DenseImageEmbedding& img, const TextEmbeddingSet& txt,
                             const AggregationWeights& w) {
  const std::size_t hw = img.pixels();
  const std::size_t n = txt.size();
  Grid f(hw, std::vector<double>(n));
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < n; ++c) f[i][c] = oracle_cosine(img.pixel(i).data(), txt.row(c).data(), img.dim());
  }
  std::vector<std::vector<float>> pix;
  for (std::size_t i = 0; i < hw; ++i) pix.emplace_back(img.pixel(i).begin(), img.pixel(i).end());
  std::vector<std::vector<float>> cls;
  for (std::size_t c = 0; c < n; ++c) cls.emplace_back(txt.row(c).begin(), txt.row(c).end());
  const Grid gv = oracle_guidance(pix, w.visual_projection);
  const Grid gl = oracle_guidance(cls, w.text_projection);
  for (std::size_t it = 0; it < w.iterations(); ++it) {
    for (std::size_t c = 0; c < n; ++c) {
      Grid tokens;
      for (std::size_t i = 0; i < hw; ++i) {
        std::vector<double> t{f[i][c]};
        t.insert(t.end(), gv[i].begin(), gv[i].end());
        tokens.push_back(std::move(t));
      }
      const Grid out = oracle_attend(tokens, w.spatial[it]);
      for (std::size_t i = 0; i < hw; ++i) f[i][c] = out[i][0];
    }
    for (std::size_t i = 0; i < hw; ++i) {
      Grid tokens;
      for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> t{f[i][c]};
        t.insert(t.end(), gl[c].begin(), gl[c].end());
        tokens.push_back(std::move(t));
      }
      const Grid out = oracle_attend(tokens, w.cross_class[it]);
      for (std::size_t c = 0; c < n; ++c) f[i][c] = out[c][0];
    }
  }
  return f;
}

struct SetIou {
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;
};

// Per-class pixel-index sets over scored (non-ignore GT) pixels.
inline std::vector<SetIou> oracle_set_iou(const SegmentationMap& gt, const SegmentationMap& pred,
                                          std::size_t classes) {
  std::vector<SetIou> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::set<std::size_t> g;
    std::set<std::size_t> p;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      if (gt.labels[i] == kIgnoreLabel) continue;
      if (gt.labels[i] == c) g.insert(i);
      if (pred.labels[i] == c) p.insert(i);
    }
    std::set<std::size_t> both;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::inserter(both, both.begin()));
    std::set<std::size_t> either;
    std::set_union(g.begin(), g.end(), p.begin(), p.end(), std::inserter(either, either.begin()));
    out[c] = {both.size(), either.size()};
  }
  return out;
}

// Exact mean of the nonzero-union IoU fractions as a rational, rounded once.
inline double oracle_miou(const std::vector<SetIou>& per_class) {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  std::uint64_t count = 0;
  for (const auto& s : per_class) {
    if (s.uni == 0) continue;
    const std::uint64_t l = std::lcm(den, s.uni);
    num = num * (l / den) + s.intersection * (l / s.uni);
    den = l;
    const std::uint64_t g = std::gcd(num, den);
    num /= g == 0 ? 1 : g;
    den /= g == 0 ? 1 : g;
    ++count;
  }
  if (count == 0) return 0.0;
  return static_cast<double>(num) / static_cast<double>(den * count);
}

inline SegmentationMap random_segmap(SplitMix64& rng, std::uint32_t h, std::uint32_t w, std::size_t classes,
                                     std::uint16_t extra_label, std::uint64_t extra_one_in) {
  SegmentationMap m(h, w, 0);
  for (auto& l : m.labels) {
    l = rng.next_below(extra_one_in) == 0 ? extra_label : static_cast<std::uint16_t>(rng.next_below(classes));
  }
  return m;
}

}  // namespace vfss::test
