#include <algorithm>
#include <cmath>
#include <limits>

#include "vfss/error.hpp"
#include "vfss/segmenter.hpp"

namespace vfss {
namespace {

// Source taps for one output coordinate along an axis.
struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of `hi`
};

std::vector<Tap> axis_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

void check_targets(std::size_t h, std::size_t w, std::size_t th, std::size_t tw) {
  if (h == 0 || w == 0) throw Error(ErrorKind::kZeroDim, "upsample: empty feature grid");
  if (th < h || tw < w) {
    throw Error(ErrorKind::kShapeMismatch, "upsample: target " + std::to_string(th) + "x" + std::to_string(tw) +
                                               " smaller than features " + std::to_string(h) + "x" +
                                               std::to_string(w));
  }
}

}  // namespace

std::vector<double> bilinear_resize(std::span<const float> channel, std::size_t height, std::size_t width,
                                    std::size_t target_height, std::size_t target_width) {
  check_targets(height, width, target_height, target_width);
  if (channel.size() != height * width) throw Error(ErrorKind::kShapeMismatch, "channel size != H*W");
  const auto ys = axis_taps(height, target_height);
  const auto xs = axis_taps(width, target_width);
  std::vector<double> out(target_height * target_width);
  for (std::size_t y = 0; y < target_height; ++y) {
    const Tap& ty = ys[y];
    for (std::size_t x = 0; x < target_width; ++x) {
      const Tap& tx = xs[x];
      const double a = channel[ty.lo * width + tx.lo];
      const double b = channel[ty.lo * width + tx.hi];
      const double c = channel[ty.hi * width + tx.lo];
      const double d = channel[ty.hi * width + tx.hi];
      const double top = a + tx.frac * (b - a);
      const double bottom = c + tx.frac * (d - c);
      out[y * target_width + x] = top + ty.frac * (bottom - top);
    }
  }
  return out;
}

SegmentationMap upsample_and_argmax(const CostVolume& features, std::size_t target_height,
                                    std::size_t target_width, std::span<const std::string> names) {
  if (names.empty()) throw Error(ErrorKind::kEmpty, "upsample_and_argmax: empty class list");
  if (names.size() != features.classes) {
    throw Error(ErrorKind::kShapeMismatch, "class list length does not match feature channels");
  }
  if (features.classes >= kUnmatchedLabel) {
    throw Error(ErrorKind::kOutOfRange, "too many classes for 16-bit labels");
  }
  check_targets(features.height, features.width, target_height, target_width);
  const auto ys = axis_taps(features.height, target_height);
  const auto xs = axis_taps(features.width, target_width);
  const std::size_t n_classes = features.classes;
  const std::size_t w = features.width;

  SegmentationMap map(static_cast<std::uint32_t>(target_height), static_cast<std::uint32_t>(target_width));
  for (std::size_t y = 0; y < target_height; ++y) {
    const Tap& ty = ys[y];
    for (std::size_t x = 0; x < target_width; ++x) {
      const Tap& tx = xs[x];
      const std::size_t ia = ty.lo * w + tx.lo;
      const std::size_t ib = ty.lo * w + tx.hi;
      const std::size_t ic = ty.hi * w + tx.lo;
      const std::size_t id = ty.hi * w + tx.hi;
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t n = 0; n < n_classes; ++n) {
        const double a = features.at(ia, n);
        const double b = features.at(ib, n);
        const double c = features.at(ic, n);
        const double d = features.at(id, n);
        const double top = a + tx.frac * (b - a);
        const double bottom = c + tx.frac * (d - c);
        const double score = top + ty.frac * (bottom - top);
        if (score > best_score) {
          best_score = score;
          best = n;
        }
      }
      map.labels[y * target_width + x] = static_cast<std::uint16_t>(best);
    }
  }
  return map;
}

}  // namespace vfss
