#include "vfss/metrics.hpp"

#include <cstdint>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "vfss/error.hpp"

namespace vfss {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

void ConfusionMatrix::accumulate(const SegmentationMap& gt, const SegmentationMap& pred) {
  if (gt.height != pred.height || gt.width != pred.width || gt.labels.size() != pred.labels.size()) {
    throw Error(ErrorKind::kShapeMismatch, "ground truth " + std::to_string(gt.height) + "x" +
                                               std::to_string(gt.width) + " vs prediction " +
                                               std::to_string(pred.height) + "x" + std::to_string(pred.width));
  }
  const std::size_t stride = classes_ + 1;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const auto g = gt.labels[i];
    if (g == kIgnoreLabel) continue;
    if (g >= classes_) {
      throw Error(ErrorKind::kOutOfRange, "ground-truth label " + std::to_string(g) + " >= " +
                                              std::to_string(classes_));
    }
    const auto p = pred.labels[i];
    std::size_t col = 0;
    if (p == kUnmatchedLabel) {
      col = classes_;
    } else if (p < classes_) {
      col = p;
    } else {
      throw Error(ErrorKind::kOutOfRange, "prediction label " + std::to_string(p) + " >= " +
                                              std::to_string(classes_));
    }
    ++counts_[g * stride + col];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw Error(ErrorKind::kShapeMismatch, "confusion matrices differ in size");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
  return *this;
}

ConfusionMatrix accumulate(ConfusionMatrix conf, const SegmentationMap& gt, const SegmentationMap& pred) {
  conf.accumulate(gt, pred);
  return conf;
}

namespace {

constexpr std::uint64_t kExactLimit = std::uint64_t{1} << 53;

// Running sum of IoU fractions kept as a reduced rational while it stays exactly representable.
class ExactMean {
 public:
  void add(std::uint64_t num, std::uint64_t den) {
    approx_ += static_cast<long double>(num) / static_cast<long double>(den);
    if (!exact_) return;
    const std::uint64_t g = std::gcd(den_, den);
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint64_t d = 0;
    if (__builtin_mul_overflow(num_, den / g, &a) || __builtin_mul_overflow(num, den_ / g, &b) ||
        __builtin_add_overflow(a, b, &a) || __builtin_mul_overflow(den_, den / g, &d)) {
      exact_ = false;
      return;
    }
    const std::uint64_t r = std::gcd(a, d);
    num_ = a / r;
    den_ = d / r;
  }

  double mean(std::uint64_t count) const {
    std::uint64_t den = 0;
    if (exact_ && !__builtin_mul_overflow(den_, count, &den) && num_ < kExactLimit && den < kExactLimit) {
      return static_cast<double>(num_) / static_cast<double>(den);
    }
    return static_cast<double>(approx_ / static_cast<long double>(count));
  }

 private:
  std::uint64_t num_ = 0;
  std::uint64_t den_ = 1;
  bool exact_ = true;
  long double approx_ = 0.0L;
};

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

IouResult miou(const ConfusionMatrix& conf) {
  if (conf.total() == 0) throw Error(ErrorKind::kEmpty, "mIoU of an empty confusion matrix");
  const std::size_t n = conf.classes();
  IouResult r;
  r.per_class.assign(n, std::nullopt);
  ExactMean sum;
  for (std::size_t c = 0; c < n; ++c) {
    const std::uint64_t tp = conf.at(c, c);
    std::uint64_t row = 0;
    for (std::size_t p = 0; p <= n; ++p) row += conf.at(c, p);
    std::uint64_t col = 0;
    for (std::size_t g = 0; g < n; ++g) col += conf.at(g, c);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class[c] = iou;
    sum.add(tp, uni);
    ++r.scored_classes;
  }
  r.miou = r.scored_classes == 0 ? 0.0 : sum.mean(r.scored_classes);
  return r;
}

nlohmann::json TaggingStats::to_json(bool include_macro) const {
  nlohmann::json doc;
  doc["acc"] = acc ? nlohmann::json(*acc) : nlohmann::json(nullptr);
  if (include_macro) doc["acc_macro"] = acc_macro ? nlohmann::json(*acc_macro) : nlohmann::json(nullptr);
  doc["fp_mean"] = fp_mean;
  doc["fn_mean"] = fn_mean;
  nlohmann::json per_image = nlohmann::json::object();
  for (const auto& im : images) {
    per_image[im.image_id] = {{"gt_classes", im.gt_classes},
                              {"matched", im.matched},
                              {"missed", im.missed},
                              {"false_positives", im.false_positives}};
  }
  doc["images"] = std::move(per_image);
  return doc;
}

TaggingStats tagging_stats(const std::map<std::string, std::vector<std::string>>& gt_classes,
                           const std::map<std::string, AssignmentMap>& assignments) {
  if (gt_classes.size() != assignments.size()) {
    throw Error(ErrorKind::kMisaligned, "GT class sets and assignments cover different images");
  }
  TaggingStats stats;
  std::size_t total_gt = 0;
  std::size_t total_matched = 0;
  std::size_t total_fp = 0;
  std::size_t total_missed = 0;
  double recall_sum = 0.0;
  std::size_t recall_images = 0;
  for (const auto& [id, classes] : gt_classes) {
    auto it = assignments.find(id);
    if (it == assignments.end()) {
      throw Error(ErrorKind::kMisaligned, "no assignment for image '" + id + "'");
    }
    const std::set<std::string> gt_set(classes.begin(), classes.end());
    std::set<std::string> hit;
    ImageTagging im;
    im.image_id = id;
    im.gt_classes = gt_set.size();
    for (const auto& e : it->second.entries) {
      if (e.match && gt_set.contains(e.match->gt)) {
        hit.insert(e.match->gt);
      } else {
        ++im.false_positives;
      }
    }
    im.matched = hit.size();
    im.missed = gt_set.size() - hit.size();
    if (im.matched + im.missed != im.gt_classes) {
      throw Error(ErrorKind::kInvariant, "matched + missed != GT class count for '" + id + "'");
    }
    total_gt += im.gt_classes;
    total_matched += im.matched;
    total_missed += im.missed;
    total_fp += im.false_positives;
    if (im.gt_classes > 0) {
      recall_sum += static_cast<double>(im.matched) / static_cast<double>(im.gt_classes);
      ++recall_images;
    }
    stats.images.push_back(std::move(im));
  }
  if (total_gt > 0) stats.acc = 100.0 * static_cast<double>(total_matched) / static_cast<double>(total_gt);
  if (recall_images > 0) stats.acc_macro = 100.0 * recall_sum / static_cast<double>(recall_images);
  if (!gt_classes.empty()) {
    const auto images = static_cast<double>(gt_classes.size());
    stats.fp_mean = static_cast<double>(total_fp) / images;
    stats.fn_mean = static_cast<double>(total_missed) / images;
  }
  return stats;
}

std::string per_class_csv(std::span<const std::string> names, const IouResult& result) {
  if (names.size() != result.per_class.size()) {
    throw Error(ErrorKind::kCountMismatch, "class names and IoU table differ in length");
  }
  std::string out = "class,iou\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& iou = result.per_class[c];
    out += csv_field(names[c]);
    out += ',';
    if (iou) out += fmt::format("{:.6f}", *iou);
    out += '\n';
  }
  return out;
}

}  // namespace vfss
