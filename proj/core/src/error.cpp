#include "vfss/error.hpp"

namespace vfss {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kBadMagic: return "bad-magic";
    case ErrorKind::kUnsupportedVersion: return "unsupported-version";
    case ErrorKind::kUnsupportedDtype: return "unsupported-dtype";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kTrailingBytes: return "trailing-bytes";
    case ErrorKind::kZeroDim: return "zero-dim";
    case ErrorKind::kBadRank: return "bad-rank";
    case ErrorKind::kDimensionOverflow: return "dimension-overflow";
    case ErrorKind::kInvariant: return "invariant";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kDuplicate: return "duplicate";
    case ErrorKind::kCountMismatch: return "count-mismatch";
    case ErrorKind::kMissingFile: return "missing-file";
    case ErrorKind::kDegenerateVector: return "degenerate-vector";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kUnknownClass: return "unknown-class";
    case ErrorKind::kMissingEmbedding: return "missing-embedding";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kMisaligned: return "misaligned";
    case ErrorKind::kEmpty: return "empty";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kMissingTags: return "missing-tags";
    case ErrorKind::kMissingPrediction: return "missing-prediction";
    case ErrorKind::kMonotonicity: return "monotonicity";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what),
      kind_(kind) {}

}  // namespace vfss
