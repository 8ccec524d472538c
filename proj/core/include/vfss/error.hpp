#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vfss {

enum class ErrorKind {
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kUnsupportedDtype,
  kTruncated,
  kTrailingBytes,
  kZeroDim,
  kBadRank,
  kDimensionOverflow,
  kInvariant,
  kParse,
  kDuplicate,
  kCountMismatch,
  kMissingFile,
  kDegenerateVector,
  kDimensionMismatch,
  kShapeMismatch,
  kNonFinite,
  kUnknownClass,
  kMissingEmbedding,
  kOutOfRange,
  kMisaligned,
  kEmpty,
  kConfig,
  kMissingTags,
  kMissingPrediction,
  kMonotonicity,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers and tests can
// tell format violations apart without matching on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vfss
