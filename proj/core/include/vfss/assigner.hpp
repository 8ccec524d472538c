#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vfss/embed.hpp"
#include "vfss/tensor_io.hpp"

namespace vfss {

enum class AssignmentMode { kHard, kSoft };

std::string_view to_string(AssignmentMode mode);

struct Match {
  std::string gt;
  std::size_t gt_index = 0;
  double score = 1.0;

  bool operator==(const Match&) const = default;
};

struct AssignmentEntry {
  std::string predicted;
  std::optional<Match> match;  // nullopt = unmatched

  bool operator==(const AssignmentEntry&) const = default;
};

// One entry per input predicted name, in input order, so a prediction label
// index selects its entry directly.
struct AssignmentMap {
  AssignmentMode mode = AssignmentMode::kHard;
  double threshold = 1.0;
  std::vector<AssignmentEntry> entries;

  std::size_t matched_count() const;
  // {"mode", "threshold", "assignments": {predicted: {"gt", "score"} | null}}
  nlohmann::json to_json() const;
};

// ASCII lowercase, trimmed, internal whitespace runs collapsed to one space.
std::string canonicalize(std::string_view name);

// Matched iff the canonical form equals that of some vocabulary name (the
// first such name in vocabulary order).
AssignmentMap hard_assign(std::span<const std::string> predicted, std::span<const std::string> gt_vocab);

// Exact canonical matches short-circuit with score 1. Every other name goes to
// the vocabulary name of highest cosine similarity in `embedder` if that
// similarity is >= threshold (ties to the earliest vocabulary name); else
// unmatched. At threshold 0 every name is matched. Throws kMissingEmbedding for a name without an embedder row and
// kOutOfRange for a threshold outside [0, 1].
AssignmentMap soft_assign(std::span<const std::string> predicted, std::span<const std::string> gt_vocab,
                          const TextEmbeddingSet& embedder, double threshold);

// Relabels a prediction over predicted-name indices into vocabulary indices.
// Unmatched names and ignore pixels become kUnmatchedLabel. Names sharing a
// target merge.
SegmentationMap apply_assignment(const SegmentationMap& prediction, const AssignmentMap& assignment,
                                 std::span<const std::string> gt_vocab);

}  // namespace vfss
