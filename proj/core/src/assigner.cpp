#include "vfss/assigner.hpp"

#include <map>

#include "vfss/error.hpp"

namespace vfss {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::optional<std::size_t> exact_match(const std::string& canonical,
                                       const std::map<std::string, std::size_t>& vocab_index) {
  if (auto it = vocab_index.find(canonical); it != vocab_index.end()) return it->second;
  return std::nullopt;
}

// canonical name -> first vocabulary index with that canonical form.
std::map<std::string, std::size_t> index_vocabulary(std::span<const std::string> gt_vocab) {
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < gt_vocab.size(); ++j) index.emplace(canonicalize(gt_vocab[j]), j);
  return index;
}

class EmbedderLookup {
 public:
  explicit EmbedderLookup(const TextEmbeddingSet& embedder) : embedder_(embedder) {
    for (std::size_t r = 0; r < embedder.size(); ++r) canonical_.emplace(canonicalize(embedder.names()[r]), r);
  }

  std::span<const float> row(const std::string& name) const {
    if (auto r = embedder_.find(name)) return embedder_.row(*r);
    if (auto it = canonical_.find(canonicalize(name)); it != canonical_.end()) return embedder_.row(it->second);
    throw Error(ErrorKind::kMissingEmbedding, "no sentence embedding for '" + name + "'");
  }

 private:
  const TextEmbeddingSet& embedder_;
  std::map<std::string, std::size_t> canonical_;
};

}  // namespace

std::string_view to_string(AssignmentMode mode) { return mode == AssignmentMode::kHard ? "hard" : "soft"; }

std::size_t AssignmentMap::matched_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.match.has_value();
  return n;
}

nlohmann::json AssignmentMap::to_json() const {
  nlohmann::json table = nlohmann::json::object();
  for (const auto& e : entries) {
    if (e.match) {
      table[e.predicted] = {{"gt", e.match->gt}, {"score", e.match->score}};
    } else {
      table[e.predicted] = nullptr;
    }
  }
  nlohmann::json doc;
  doc["mode"] = std::string(to_string(mode));
  doc["threshold"] = mode == AssignmentMode::kSoft ? nlohmann::json(threshold) : nlohmann::json(nullptr);
  doc["assignments"] = std::move(table);
  return doc;
}

std::string canonicalize(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char c : name) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

AssignmentMap hard_assign(std::span<const std::string> predicted, std::span<const std::string> gt_vocab) {
  const auto vocab_index = index_vocabulary(gt_vocab);
  AssignmentMap out;
  out.mode = AssignmentMode::kHard;
  out.threshold = 1.0;
  out.entries.reserve(predicted.size());
  for (const auto& p : predicted) {
    AssignmentEntry e{p, std::nullopt};
    if (auto j = exact_match(canonicalize(p), vocab_index)) e.match = Match{gt_vocab[*j], *j, 1.0};
    out.entries.push_back(std::move(e));
  }
  return out;
}

AssignmentMap soft_assign(std::span<const std::string> predicted, std::span<const std::string> gt_vocab,
                          const TextEmbeddingSet& embedder, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::kOutOfRange, "soft assignment threshold must lie in [0, 1]");
  }
  const auto vocab_index = index_vocabulary(gt_vocab);
  const EmbedderLookup lookup(embedder);

  AssignmentMap out;
  out.mode = AssignmentMode::kSoft;
  out.threshold = threshold;
  out.entries.reserve(predicted.size());

  // Vocabulary rows are resolved lazily: only needed when some name misses.
  std::vector<std::span<const float>> vocab_rows;
  for (const auto& p : predicted) {
    AssignmentEntry e{p, std::nullopt};
    if (auto j = exact_match(canonicalize(p), vocab_index)) {
      e.match = Match{gt_vocab[*j], *j, 1.0};
      out.entries.push_back(std::move(e));
      continue;
    }
    if (gt_vocab.empty()) {
      out.entries.push_back(std::move(e));
      continue;
    }
    if (vocab_rows.empty()) {
      vocab_rows.reserve(gt_vocab.size());
      for (const auto& g : gt_vocab) vocab_rows.push_back(lookup.row(g));
    }
    const auto query = lookup.row(p);
    std::size_t best = 0;
    double best_sim = cosine(query, vocab_rows[0]);
    for (std::size_t j = 1; j < gt_vocab.size(); ++j) {
      const double sim = cosine(query, vocab_rows[j]);
      if (sim > best_sim) {
        best_sim = sim;
        best = j;
      }
    }
    // A zero threshold assigns every name, even one whose best similarity is negative.
    if (best_sim >= threshold || threshold == 0.0) e.match = Match{gt_vocab[best], best, best_sim};
    out.entries.push_back(std::move(e));
  }
  return out;
}

SegmentationMap apply_assignment(const SegmentationMap& prediction, const AssignmentMap& assignment,
                                 std::span<const std::string> gt_vocab) {
  std::vector<std::uint16_t> lut(assignment.entries.size(), kUnmatchedLabel);
  for (std::size_t k = 0; k < assignment.entries.size(); ++k) {
    const auto& m = assignment.entries[k].match;
    if (!m) continue;
    if (m->gt_index >= gt_vocab.size()) {
      throw Error(ErrorKind::kOutOfRange, "assignment target index " + std::to_string(m->gt_index) +
                                              " outside vocabulary of " + std::to_string(gt_vocab.size()));
    }
    lut[k] = static_cast<std::uint16_t>(m->gt_index);
  }
  SegmentationMap out(prediction.height, prediction.width, kUnmatchedLabel);
  for (std::size_t i = 0; i < prediction.labels.size(); ++i) {
    const auto label = prediction.labels[i];
    if (label == kIgnoreLabel) continue;
    if (label >= lut.size()) {
      throw Error(ErrorKind::kOutOfRange, "prediction label " + std::to_string(label) + " has no assignment entry");
    }
    out.labels[i] = lut[label];
  }
  return out;
}

}  // namespace vfss
