#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfss/assigner.hpp"
#include "vfss/embed.hpp"
#include "vfss/metrics.hpp"
#include "vfss/segmenter.hpp"
#include "vfss/tensor_io.hpp"

namespace vfss {

struct ImageRecord {
  std::string image_id;
  DenseImageEmbedding embedding;
  SegmentationMap gt;
  // Tags from the entry's tag file, when it lists this image.
  std::optional<std::vector<std::string>> file_tags;
};

// A manifest with every referenced file loaded into memory.
class Dataset {
 public:
  static Dataset load(const DatasetManifest& manifest);

  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  // Vocabulary rows followed by any extra open-ended rows; used for the cost
  // volume.
  const TextEmbeddingSet& text_bank() const noexcept { return text_bank_; }
  // Rows used for soft assignment: the sentence bank when the manifest has
  // one, otherwise text_bank().
  const TextEmbeddingSet& sentence_bank() const noexcept { return sentence_bank_ ? *sentence_bank_ : text_bank_; }
  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const ImageRecord* find(std::string_view image_id) const;

 private:
  Dataset(std::vector<std::string> vocabulary, TextEmbeddingSet text_bank,
          std::optional<TextEmbeddingSet> sentence_bank, std::vector<ImageRecord> images)
      : vocabulary_(std::move(vocabulary)),
        text_bank_(std::move(text_bank)),
        sentence_bank_(std::move(sentence_bank)),
        images_(std::move(images)) {}

  std::vector<std::string> vocabulary_;
  TextEmbeddingSet text_bank_;
  std::optional<TextEmbeddingSet> sentence_bank_;
  std::vector<ImageRecord> images_;
};

// Names of the classes present in a GT map, in vocabulary order. This is the
// perfect-tagger class list.
std::vector<std::string> oracle_tags(const SegmentationMap& gt, std::span<const std::string> vocabulary);

// A prediction whose labels index into `classes`.
struct Prediction {
  std::string image_id;
  std::vector<std::string> classes;
  SegmentationMap map;
};

// Segments every image with the given per-image class lists (parallel over
// images, result order = dataset order).
std::vector<Prediction> segment_dataset(const Dataset& dataset,
                                        std::span<const std::vector<std::string>> classes_per_image,
                                        const AggregationWeights& weights, unsigned threads);

struct EvaluationResult {
  IouResult hard;
  IouResult soft;
  TaggingStats hard_tagging;
  TaggingStats soft_tagging;
  std::map<std::string, AssignmentMap> hard_assignments;
  std::map<std::string, AssignmentMap> soft_assignments;
};

// Hard and soft mIoU over one dataset-wide confusion matrix each, plus
// tagging statistics. Throws kMissingPrediction if an image has no
// prediction.
EvaluationResult evaluate_predictions(const Dataset& dataset, std::span<const Prediction> predictions,
                                      double threshold, unsigned threads);

}  // namespace vfss
