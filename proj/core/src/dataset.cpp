#include "vfss/dataset.hpp"

#include <map>

#include "vfss/error.hpp"
#include "vfss/parallel.hpp"

namespace vfss {
namespace {

TextEmbeddingSet load_bank(const NamedBankPaths& paths) {
  return TextEmbeddingSet::from_container(read_name_list(paths.names_path), read_embedding(paths.embeddings_path));
}

}  // namespace

Dataset Dataset::load(const DatasetManifest& manifest) {
  TextEmbeddingSet text = TextEmbeddingSet::from_container(manifest.vocabulary, manifest.text_embeddings);
  if (manifest.extra_text_bank) text = text.concat(load_bank(*manifest.extra_text_bank));
  std::optional<TextEmbeddingSet> sentence;
  if (manifest.sentence_bank) sentence = load_bank(*manifest.sentence_bank);

  std::map<std::filesystem::path, TagFile> tag_files;
  std::vector<ImageRecord> images;
  images.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    auto embedding = DenseImageEmbedding::from_container(read_embedding(entry.embedding_path));
    if (embedding.dim() != text.dim()) {
      throw Error(ErrorKind::kDimensionMismatch, entry.image_id + ": embedding dim differs from text bank");
    }
    auto gt = read_segmap(entry.gt_path);
    gt.check_labels(manifest.vocabulary.size());
    std::optional<std::vector<std::string>> tags;
    if (entry.tags_path) {
      auto it = tag_files.find(*entry.tags_path);
      if (it == tag_files.end()) it = tag_files.emplace(*entry.tags_path, read_tag_file(*entry.tags_path)).first;
      if (auto t = it->second.tags.find(entry.image_id); t != it->second.tags.end()) tags = t->second;
    }
    images.push_back({entry.image_id, std::move(embedding), std::move(gt), std::move(tags)});
  }
  return Dataset(manifest.vocabulary, std::move(text), std::move(sentence), std::move(images));
}

const ImageRecord* Dataset::find(std::string_view image_id) const {
  for (const auto& im : images_) {
    if (im.image_id == image_id) return &im;
  }
  return nullptr;
}

std::vector<std::string> oracle_tags(const SegmentationMap& gt, std::span<const std::string> vocabulary) {
  std::vector<std::string> names;
  for (auto label : gt.distinct_labels()) {
    if (label >= vocabulary.size()) {
      throw Error(ErrorKind::kOutOfRange, "GT label " + std::to_string(label) + " outside vocabulary");
    }
    names.push_back(vocabulary[label]);
  }
  return names;
}

std::vector<Prediction> segment_dataset(const Dataset& dataset,
                                        std::span<const std::vector<std::string>> classes_per_image,
                                        const AggregationWeights& weights, unsigned threads) {
  const auto& images = dataset.images();
  if (classes_per_image.size() != images.size()) {
    throw Error(ErrorKind::kMisaligned, "one class list per image required");
  }
  std::vector<Prediction> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t k) {
    const auto& im = images[k];
    out[k] = {im.image_id, classes_per_image[k],
              segment_image(im.embedding, classes_per_image[k], dataset.text_bank(), weights, im.gt.height,
                            im.gt.width)};
  });
  return out;
}

EvaluationResult evaluate_predictions(const Dataset& dataset, std::span<const Prediction> predictions,
                                      double threshold, unsigned threads) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id[p.image_id] = &p;

  const auto& images = dataset.images();
  const auto& vocab = dataset.vocabulary();
  for (const auto& im : images) {
    if (!by_id.contains(im.image_id)) {
      throw Error(ErrorKind::kMissingPrediction, "no prediction for image '" + im.image_id + "'");
    }
  }

  struct PerImage {
    ConfusionMatrix hard;
    ConfusionMatrix soft;
    AssignmentMap hard_assignment;
    AssignmentMap soft_assignment;
    std::vector<std::string> gt_classes;
  };
  std::vector<PerImage> partial(images.size());
  parallel_for(images.size(), threads, [&](std::size_t k) {
    const auto& im = images[k];
    const Prediction& p = *by_id.at(im.image_id);
    PerImage r{ConfusionMatrix(vocab.size()), ConfusionMatrix(vocab.size()), {}, {}, oracle_tags(im.gt, vocab)};
    r.hard_assignment = hard_assign(p.classes, vocab);
    r.soft_assignment = soft_assign(p.classes, vocab, dataset.sentence_bank(), threshold);
    r.hard.accumulate(im.gt, apply_assignment(p.map, r.hard_assignment, vocab));
    r.soft.accumulate(im.gt, apply_assignment(p.map, r.soft_assignment, vocab));
    partial[k] = std::move(r);
  });

  ConfusionMatrix hard(vocab.size());
  ConfusionMatrix soft(vocab.size());
  std::map<std::string, std::vector<std::string>> gt_sets;
  EvaluationResult result;
  for (std::size_t k = 0; k < images.size(); ++k) {
    hard += partial[k].hard;
    soft += partial[k].soft;
    gt_sets[images[k].image_id] = std::move(partial[k].gt_classes);
    result.hard_assignments[images[k].image_id] = std::move(partial[k].hard_assignment);
    result.soft_assignments[images[k].image_id] = std::move(partial[k].soft_assignment);
  }
  result.hard = miou(hard);
  result.soft = miou(soft);
  result.hard_tagging = tagging_stats(gt_sets, result.hard_assignments);
  result.soft_tagging = tagging_stats(gt_sets, result.soft_assignments);
  return result;
}

}  // namespace vfss
