// Regenerates the synthetic datasets and golden binaries under tests/data.
//
//   vfss_make_fixtures <dir>
//
// Output is a pure function of the constants below.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vfss/perturb.hpp"
#include "vfss/rng.hpp"
#include "vfss/segmenter.hpp"
#include "vfss/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_names(const std::vector<std::string>& names, const fs::path& path) {
  std::string text;
  for (const auto& n : names) text += n + "\n";
  vfss::write_text_file(text, path);
}

vfss::EmbeddingContainer basis_bank(std::size_t rows, std::size_t dim, std::size_t offset, std::string provenance) {
  vfss::EmbeddingContainer c;
  c.dims = {rows, dim};
  c.data.assign(rows * dim, 0.0f);
  for (std::size_t r = 0; r < rows; ++r) c.data[r * dim + offset + r] = 1.0f;
  c.provenance = std::move(provenance);
  return c;
}

// Embedding grid where each cell is the basis vector of its class plus
// uniform noise; GT is the class layout upsampled by `scale` (nearest).
void write_scene(const fs::path& dir, const std::string& id, std::size_t grid, std::size_t dim, std::size_t scale,
                 const std::function<std::size_t(std::size_t, std::size_t)>& layout, std::uint64_t seed,
                 float noise, std::size_t ignore_rows = 0) {
  vfss::SplitMix64 rng(vfss::derive_seed(seed, id));
  vfss::EmbeddingContainer emb;
  emb.dims = {grid, grid, dim};
  emb.provenance = "synthetic-blobs";
  emb.data.resize(grid * grid * dim);
  for (std::size_t y = 0; y < grid; ++y) {
    for (std::size_t x = 0; x < grid; ++x) {
      const std::size_t cls = layout(y, x);
      float* v = emb.data.data() + (y * grid + x) * dim;
      for (std::size_t k = 0; k < dim; ++k) v[k] = rng.next_float(-noise, noise);
      v[cls] += 1.0f;
    }
  }
  vfss::write_embedding(emb, dir / (id + ".vfse"));

  const auto side = static_cast<std::uint32_t>(grid * scale);
  vfss::SegmentationMap gt(side, side);
  for (std::uint32_t y = 0; y < side; ++y) {
    for (std::uint32_t x = 0; x < side; ++x) {
      gt.at(y, x) = y >= side - ignore_rows ? vfss::kIgnoreLabel
                                            : static_cast<std::uint16_t>(layout(y / scale, x / scale));
    }
  }
  vfss::write_segmap(gt, dir / (id + ".segm"));
}

void make_blobs(const fs::path& dir) {
  fs::create_directories(dir);
  const std::vector<std::string> vocab = {"sky", "tree", "road", "car", "person", "building"};
  constexpr std::size_t kDim = 16;
  write_names(vocab, dir / "vocabulary.txt");
  vfss::write_embedding(basis_bank(vocab.size(), kDim, 0, "synthetic-orthogonal"), dir / "text.vfse");

  // sky = 0, tree = 1, road = 2
  write_scene(dir, "scene_a", 8, kDim, 2,
              [](std::size_t y, std::size_t x) -> std::size_t { return y < 3 ? 0 : (x < 4 ? 1 : 2); }, 11, 0.05f);
  write_scene(dir, "scene_b", 8, kDim, 2,
              [](std::size_t y, std::size_t x) -> std::size_t { return x < 3 ? 2 : (y < 5 ? 1 : 0); }, 11, 0.05f,
              1);

  vfss::TagFile tags;
  tags.provenance = "synthetic-oracle";
  tags.tags["scene_a"] = {"sky", "tree", "road"};
  tags.tags["scene_b"] = {"road", "tree", "sky"};
  vfss::write_tag_file(tags, dir / "tags.json");

  json manifest;
  manifest["vocabulary"] = "vocabulary.txt";
  manifest["text_embeddings"] = "text.vfse";
  manifest["entries"] = json::array();
  for (const std::string id : {"scene_a", "scene_b"}) {
    manifest["entries"].push_back({{"image_id", id}, {"embedding", id + ".vfse"}, {"gt", id + ".segm"},
                                   {"tags", "tags.json"}});
  }
  vfss::write_text_file(manifest.dump(2) + "\n", dir / "manifest.json");
}

void make_husky(const fs::path& dir) {
  fs::create_directories(dir);
  constexpr std::size_t kDim = 8;
  write_names({"cat", "dog"}, dir / "vocabulary.txt");
  vfss::write_embedding(basis_bank(2, kDim, 0, "synthetic-clip"), dir / "text.vfse");
  write_names({"husky"}, dir / "extra_names.txt");
  vfss::write_embedding(basis_bank(1, kDim, 2, "synthetic-clip"), dir / "extra.vfse");

  // Sentence space: cos(husky, dog) = 0.8, cos(husky, cat) = 0.3.
  write_names({"cat", "dog", "husky"}, dir / "sentence_names.txt");
  vfss::EmbeddingContainer sbert;
  sbert.dims = {3, 3};
  sbert.data = {0.3f, 0.0f, static_cast<float>(std::sqrt(0.91)),  // cat
                0.8f, 0.6f, 0.0f,                                   // dog
                1.0f, 0.0f, 0.0f};                                  // husky
  sbert.provenance = "synthetic-sentence";
  vfss::write_embedding(sbert, dir / "sentence.vfse");

  // Left half looks like the "dog" text row, right half like "husky"; both
  // are labelled dog (index 1).
  vfss::SplitMix64 rng(vfss::derive_seed(5, "husky_01"));
  vfss::EmbeddingContainer emb;
  emb.dims = {8, 8, kDim};
  emb.provenance = "synthetic-blobs";
  emb.data.resize(8 * 8 * kDim);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      float* v = emb.data.data() + (y * 8 + x) * kDim;
      for (std::size_t k = 0; k < kDim; ++k) v[k] = rng.next_float(-0.05f, 0.05f);
      v[x < 4 ? 1 : 2] += 1.0f;
    }
  }
  vfss::write_embedding(emb, dir / "husky_01.vfse");
  vfss::write_segmap(vfss::SegmentationMap(8, 8, 1), dir / "husky_01.segm");

  vfss::TagFile tags;
  tags.provenance = "synthetic-tagger";
  tags.tags["husky_01"] = {"dog", "husky"};
  vfss::write_tag_file(tags, dir / "tags.json");

  json manifest;
  manifest["vocabulary"] = "vocabulary.txt";
  manifest["text_embeddings"] = "text.vfse";
  manifest["extra_text_bank"] = {{"names", "extra_names.txt"}, {"embeddings", "extra.vfse"}};
  manifest["sentence_bank"] = {{"names", "sentence_names.txt"}, {"embeddings", "sentence.vfse"}};
  manifest["entries"] = json::array(
      {{{"image_id", "husky_01"}, {"embedding", "husky_01.vfse"}, {"gt", "husky_01.segm"}, {"tags", "tags.json"}}});
  vfss::write_text_file(manifest.dump(2) + "\n", dir / "manifest.json");
}

void make_golden(const fs::path& dir) {
  fs::create_directories(dir);

  vfss::EmbeddingContainer small;
  small.dims = {2, 2, 4};
  for (int k = 0; k < 16; ++k) small.data.push_back(0.25f * static_cast<float>(k) - 1.0f);
  small.provenance = "clip-vit-b-16";
  vfss::write_embedding(small, dir / "embedding_2x2x4.vfse");

  vfss::SegmentationMap map(2, 2);
  map.labels = {0, 1, vfss::kIgnoreLabel, 0};
  vfss::write_segmap(map, dir / "segmap_2x2.segm");

  vfss::write_weights(vfss::AggregationWeights::initialize(7, 1, 4, 2), dir / "weights_k1_d4_g2.vfsw");

  // Aggregation golden: 4x4x8 image, 3 classes, K = 2, guidance 4, seed 7.
  vfss::SplitMix64 rng(7);
  vfss::EmbeddingContainer img;
  img.dims = {4, 4, 8};
  img.provenance = "golden-random";
  for (int k = 0; k < 4 * 4 * 8; ++k) img.data.push_back(rng.next_float(-1.0f, 1.0f));
  vfss::EmbeddingContainer txt;
  txt.dims = {3, 8};
  txt.provenance = "golden-random";
  for (int k = 0; k < 3 * 8; ++k) txt.data.push_back(rng.next_float(-1.0f, 1.0f));
  const auto weights = vfss::AggregationWeights::initialize(7, 2, 8, 4);
  vfss::write_embedding(img, dir / "aggregate_image.vfse");
  vfss::write_embedding(txt, dir / "aggregate_text.vfse");
  vfss::write_weights(weights, dir / "aggregate_weights.vfsw");

  const auto image = vfss::DenseImageEmbedding::from_container(img);
  const auto text = vfss::TextEmbeddingSet::from_container({"a", "b", "c"}, txt);
  const auto refined = vfss::aggregate(vfss::compute_cost_volume(image, text), image, text, weights);
  vfss::EmbeddingContainer expected;
  expected.dims = {refined.locations(), refined.classes};
  expected.data = refined.values;
  expected.provenance = "aggregate(seed=7,K=2,g=4)";
  vfss::write_embedding(expected, dir / "aggregate_expected.vfse");

  // Perturbation golden: seed 9, "img_001", drop 0.5, two false positives.
  vfss::PerturbationConfig pc;
  pc.drop_rate = 0.5;
  pc.fp_count = 2;
  pc.master_seed = 9;
  pc.vocabulary = {"sky", "tree", "road", "car", "person", "building", "grass", "water", "dog", "cat"};
  const std::vector<std::string> gt{"sky", "road", "car", "person"};
  const auto perturbed = vfss::perturb_tags(gt, pc, "img_001");
  json doc;
  doc["master_seed"] = pc.master_seed;
  doc["image_id"] = "img_001";
  doc["drop_rate"] = pc.drop_rate;
  doc["fp_count"] = pc.fp_count;
  doc["vocabulary"] = pc.vocabulary;
  doc["gt_classes"] = gt;
  doc["stream_seed"] = perturbed.seed;
  doc["surviving"] = perturbed.surviving;
  doc["dropped"] = perturbed.dropped;
  doc["injected"] = perturbed.injected;
  vfss::write_text_file(doc.dump(2) + "\n", dir / "perturb_seed9_img_001.json");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: vfss_make_fixtures <dir>\n";
    return 2;
  }
  const fs::path root = argv[1];
  make_blobs(root / "blobs");
  make_husky(root / "husky");
  make_golden(root / "golden");
  std::cout << "fixtures written to " << root.string() << "\n";
  return 0;
}
