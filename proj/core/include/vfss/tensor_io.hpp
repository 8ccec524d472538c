#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vfss {

inline constexpr std::uint16_t kIgnoreLabel = 65535;
// Prediction pixels whose class name found no evaluation-vocabulary match.
inline constexpr std::uint16_t kUnmatchedLabel = 65534;

// "VFSE" container: dense image embeddings (rank 3, H x W x d) or text
// embedding banks (rank 2, N x d).
//
//   magic      4 bytes  "VFSE"
//   version    u32      1
//   dtype      u32      0 = f32 little-endian
//   rank       u32      2 or 3
//   dims       rank x u64
//   payload    prod(dims) x f32, row-major
//   provenance u32 byte length + UTF-8 bytes
//
// All integers little-endian. Nothing may follow the provenance string.
struct EmbeddingContainer {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::uint32_t kDtypeF32 = 0;

  std::uint32_t version = kVersion;
  std::uint32_t dtype = kDtypeF32;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
  std::string provenance;

  std::size_t rank() const noexcept { return dims.size(); }
  std::uint64_t element_count() const;
  // Throws Error on any invariant violation.
  void validate() const;
};

// Bit-level equality: payloads compare by their IEEE bit patterns.
bool bit_identical(const EmbeddingContainer& a, const EmbeddingContainer& b);

std::vector<std::byte> encode_embedding(const EmbeddingContainer& container);
EmbeddingContainer decode_embedding(std::span<const std::byte> bytes);
EmbeddingContainer read_embedding(const std::filesystem::path& path);
void write_embedding(const EmbeddingContainer& container, const std::filesystem::path& path);

// Integer label grid, row-major (index = y * width + x).
struct SegmentationMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint16_t> labels;

  SegmentationMap() = default;
  SegmentationMap(std::uint32_t h, std::uint32_t w, std::uint16_t fill = kIgnoreLabel)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixel_count() const noexcept { return labels.size(); }
  std::uint16_t& at(std::uint32_t y, std::uint32_t x) { return labels[std::size_t{y} * width + x]; }
  std::uint16_t at(std::uint32_t y, std::uint32_t x) const { return labels[std::size_t{y} * width + x]; }

  void validate() const;
  // Throws kOutOfRange if any label is neither ignore nor < class_count.
  void check_labels(std::size_t class_count) const;
  // Sorted distinct labels, excluding ignore.
  std::vector<std::uint16_t> distinct_labels() const;

  bool operator==(const SegmentationMap&) const = default;
};

// "SEGM" file: magic, height u32, width u32, then H*W u16 labels, all LE.
std::vector<std::byte> encode_segmap(const SegmentationMap& map);
SegmentationMap decode_segmap(std::span<const std::byte> bytes);
SegmentationMap read_segmap(const std::filesystem::path& path);
void write_segmap(const SegmentationMap& map, const std::filesystem::path& path);

// JSON tag file. Two accepted layouts:
//   {"img_001": ["dog", "grass"], ...}
//   {"provenance": "ram-swin-l", "tags": {"img_001": ["dog", "grass"], ...}}
struct TagFile {
  std::string provenance;
  std::map<std::string, std::vector<std::string>> tags;
};

TagFile parse_tag_file(const std::string& text);
TagFile read_tag_file(const std::filesystem::path& path);
void write_tag_file(const TagFile& tags, const std::filesystem::path& path);

// Newline-separated UTF-8 names. Trailing '\r' is stripped; blank lines are
// rejected except a single trailing newline.
std::vector<std::string> parse_name_list(const std::string& text);
std::vector<std::string> read_name_list(const std::filesystem::path& path);

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path embedding_path;
  std::filesystem::path gt_path;
  std::optional<std::filesystem::path> tags_path;
  std::optional<std::filesystem::path> caption_path;
};

// A text or sentence embedding bank whose row names live in a separate list.
struct NamedBankPaths {
  std::filesystem::path names_path;
  std::filesystem::path embeddings_path;
};

struct DatasetManifest {
  std::filesystem::path path;
  std::vector<ManifestEntry> entries;
  std::filesystem::path vocabulary_path;
  std::filesystem::path text_embedding_path;
  // Extra CLIP-space rows for open-ended tag names outside the vocabulary.
  std::optional<NamedBankPaths> extra_text_bank;
  // Sentence-embedding rows used for soft assignment.
  std::optional<NamedBankPaths> sentence_bank;

  std::vector<std::string> vocabulary;
  EmbeddingContainer text_embeddings;
};

// Parses the manifest (paths relative to the manifest's directory) and
// validates every referenced file.
DatasetManifest load_manifest(const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(std::span<const std::byte> bytes, const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::string& text, const std::filesystem::path& path);

}  // namespace vfss
