#include "vfss/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "byte_io.hpp"
#include "vfss/error.hpp"

namespace vfss {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kEmbeddingMagic = "VFSE";
constexpr std::string_view kSegmapMagic = "SEGM";
constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 31;

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_exists(const fs::path& path, std::string_view what) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kMissingFile, std::string(what) + " not found: " + path.string());
  }
}

const json& require_key(const json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::kParse, std::string(where) + ": missing key '" + key + "'");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, std::string_view where) {
  const json& v = require_key(obj, key, where);
  if (!v.is_string()) {
    throw Error(ErrorKind::kParse, std::string(where) + ": key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

NamedBankPaths parse_bank(const json& obj, const fs::path& base, std::string_view where) {
  if (!obj.is_object()) throw Error(ErrorKind::kParse, std::string(where) + " must be an object");
  return {resolve(base, require_string(obj, "names", where)),
          resolve(base, require_string(obj, "embeddings", where))};
}

void validate_bank(const NamedBankPaths& bank, std::string_view what) {
  require_exists(bank.names_path, std::string(what) + " names");
  require_exists(bank.embeddings_path, std::string(what) + " embeddings");
  const auto names = read_name_list(bank.names_path);
  const auto container = read_embedding(bank.embeddings_path);
  if (container.rank() != 2) {
    throw Error(ErrorKind::kBadRank, std::string(what) + " embeddings must be rank 2");
  }
  if (container.dims[0] != names.size()) {
    throw Error(ErrorKind::kCountMismatch, std::string(what) + ": " + std::to_string(names.size()) +
                                               " names but " + std::to_string(container.dims[0]) +
                                               " embedding rows");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// File helpers

std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!fs::exists(path)) throw Error(ErrorKind::kMissingFile, path.string());
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::transform(raw.begin(), raw.end(), bytes.begin(), [](char c) { return static_cast<std::byte>(c); });
  return bytes;
}

void write_file_bytes(std::span<const std::byte> bytes, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_text_file(const std::string& text, const fs::path& path) {
  write_file_bytes(std::as_bytes(std::span(text.data(), text.size())), path);
}

// ---------------------------------------------------------------------------
// VFSE

std::uint64_t EmbeddingContainer::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (!detail::checked_mul(n, d, n)) {
      throw Error(ErrorKind::kDimensionOverflow, "VFSE: element count overflows 64 bits");
    }
  }
  return n;
}

void EmbeddingContainer::validate() const {
  if (version != kVersion) {
    throw Error(ErrorKind::kUnsupportedVersion, "VFSE: version " + std::to_string(version));
  }
  if (dtype != kDtypeF32) {
    throw Error(ErrorKind::kUnsupportedDtype, "VFSE: dtype " + std::to_string(dtype));
  }
  if (rank() != 2 && rank() != 3) {
    throw Error(ErrorKind::kBadRank, "VFSE: rank must be 2 or 3, got " + std::to_string(rank()));
  }
  for (auto d : dims) {
    if (d == 0) throw Error(ErrorKind::kZeroDim, "VFSE: zero-sized dimension");
  }
  if (element_count() != data.size()) {
    throw Error(ErrorKind::kInvariant, "VFSE: payload holds " + std::to_string(data.size()) +
                                           " floats, dims require " + std::to_string(element_count()));
  }
}

bool bit_identical(const EmbeddingContainer& a, const EmbeddingContainer& b) {
  if (a.version != b.version || a.dtype != b.dtype || a.dims != b.dims ||
      a.provenance != b.provenance || a.data.size() != b.data.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a.data[i]) != std::bit_cast<std::uint32_t>(b.data[i])) return false;
  }
  return true;
}

std::vector<std::byte> encode_embedding(const EmbeddingContainer& container) {
  container.validate();
  detail::ByteWriter w;
  w.reserve(16 + 8 * container.rank() + 4 * container.data.size() + 4 + container.provenance.size());
  w.magic(kEmbeddingMagic);
  w.u32(container.version);
  w.u32(container.dtype);
  w.u32(static_cast<std::uint32_t>(container.rank()));
  for (auto d : container.dims) w.u64(d);
  for (float v : container.data) w.f32(v);
  w.string(container.provenance);
  return w.take();
}

EmbeddingContainer decode_embedding(std::span<const std::byte> bytes) {
  detail::ByteReader r(bytes, "VFSE");
  if (!r.magic_matches(kEmbeddingMagic)) throw Error(ErrorKind::kBadMagic, "VFSE: bad magic");
  r.skip(4);
  EmbeddingContainer c;
  c.version = r.u32();
  if (c.version != EmbeddingContainer::kVersion) {
    throw Error(ErrorKind::kUnsupportedVersion, "VFSE: version " + std::to_string(c.version));
  }
  c.dtype = r.u32();
  if (c.dtype != EmbeddingContainer::kDtypeF32) {
    throw Error(ErrorKind::kUnsupportedDtype, "VFSE: dtype " + std::to_string(c.dtype));
  }
  const std::uint32_t rank = r.u32();
  if (rank != 2 && rank != 3) {
    throw Error(ErrorKind::kBadRank, "VFSE: rank must be 2 or 3, got " + std::to_string(rank));
  }
  c.dims.resize(rank);
  for (auto& d : c.dims) {
    d = r.u64();
    if (d == 0) throw Error(ErrorKind::kZeroDim, "VFSE: zero-sized dimension");
  }
  const std::uint64_t count = c.element_count();
  std::uint64_t payload_bytes = 0;
  if (!detail::checked_mul(count, 4, payload_bytes)) {
    throw Error(ErrorKind::kDimensionOverflow, "VFSE: payload size overflows 64 bits");
  }
  r.need(payload_bytes);
  c.data.resize(count);
  for (auto& v : c.data) v = r.f32();
  c.provenance = r.string();
  r.expect_end();
  return c;
}

EmbeddingContainer read_embedding(const fs::path& path) {
  try {
    return decode_embedding(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_embedding(const EmbeddingContainer& container, const fs::path& path) {
  write_file_bytes(encode_embedding(container), path);
}

// ---------------------------------------------------------------------------
// SEGM

void SegmentationMap::validate() const {
  if (height == 0 || width == 0) {
    throw Error(ErrorKind::kZeroDim, "SEGM: height and width must be positive");
  }
  if (std::uint64_t{height} * width > kMaxPixels) {
    throw Error(ErrorKind::kDimensionOverflow, "SEGM: more than 2^31 pixels");
  }
  if (labels.size() != std::size_t{height} * width) {
    throw Error(ErrorKind::kInvariant, "SEGM: label count does not match height*width");
  }
}

void SegmentationMap::check_labels(std::size_t class_count) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels[i];
    if (v != kIgnoreLabel && v >= class_count) {
      throw Error(ErrorKind::kOutOfRange, "label " + std::to_string(v) + " at pixel " + std::to_string(i) +
                                              " exceeds class count " + std::to_string(class_count));
    }
  }
}

std::vector<std::uint16_t> SegmentationMap::distinct_labels() const {
  std::vector<bool> seen(65536, false);
  for (auto v : labels) seen[v] = true;
  std::vector<std::uint16_t> out;
  for (std::size_t v = 0; v < kIgnoreLabel; ++v) {
    if (seen[v]) out.push_back(static_cast<std::uint16_t>(v));
  }
  return out;
}

std::vector<std::byte> encode_segmap(const SegmentationMap& map) {
  map.validate();
  detail::ByteWriter w;
  w.reserve(12 + 2 * map.labels.size());
  w.magic(kSegmapMagic);
  w.u32(map.height);
  w.u32(map.width);
  for (auto v : map.labels) w.u16(v);
  return w.take();
}

SegmentationMap decode_segmap(std::span<const std::byte> bytes) {
  detail::ByteReader r(bytes, "SEGM");
  if (!r.magic_matches(kSegmapMagic)) throw Error(ErrorKind::kBadMagic, "SEGM: bad magic");
  r.skip(4);
  SegmentationMap map;
  map.height = r.u32();
  map.width = r.u32();
  if (map.height == 0 || map.width == 0) {
    throw Error(ErrorKind::kZeroDim, "SEGM: height and width must be positive");
  }
  const std::uint64_t pixels = std::uint64_t{map.height} * map.width;
  if (pixels > kMaxPixels) throw Error(ErrorKind::kDimensionOverflow, "SEGM: more than 2^31 pixels");
  r.need(pixels * 2);
  map.labels.resize(pixels);
  for (auto& v : map.labels) v = r.u16();
  r.expect_end();
  return map;
}

SegmentationMap read_segmap(const fs::path& path) {
  try {
    return decode_segmap(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_segmap(const SegmentationMap& map, const fs::path& path) {
  write_file_bytes(encode_segmap(map), path);
}

// ---------------------------------------------------------------------------
// Tag files and name lists

TagFile parse_tag_file(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("tag file: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "tag file: top level must be an object");

  TagFile out;
  const json* table = &doc;
  if (auto it = doc.find("tags"); it != doc.end() && it->is_object()) {
    table = &*it;
    if (auto p = doc.find("provenance"); p != doc.end()) {
      if (!p->is_string()) throw Error(ErrorKind::kParse, "tag file: provenance must be a string");
      out.provenance = p->get<std::string>();
    }
  }
  for (const auto& [image_id, list] : table->items()) {
    if (!list.is_array()) {
      throw Error(ErrorKind::kParse, "tag file: tags for '" + image_id + "' must be an array");
    }
    std::vector<std::string> tags;
    std::unordered_set<std::string> seen;
    for (const auto& tag : list) {
      if (!tag.is_string() || tag.get<std::string>().empty()) {
        throw Error(ErrorKind::kParse, "tag file: tags for '" + image_id + "' must be non-empty strings");
      }
      auto s = tag.get<std::string>();
      if (!seen.insert(s).second) {
        throw Error(ErrorKind::kDuplicate, "tag file: duplicate tag '" + s + "' for '" + image_id + "'");
      }
      tags.push_back(std::move(s));
    }
    out.tags.emplace(image_id, std::move(tags));
  }
  return out;
}

TagFile read_tag_file(const fs::path& path) {
  try {
    return parse_tag_file(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_tag_file(const TagFile& tags, const fs::path& path) {
  json doc = json::object();
  json table = json::object();
  for (const auto& [id, list] : tags.tags) table[id] = list;
  if (tags.provenance.empty()) {
    doc = std::move(table);
  } else {
    doc["provenance"] = tags.provenance;
    doc["tags"] = std::move(table);
  }
  write_text_file(doc.dump(2) + "\n", path);
}

std::vector<std::string> parse_name_list(const std::string& text) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw Error(ErrorKind::kParse, "name list: blank line " + std::to_string(names.size() + 1));
    }
    names.push_back(std::move(line));
    start = end + 1;
  }
  return names;
}

std::vector<std::string> read_name_list(const fs::path& path) {
  try {
    return parse_name_list(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest load_manifest(const fs::path& path) {
  require_exists(path, "manifest");
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "manifest: top level must be an object");

  const fs::path base = path.parent_path();
  DatasetManifest m;
  m.path = path;
  m.vocabulary_path = resolve(base, require_string(doc, "vocabulary", "manifest"));
  m.text_embedding_path = resolve(base, require_string(doc, "text_embeddings", "manifest"));
  if (auto it = doc.find("extra_text_bank"); it != doc.end()) {
    m.extra_text_bank = parse_bank(*it, base, "extra_text_bank");
  }
  if (auto it = doc.find("sentence_bank"); it != doc.end()) {
    m.sentence_bank = parse_bank(*it, base, "sentence_bank");
  }

  const json& entries = require_key(doc, "entries", "manifest");
  if (!entries.is_array()) throw Error(ErrorKind::kParse, "manifest: entries must be an array");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!e.is_object()) throw Error(ErrorKind::kParse, "manifest: entry must be an object");
    ManifestEntry entry;
    entry.image_id = require_string(e, "image_id", "manifest entry");
    if (!ids.insert(entry.image_id).second) {
      throw Error(ErrorKind::kDuplicate, "manifest: duplicate image_id '" + entry.image_id + "'");
    }
    entry.embedding_path = resolve(base, require_string(e, "embedding", "manifest entry"));
    entry.gt_path = resolve(base, require_string(e, "gt", "manifest entry"));
    if (e.contains("tags")) entry.tags_path = resolve(base, require_string(e, "tags", "manifest entry"));
    if (e.contains("caption")) {
      entry.caption_path = resolve(base, require_string(e, "caption", "manifest entry"));
    }
    m.entries.push_back(std::move(entry));
  }

  require_exists(m.vocabulary_path, "vocabulary");
  require_exists(m.text_embedding_path, "text embeddings");
  m.vocabulary = read_name_list(m.vocabulary_path);
  {
    std::set<std::string> seen;
    for (const auto& n : m.vocabulary) {
      if (!seen.insert(n).second) throw Error(ErrorKind::kDuplicate, "vocabulary: duplicate name '" + n + "'");
    }
  }
  m.text_embeddings = read_embedding(m.text_embedding_path);
  if (m.text_embeddings.rank() != 2) {
    throw Error(ErrorKind::kBadRank, "text embeddings must be rank 2 (N x d)");
  }
  if (m.text_embeddings.dims[0] != m.vocabulary.size()) {
    throw Error(ErrorKind::kCountMismatch,
                "vocabulary has " + std::to_string(m.vocabulary.size()) + " names but text embeddings have " +
                    std::to_string(m.text_embeddings.dims[0]) + " rows");
  }
  if (m.extra_text_bank) validate_bank(*m.extra_text_bank, "extra_text_bank");
  if (m.sentence_bank) validate_bank(*m.sentence_bank, "sentence_bank");

  std::set<fs::path> tag_files_checked;
  for (const auto& entry : m.entries) {
    require_exists(entry.embedding_path, "embedding for " + entry.image_id);
    require_exists(entry.gt_path, "ground truth for " + entry.image_id);
    const auto emb = read_embedding(entry.embedding_path);
    if (emb.rank() != 3) {
      throw Error(ErrorKind::kBadRank, entry.image_id + ": image embedding must be rank 3 (H x W x d)");
    }
    if (emb.dims[2] != m.text_embeddings.dims[1]) {
      throw Error(ErrorKind::kDimensionMismatch, entry.image_id + ": embedding dim " +
                                                     std::to_string(emb.dims[2]) + " != text dim " +
                                                     std::to_string(m.text_embeddings.dims[1]));
    }
    read_segmap(entry.gt_path).check_labels(m.vocabulary.size());
    if (entry.tags_path && tag_files_checked.insert(*entry.tags_path).second) {
      require_exists(*entry.tags_path, "tags for " + entry.image_id);
      read_tag_file(*entry.tags_path);
    }
    if (entry.caption_path) require_exists(*entry.caption_path, "caption for " + entry.image_id);
  }
  return m;
}

}  // namespace vfss
