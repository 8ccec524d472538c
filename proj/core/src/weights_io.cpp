#include "byte_io.hpp"
#include "vfss/error.hpp"
#include "vfss/segmenter.hpp"

namespace vfss {
namespace {

constexpr std::string_view kWeightsMagic = "VFSW";

void put_matrix(detail::ByteWriter& w, const Matrix& m) {
  for (float v : m.data) w.f32(v);
}

Matrix get_matrix(detail::ByteReader& r, std::size_t rows, std::size_t cols) {
  r.need(rows * cols * 4);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = r.f32();
  return m;
}

AttentionBlock get_block(detail::ByteReader& r, std::size_t m) {
  AttentionBlock b;
  b.query = get_matrix(r, m, m);
  b.key = get_matrix(r, m, m);
  b.value = get_matrix(r, m, m);
  b.output = get_matrix(r, m, m);
  return b;
}

void put_block(detail::ByteWriter& w, const AttentionBlock& b) {
  put_matrix(w, b.query);
  put_matrix(w, b.key);
  put_matrix(w, b.value);
  put_matrix(w, b.output);
}

}  // namespace

std::vector<std::byte> encode_weights(const AggregationWeights& w) {
  w.validate();
  detail::ByteWriter out;
  out.magic(kWeightsMagic);
  out.u32(AggregationWeights::kFileVersion);
  out.u32(static_cast<std::uint32_t>(w.iterations()));
  out.u32(static_cast<std::uint32_t>(w.embed_dim));
  out.u32(static_cast<std::uint32_t>(w.guidance_dim));
  if (w.iterations() > 0) {
    put_matrix(out, w.visual_projection);
    put_matrix(out, w.text_projection);
    for (std::size_t k = 0; k < w.iterations(); ++k) {
      put_block(out, w.spatial[k]);
      put_block(out, w.cross_class[k]);
    }
  }
  out.string(w.provenance);
  return out.take();
}

AggregationWeights decode_weights(std::span<const std::byte> bytes) {
  detail::ByteReader r(bytes, "VFSW");
  if (!r.magic_matches(kWeightsMagic)) throw Error(ErrorKind::kBadMagic, "VFSW: bad magic");
  r.skip(4);
  const std::uint32_t version = r.u32();
  if (version != AggregationWeights::kFileVersion) {
    throw Error(ErrorKind::kUnsupportedVersion, "VFSW: version " + std::to_string(version));
  }
  AggregationWeights w;
  const std::uint32_t iterations = r.u32();
  w.embed_dim = r.u32();
  w.guidance_dim = r.u32();
  if (iterations > 0) {
    if (w.embed_dim == 0 || w.guidance_dim == 0) {
      throw Error(ErrorKind::kZeroDim, "VFSW: embed_dim and guidance_dim must be positive");
    }
    // Reject absurd headers before allocating.
    const std::uint64_t m = w.model_dim();
    const std::uint64_t floats = 2 * std::uint64_t{w.embed_dim} * w.guidance_dim + 8 * std::uint64_t{iterations} * m * m;
    r.need(floats * 4);
    w.visual_projection = get_matrix(r, w.embed_dim, w.guidance_dim);
    w.text_projection = get_matrix(r, w.embed_dim, w.guidance_dim);
    for (std::uint32_t k = 0; k < iterations; ++k) {
      w.spatial.push_back(get_block(r, w.model_dim()));
      w.cross_class.push_back(get_block(r, w.model_dim()));
    }
  }
  w.provenance = r.string();
  r.expect_end();
  w.validate();
  return w;
}

AggregationWeights read_weights(const std::filesystem::path& path) {
  try {
    return decode_weights(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_weights(const AggregationWeights& w, const std::filesystem::path& path) {
  write_file_bytes(encode_weights(w), path);
}

}  // namespace vfss
