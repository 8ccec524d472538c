#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vfss/error.hpp"

namespace vfss::detail {

class ByteWriter {
 public:
  void magic(std::string_view tag) {
    for (char c : tag) out_.push_back(static_cast<std::byte>(c));
  }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    for (char c : s) out_.push_back(static_cast<std::byte>(c));
  }
  void reserve(std::size_t n) { out_.reserve(n); }

  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, std::string_view format)
      : bytes_(bytes), format_(format) {}

  bool magic_matches(std::string_view tag) const {
    if (bytes_.size() < tag.size()) return false;
    return std::memcmp(bytes_.data(), tag.data(), tag.size()) == 0;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(std::to_integer<std::uint16_t>(bytes_[pos_ + i]) << (8 * i));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::to_integer<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string string() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw Error(ErrorKind::kTrailingBytes,
                  std::string(format_) + ": " + std::to_string(bytes_.size() - pos_) +
                      " unexpected bytes after end of record");
    }
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kTruncated, std::string(format_) + ": needed " + std::to_string(n) +
                                             " bytes at offset " + std::to_string(pos_) + ", have " +
                                             std::to_string(bytes_.size() - pos_));
    }
  }

 private:
  std::span<const std::byte> bytes_;
  std::string_view format_;
  std::size_t pos_ = 0;
};

// a * b, or nullopt-style false on u64 overflow.
inline bool checked_mul(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return !__builtin_mul_overflow(a, b, &out);
}

}  // namespace vfss::detail
