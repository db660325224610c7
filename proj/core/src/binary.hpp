#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "lga/error.hpp"

namespace lga::detail {

static_assert(std::numeric_limits<float>::is_iec559, "IEEE-754 float required");

class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  const std::vector<char>& bytes() const noexcept { return bytes_; }

  void save(const std::filesystem::path& path) const;

 private:
  template <class U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> bytes_;
};

// Sequential little-endian reader over a whole file. Every read reports the
// file and byte offset on failure.
class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path, ErrorKind missing = ErrorKind::io);

  void expect_magic(std::string_view m);
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail_at(ErrorKind kind, const std::string& message, std::size_t offset) const;

 private:
  template <class U>
  U get() {
    if (remaining() < sizeof(U)) {
      fail_at(ErrorKind::truncated_file,
              "file ends after " + std::to_string(data_.size()) + " bytes, needed " +
                  std::to_string(sizeof(U)) + " more",
              pos_);
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace lga::detail
