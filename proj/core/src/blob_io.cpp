#include "lga/blob_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "binary.hpp"

namespace lga {

namespace detail {

void ByteWriter::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing", path.string());
  out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw Error(ErrorKind::io, "write failed", path.string());
}

ByteReader::ByteReader(const std::filesystem::path& path, ErrorKind missing) : path_(path.string()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing, "cannot open file", path_);
  data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void ByteReader::expect_magic(std::string_view m) {
  const std::size_t at = pos_;
  if (remaining() < m.size() || std::string_view(data_.data() + pos_, m.size()) != m) {
    fail_at(ErrorKind::corrupt_file, "bad magic, expected \"" + std::string(m) + "\"", at);
  }
  pos_ += m.size();
}

void ByteReader::fail_at(ErrorKind kind, const std::string& message, std::size_t offset) const {
  throw Error(kind, message, path_, offset);
}

}  // namespace detail

namespace {

void check_rows_fit(const Matrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) {
    fail(ErrorKind::invalid_argument, "matrix too large for the blob format");
  }
}

}  // namespace

std::vector<char> encode_feature_blob(const Matrix& m) {
  check_rows_fit(m);
  detail::ByteWriter w;
  w.magic(kFeatureMagic);
  w.u16(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) w.f32(static_cast<float>(v));
  return w.bytes();
}

void write_feature_blob(const std::filesystem::path& path, const Matrix& m) {
  const auto bytes = encode_feature_blob(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed", path.string());
}

Matrix read_feature_blob(const std::filesystem::path& path) {
  detail::ByteReader r(path, ErrorKind::missing_blob);
  r.expect_magic(kFeatureMagic);
  const auto version_at = r.offset();
  const auto version = r.u16();
  if (version != kFeatureVersion) {
    r.fail_at(ErrorKind::corrupt_file, "unsupported feature blob version " + std::to_string(version),
              version_at);
  }
  const auto rows = r.u32();
  const auto cols = r.u32();
  const std::uint64_t expected = std::uint64_t{rows} * cols * 4;
  if (r.remaining() < expected) {
    r.fail_at(ErrorKind::truncated_file,
              "payload of " + std::to_string(rows) + "x" + std::to_string(cols) + " floats needs " +
                  std::to_string(expected) + " bytes, " + std::to_string(r.remaining()) + " present",
              r.offset() + r.remaining());
  }
  if (r.remaining() > expected) {
    r.fail_at(ErrorKind::corrupt_file, "trailing bytes after payload", r.offset() + expected);
  }
  Matrix m(rows, cols);
  for (auto& v : m.data()) {
    const auto at = r.offset();
    v = r.f32();
    if (!std::isfinite(v)) r.fail_at(ErrorKind::invalid_data, "non-finite value", at);
  }
  return m;
}

}  // namespace lga
