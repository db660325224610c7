#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lga {

enum class ErrorKind {
  invalid_argument,
  invalid_data,
  degenerate_feature,
  degenerate_phase,
  numeric,
  parse,
  network,
  authentication,
  io,
  missing_blob,
  corrupt_file,
  truncated_file,
  dim_mismatch,
  dangling_reference,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library surfaces as lga::Error. File-oriented errors
// also carry the offending path and, where meaningful, the byte offset.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  Error(ErrorKind kind, const std::string& message, std::string file,
        std::optional<std::uint64_t> offset = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& file() const noexcept { return file_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

  // Network failures and timeouts are worth another attempt; nothing else is.
  bool retryable() const noexcept { return kind_ == ErrorKind::network; }

  // Same kind, file and offset with extra context prepended to the message.
  Error with_context(std::string_view context) const;

 private:
  ErrorKind kind_;
  std::string file_;
  std::optional<std::uint64_t> offset_;
};

// A reply that could not be turned into atomic descriptions. Keeps the raw
// text so callers can log or cache what the model actually said.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string raw);
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace lga
