#include "lga/error.hpp"

#include <utility>

namespace lga {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_data: return "invalid-data";
    case ErrorKind::degenerate_feature: return "degenerate-feature";
    case ErrorKind::degenerate_phase: return "degenerate-phase";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::parse: return "parse";
    case ErrorKind::network: return "network";
    case ErrorKind::authentication: return "authentication";
    case ErrorKind::io: return "io";
    case ErrorKind::missing_blob: return "missing-blob";
    case ErrorKind::corrupt_file: return "corrupt-file";
    case ErrorKind::truncated_file: return "truncated-file";
    case ErrorKind::dim_mismatch: return "dim-mismatch";
    case ErrorKind::dangling_reference: return "dangling-reference";
  }
  return "unknown";
}

namespace {

std::string decorate(ErrorKind kind, const std::string& message, const std::string& file,
                     std::optional<std::uint64_t> offset) {
  std::string out(to_string(kind));
  out += ": ";
  out += message;
  if (!file.empty()) {
    out += " [" + file;
    if (offset) out += " @ offset " + std::to_string(*offset);
    out += "]";
  }
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(decorate(kind, message, {}, std::nullopt)), kind_(kind) {}

Error::Error(ErrorKind kind, const std::string& message, std::string file,
             std::optional<std::uint64_t> offset)
    : std::runtime_error(decorate(kind, message, file, offset)),
      kind_(kind),
      file_(std::move(file)),
      offset_(offset) {}

Error Error::with_context(std::string_view context) const {
  // what() already holds the decorated text; rebuild around it so the kind
  // prefix stays in front.
  std::string msg = what();
  const auto prefix = std::string(to_string(kind_)) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  Error out(kind_, std::string(context) + ": " + msg);
  out.file_ = file_;
  out.offset_ = offset_;
  return out;
}

ParseError::ParseError(const std::string& message, std::string raw)
    : Error(ErrorKind::parse, message), raw_(std::move(raw)) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace lga
