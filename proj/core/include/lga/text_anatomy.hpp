#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lga/matrix.hpp"

namespace lga {

// An action label broken into ordered sub-action descriptions
// (initiation -> progression -> conclusion when there are three).
struct AtomicDescriptions {
  std::string label;
  std::vector<std::string> descriptions;
  std::optional<std::string> scene;

  std::size_t phase_count() const noexcept { return descriptions.size(); }
  friend bool operator==(const AtomicDescriptions&, const AtomicDescriptions&) = default;
};

// Per-class text embeddings: one row per phase, plus an optional embedding
// of the bare label.
struct TextAnatomy {
  int class_id = 0;
  std::optional<std::vector<double>> label_embedding;
  Matrix phase_embeddings;

  std::size_t phase_count() const noexcept { return phase_embeddings.rows(); }
  std::size_t dim() const noexcept { return phase_embeddings.cols(); }
};

// "three", "two", ... for small counts; decimal digits otherwise.
std::string spell_count(std::size_t n);

// The decomposition prompt sent to the language model. For three phases this
// is the reference prompt word for word, followed by the label to decompose.
// Other phase counts swap the spelled-out count and append a note asking for
// that many entries; the worked example always keeps three.
std::string build_prompt(std::string_view label, std::size_t phases = 3);

// Pulls the first JSON object out of a model reply (surrounding prose and
// ``` fences are ignored) and reads "Action Label" and
// "sub-action description". Throws ParseError carrying `raw` on failure,
// including when `expected_phases` is given and the arity differs.
AtomicDescriptions parse_llm_response(std::string_view raw,
                                      std::optional<std::size_t> expected_phases = std::nullopt);

// Inverse of parse_llm_response: the reply shape the prompt asks for.
std::string to_llm_json(const AtomicDescriptions& desc);

// On-disk cache of fetched descriptions keyed by (label, L). The file is a
// UTF-8 JSON array of {"label", "L", "descriptions", "scene"?} objects,
// written sorted by key so identical caches produce identical bytes.
class DescriptionCache {
 public:
  static DescriptionCache load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const AtomicDescriptions* find(const std::string& label, std::size_t phases) const;
  void put(AtomicDescriptions desc);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::size_t>, AtomicDescriptions> entries_;
};

}  // namespace lga
