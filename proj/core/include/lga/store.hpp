#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "lga/anatomy.hpp"
#include "lga/text_anatomy.hpp"

namespace lga {

inline constexpr int kManifestVersion = 1;

// All videos, class labels and text anatomies of one dataset split.
// Immutable once loaded; shared read-only across evaluation workers.
struct FeatureStore {
  std::map<std::string, FrameFeatures> videos;
  std::map<int, std::string> classes;
  std::map<int, TextAnatomy> text;
  std::size_t dim = 0;
  std::filesystem::path manifest_path;

  // Phase count shared by every text anatomy, nullopt when there is none.
  std::optional<std::size_t> text_phase_count() const;

  // Checks the cross-references load_store enforces: dims, finiteness,
  // class ids, consistent text phase counts.
  void validate() const;
};

// Manifest (UTF-8 JSON):
//   {"version": 1, "dim": C,
//    "classes": [{"id", "label", "text_blob"?, "text_has_label_embedding"?}],
//    "videos":  [{"id", "class_id", "blob", "frames"}]}
// Blob paths are relative to the manifest's directory. Text blobs hold L
// rows, or L+1 with the label embedding first when flagged.
FeatureStore load_store(const std::filesystem::path& manifest);

// Writes `dir`/manifest.json plus one feature blob per video and text
// anatomy. Output bytes depend only on the store contents.
std::filesystem::path save_store(const FeatureStore& store, const std::filesystem::path& dir);

}  // namespace lga
