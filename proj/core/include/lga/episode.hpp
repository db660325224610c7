#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lga/fusion.hpp"
#include "lga/matching.hpp"
#include "lga/store.hpp"

namespace lga {

struct EpisodeShape {
  std::size_t way = 5;   // N
  std::size_t shot = 1;  // K
  std::size_t queries_per_class = 1;
  // One query in total, drawn from a uniformly chosen episode class.
  // When false every class contributes queries_per_class queries.
  bool single_query = true;

  void validate() const;
};

struct LabeledVideo {
  std::string video_id;
  int class_id = 0;
  friend bool operator==(const LabeledVideo&, const LabeledVideo&) = default;
};

struct Episode {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::vector<int> classes;            // N distinct ids in sampled order
  std::vector<LabeledVideo> support;   // class-major, K per class
  std::vector<LabeledVideo> queries;
  std::uint64_t seed = 0;

  friend bool operator==(const Episode&, const Episode&) = default;
};

// Precomputes the class -> videos index once so many episodes can be drawn
// cheaply. Sampling is a pure function of (store contents, shape, seed):
//   1. eligible classes = those with >= K + queries-needed videos, in id order;
//   2. partial Fisher-Yates picks N of them;
//   3. in single-query mode one of the N slots is drawn for the query;
//   4. per class, partial Fisher-Yates over its videos (id order) picks
//      support first, then queries.
class EpisodeSampler {
 public:
  explicit EpisodeSampler(const FeatureStore& store);
  Episode sample(const EpisodeShape& shape, std::uint64_t seed) const;

 private:
  std::vector<int> class_ids_;
  std::vector<std::vector<std::string>> videos_;
};

Episode sample_episode(const FeatureStore& store, const EpisodeShape& shape, std::uint64_t seed);

enum class SegMethod { cluster, hard };
// auto: condition support fusion on the class text when the store has a
// text anatomy with L phases for it, otherwise fuse without text.
enum class TextFusion { automatic, on, off };

std::string_view to_string(SegMethod m);
std::string_view to_string(TextFusion m);
SegMethod parse_seg_method(std::string_view text);
TextFusion parse_text_fusion(std::string_view text);

struct PipelineConfig {
  SegMethod seg_method = SegMethod::cluster;
  std::size_t phases = 3;   // L
  std::size_t overlap = 1;
  FusionOptions fusion;
  TextFusion text_fusion = TextFusion::automatic;
  MatchConfig match;

  void validate() const;
};

Segmentation segment(const FrameFeatures& video, const PipelineConfig& cfg);

struct QueryOutcome {
  std::string video_id;
  int true_class = 0;
  ClassScores video_video;
  std::optional<ClassScores> video_text;  // absent when alpha == 1
  ClassScores combined;
  bool correct = false;
  bool correct_video_video = false;
  std::optional<bool> correct_video_text;
};

struct EpisodeOutcome {
  std::vector<QueryOutcome> queries;
  std::size_t correct() const;
};

// segment -> fuse -> video-video (+ video-text) scores -> combine, for every
// query. Supports are fused with their class text; queries, whose class is
// unknown, with zero text. With alpha == 1 the video-text branch is skipped.
EpisodeOutcome run_episode(const Episode& episode, const FeatureStore& store,
                           const FusionWeights& weights, const PipelineConfig& cfg);

}  // namespace lga
