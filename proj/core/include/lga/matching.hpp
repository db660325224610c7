#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lga/fusion.hpp"
#include "lga/text_anatomy.hpp"

namespace lga {

enum class ScoreSource { video_video, video_text, combined };
enum class Metric { ab_mhm, bi_mhm };
enum class KShotReduction { mean_distance, min_distance };

std::string_view to_string(ScoreSource s);
std::string_view to_string(Metric m);
std::string_view to_string(KShotReduction k);
Metric parse_metric(std::string_view text);
KShotReduction parse_kshot_reduction(std::string_view text);

// A probability per candidate class, in candidate order.
struct ClassScores {
  std::vector<double> probs;
  std::vector<int> class_ids;
  ScoreSource source = ScoreSource::video_video;

  // Index of the highest probability; ties resolve to the lower index.
  std::size_t argmax() const;
  int predicted_class() const { return class_ids.at(argmax()); }
};

struct MatchConfig {
  double alpha = 1.0;           // weight of the video-video branch
  double temperature_vt = 1.0;  // divides video-text logits
  Metric metric = Metric::ab_mhm;
  KShotReduction kshot_reduction = KShotReduction::mean_distance;

  void validate() const;
};

// Phase-aligned bidirectional Hausdorff sum: for every phase k, each query
// row contributes its distance to the nearest support row of phase k, and
// vice versa; the total is divided by `frame_count` (the query's T).
double ab_mhm(const Prototype& query, const Prototype& support, std::size_t frame_count);

// Same bidirectional nearest-row sums over all rows, phases ignored.
double bi_mhm(const Prototype& query, const Prototype& support, std::size_t frame_count);

double distance(const Prototype& query, const Prototype& support, std::size_t frame_count,
                Metric metric);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

using ClassSupports = std::vector<std::pair<int, std::vector<Prototype>>>;

// Softmax over negated per-class distances. A class with K supports is
// scored by the mean (or min) of its K distances.
ClassScores video_video_scores(const Prototype& query, const ClassSupports& supports,
                               const MatchConfig& cfg);

// Per-class logit: sum over phases of <mean query row of phase k, text row k>,
// divided by cfg.temperature_vt.
ClassScores video_text_scores(const Prototype& query, std::span<const TextAnatomy> texts,
                              const MatchConfig& cfg);

// p_vv^alpha * p_vt^(1-alpha), renormalized to sum to one. 0^0 is taken
// as 1, and alpha = 0 or 1 return the corresponding input unchanged.
ClassScores combine(const ClassScores& p_vv, const ClassScores& p_vt, double alpha);

// Mean of each phase's rows, one output row per phase.
Matrix pool_phases(const Prototype& proto);

}  // namespace lga
