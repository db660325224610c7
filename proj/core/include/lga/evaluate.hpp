#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lga/episode.hpp"

namespace lga {

enum class CiMethod { normal, exact };

struct EvalConfig {
  EpisodeShape shape;
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  std::size_t threads = 1;
  CiMethod ci = CiMethod::normal;
  bool keep_episode_log = false;

  void validate() const;
};

struct EpisodeLog {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t queries = 0;
  std::size_t correct = 0;
  std::size_t correct_video_video = 0;
  std::optional<std::size_t> correct_video_text;
};

struct EvalReport {
  std::size_t episodes = 0;
  std::size_t queries = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;         // combined branch
  double ci95_halfwidth = 0.0;
  double ci95_lower = 0.0;
  double ci95_upper = 0.0;
  double accuracy_video_video = 0.0;
  std::optional<double> accuracy_video_text;
  double wall_time_seconds = 0.0;
  nlohmann::ordered_json config;
  std::vector<EpisodeLog> episode_log;
};

// Normal approximation: p +/- 1.96 sqrt(p(1-p)/n), clamped to [0, 1].
std::pair<double, double> normal_interval(std::size_t successes, std::size_t trials);
// Clopper-Pearson 95% interval.
std::pair<double, double> exact_interval(std::size_t successes, std::size_t trials);

// Runs cfg.episodes independent episodes on a pool of cfg.threads workers.
// Episode i uses seed derive_seed(cfg.seed, i), and results are reduced in
// episode order, so the report (timing aside) does not depend on thread
// count or scheduling. The first failing episode (lowest index) aborts the
// run with its index and seed in the message.
EvalReport evaluate(const FeatureStore& store, const FusionWeights& weights, const EvalConfig& cfg);

nlohmann::ordered_json config_to_json(const EvalConfig& cfg);
nlohmann::ordered_json to_json(const EvalReport& report);

// index,seed,queries,correct,correct_video_video,correct_video_text
std::string episode_log_csv(const EvalReport& report);

}  // namespace lga
