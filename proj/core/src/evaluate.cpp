#include "lga/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/distributions/binomial.hpp>

#include "lga/error.hpp"
#include "lga/random.hpp"

namespace lga {

void EvalConfig::validate() const {
  shape.validate();
  pipeline.validate();
  if (episodes == 0) fail(ErrorKind::invalid_argument, "episodes must be positive");
}

std::pair<double, double> normal_interval(std::size_t successes, std::size_t trials) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double half = 1.96 * std::sqrt(p * (1.0 - p) / n);
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

std::pair<double, double> exact_interval(std::size_t successes, std::size_t trials) {
  if (trials == 0) return {0.0, 1.0};
  using boost::math::binomial_distribution;
  const auto n = static_cast<double>(trials);
  const auto k = static_cast<double>(successes);
  constexpr double kTail = 0.025;
  const double lo = binomial_distribution<>::find_lower_bound_on_p(n, k, kTail);
  const double hi = binomial_distribution<>::find_upper_bound_on_p(n, k, kTail);
  return {lo, hi};
}

nlohmann::ordered_json config_to_json(const EvalConfig& cfg) {
  nlohmann::ordered_json j;
  j["way"] = cfg.shape.way;
  j["shot"] = cfg.shape.shot;
  j["single_query"] = cfg.shape.single_query;
  j["queries_per_class"] = cfg.shape.queries_per_class;
  j["episodes"] = cfg.episodes;
  j["seed"] = cfg.seed;
  j["seg_method"] = to_string(cfg.pipeline.seg_method);
  j["L"] = cfg.pipeline.phases;
  j["overlap"] = cfg.pipeline.overlap;
  j["text_fusion"] = to_string(cfg.pipeline.text_fusion);
  j["attention_residual"] = cfg.pipeline.fusion.attention_residual;
  j["layer_norm"] = cfg.pipeline.fusion.layer_norm;
  j["alpha"] = cfg.pipeline.match.alpha;
  j["temperature_vt"] = cfg.pipeline.match.temperature_vt;
  j["metric"] = to_string(cfg.pipeline.match.metric);
  j["kshot_reduction"] = to_string(cfg.pipeline.match.kshot_reduction);
  j["ci"] = cfg.ci == CiMethod::normal ? "normal" : "exact";
  j["threads"] = cfg.threads;
  return j;
}

EvalReport evaluate(const FeatureStore& store, const FusionWeights& weights, const EvalConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const EpisodeSampler sampler(store);
  const bool text_branch = cfg.pipeline.match.alpha < 1.0;

  std::vector<EpisodeLog> logs(cfg.episodes);
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::optional<std::size_t> failed_index;
  std::string failure;
  ErrorKind failure_kind = ErrorKind::invalid_argument;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.episodes) return;
      {
        std::lock_guard lock(error_mu);
        if (failed_index && *failed_index < i) return;
      }
      const std::uint64_t seed = derive_seed(cfg.seed, i);
      try {
        const Episode ep = sampler.sample(cfg.shape, seed);
        const EpisodeOutcome outcome = run_episode(ep, store, weights, cfg.pipeline);
        EpisodeLog& log = logs[i];
        log.index = i;
        log.seed = seed;
        log.queries = outcome.queries.size();
        log.correct = outcome.correct();
        if (text_branch) log.correct_video_text = 0;
        for (const auto& q : outcome.queries) {
          log.correct_video_video += q.correct_video_video ? 1 : 0;
          if (text_branch && q.correct_video_text.value_or(false)) ++*log.correct_video_text;
        }
      } catch (const Error& e) {
        std::lock_guard lock(error_mu);
        if (!failed_index || i < *failed_index) {
          failed_index = i;
          failure = e.what();
          failure_kind = e.kind();
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mu);
        if (!failed_index || i < *failed_index) {
          failed_index = i;
          failure = e.what();
          failure_kind = ErrorKind::numeric;
        }
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, cfg.episodes);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failed_index) {
    throw Error(failure_kind, "episode " + std::to_string(*failed_index) + " (seed " +
                                  std::to_string(derive_seed(cfg.seed, *failed_index)) + "): " + failure);
  }

  EvalReport report;
  report.episodes = cfg.episodes;
  std::size_t correct_vv = 0;
  std::size_t correct_vt = 0;
  for (const auto& log : logs) {
    report.queries += log.queries;
    report.correct += log.correct;
    correct_vv += log.correct_video_video;
    correct_vt += log.correct_video_text.value_or(0);
  }
  const double n = static_cast<double>(report.queries);
  report.accuracy = static_cast<double>(report.correct) / n;
  report.accuracy_video_video = static_cast<double>(correct_vv) / n;
  if (text_branch) report.accuracy_video_text = static_cast<double>(correct_vt) / n;
  report.ci95_halfwidth = 1.96 * std::sqrt(report.accuracy * (1.0 - report.accuracy) / n);
  if (cfg.ci == CiMethod::normal) {
    std::tie(report.ci95_lower, report.ci95_upper) = normal_interval(report.correct, report.queries);
  } else {
    std::tie(report.ci95_lower, report.ci95_upper) = exact_interval(report.correct, report.queries);
    report.ci95_halfwidth = (report.ci95_upper - report.ci95_lower) / 2.0;
  }
  report.config = config_to_json(cfg);
  if (cfg.keep_episode_log) report.episode_log = std::move(logs);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["episodes"] = r.episodes;
  j["queries"] = r.queries;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy;
  j["ci95_halfwidth"] = r.ci95_halfwidth;
  j["ci95_lower"] = r.ci95_lower;
  j["ci95_upper"] = r.ci95_upper;
  nlohmann::ordered_json per_source;
  per_source["video_video"] = r.accuracy_video_video;
  per_source["video_text"] =
      r.accuracy_video_text ? nlohmann::ordered_json(*r.accuracy_video_text) : nlohmann::ordered_json();
  per_source["combined"] = r.accuracy;
  j["accuracy_per_source"] = std::move(per_source);
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["config"] = r.config;
  return j;
}

std::string episode_log_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "index,seed,queries,correct,correct_video_video,correct_video_text\n";
  for (const auto& e : r.episode_log) {
    out << e.index << ',' << e.seed << ',' << e.queries << ',' << e.correct << ','
        << e.correct_video_video << ',';
    if (e.correct_video_text) out << *e.correct_video_text;
    out << '\n';
  }
  return out.str();
}

}  // namespace lga
