#include "lga/episode.hpp"

#include <algorithm>
#include <set>

#include "lga/error.hpp"
#include "lga/random.hpp"

namespace lga {

void EpisodeShape::validate() const {
  if (way == 0) fail(ErrorKind::invalid_argument, "way N must be positive");
  if (shot == 0) fail(ErrorKind::invalid_argument, "shot K must be positive");
  if (queries_per_class == 0) fail(ErrorKind::invalid_argument, "queries_per_class must be positive");
}

EpisodeSampler::EpisodeSampler(const FeatureStore& store) {
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& [id, v] : store.videos) {
    if (v.class_id) by_class[*v.class_id].push_back(id);
  }
  for (auto& [cid, ids] : by_class) {
    class_ids_.push_back(cid);
    videos_.push_back(std::move(ids));
  }
}

Episode EpisodeSampler::sample(const EpisodeShape& shape, std::uint64_t seed) const {
  shape.validate();
  const std::size_t need_full = shape.shot + (shape.single_query ? 1 : shape.queries_per_class);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < class_ids_.size(); ++i) {
    if (videos_[i].size() >= need_full) eligible.push_back(i);
  }
  if (eligible.size() < shape.way) {
    fail(ErrorKind::invalid_argument,
         std::to_string(shape.way) + "-way episodes need " + std::to_string(shape.way) +
             " classes with >= " + std::to_string(need_full) + " videos each; the store has " +
             std::to_string(eligible.size()) + " (short by " + std::to_string(shape.way - eligible.size()) +
             ")");
  }

  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < shape.way; ++i) {
    std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
  }
  const std::size_t query_slot = shape.single_query ? rng.below(shape.way) : 0;

  Episode ep;
  ep.way = shape.way;
  ep.shot = shape.shot;
  ep.seed = seed;
  for (std::size_t slot = 0; slot < shape.way; ++slot) {
    const std::size_t ci = eligible[slot];
    const int cid = class_ids_[ci];
    ep.classes.push_back(cid);
    const std::size_t queries =
        shape.single_query ? (slot == query_slot ? 1 : 0) : shape.queries_per_class;
    std::vector<std::size_t> order(videos_[ci].size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t take = shape.shot + queries;
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(order[i], order[i + rng.below(order.size() - i)]);
    }
    for (std::size_t i = 0; i < shape.shot; ++i) ep.support.push_back({videos_[ci][order[i]], cid});
    for (std::size_t i = shape.shot; i < take; ++i) ep.queries.push_back({videos_[ci][order[i]], cid});
  }

  std::set<std::string> seen;
  for (const auto& s : ep.support) seen.insert(s.video_id);
  for (const auto& q : ep.queries) {
    if (seen.contains(q.video_id)) fail(ErrorKind::invalid_data, "support/query leakage for " + q.video_id);
  }
  return ep;
}

Episode sample_episode(const FeatureStore& store, const EpisodeShape& shape, std::uint64_t seed) {
  return EpisodeSampler(store).sample(shape, seed);
}

std::string_view to_string(SegMethod m) { return m == SegMethod::cluster ? "cluster" : "hard"; }

std::string_view to_string(TextFusion m) {
  switch (m) {
    case TextFusion::automatic: return "auto";
    case TextFusion::on: return "on";
    case TextFusion::off: return "off";
  }
  return "unknown";
}

SegMethod parse_seg_method(std::string_view text) {
  if (text == "cluster") return SegMethod::cluster;
  if (text == "hard") return SegMethod::hard;
  fail(ErrorKind::invalid_argument, "unknown segmentation method '" + std::string(text) + "' (cluster|hard)");
}

TextFusion parse_text_fusion(std::string_view text) {
  if (text == "auto") return TextFusion::automatic;
  if (text == "on") return TextFusion::on;
  if (text == "off") return TextFusion::off;
  fail(ErrorKind::invalid_argument, "unknown text fusion mode '" + std::string(text) + "' (auto|on|off)");
}

void PipelineConfig::validate() const {
  if (phases == 0) fail(ErrorKind::invalid_argument, "phase count L must be positive");
  match.validate();
}

Segmentation segment(const FrameFeatures& video, const PipelineConfig& cfg) {
  return cfg.seg_method == SegMethod::cluster ? cluster_segment(video, cfg.phases, cfg.overlap)
                                              : hard_segment(video.length(), cfg.phases, cfg.overlap);
}

std::size_t EpisodeOutcome::correct() const {
  return static_cast<std::size_t>(
      std::count_if(queries.begin(), queries.end(), [](const QueryOutcome& q) { return q.correct; }));
}

namespace {

const FrameFeatures& find_video(const FeatureStore& store, const std::string& id) {
  const auto it = store.videos.find(id);
  if (it == store.videos.end()) fail(ErrorKind::dangling_reference, "episode references unknown video '" + id + "'");
  return it->second;
}

const TextAnatomy* class_text(const FeatureStore& store, int cid, std::size_t phases) {
  const auto it = store.text.find(cid);
  if (it == store.text.end() || it->second.phase_count() != phases) return nullptr;
  return &it->second;
}

template <class Fn>
auto annotated(const std::string& video_id, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_context("video '" + video_id + "'");
  }
}

}  // namespace

EpisodeOutcome run_episode(const Episode& episode, const FeatureStore& store,
                           const FusionWeights& weights, const PipelineConfig& cfg) {
  cfg.validate();
  const bool use_text_branch = cfg.match.alpha < 1.0;
  const TextAnatomy no_text = zero_text(cfg.phases, store.dim);

  std::vector<TextAnatomy> texts;
  if (use_text_branch) {
    for (int cid : episode.classes) {
      const auto* t = class_text(store, cid, cfg.phases);
      if (t == nullptr) {
        fail(ErrorKind::invalid_argument, "class " + std::to_string(cid) + " has no text anatomy with L=" +
                                              std::to_string(cfg.phases) +
                                              " phases (required when alpha < 1)");
      }
      texts.push_back(*t);
    }
  }

  ClassSupports supports;
  for (int cid : episode.classes) supports.emplace_back(cid, std::vector<Prototype>{});
  for (const auto& s : episode.support) {
    auto slot = std::find_if(supports.begin(), supports.end(), [&](const auto& e) { return e.first == s.class_id; });
    if (slot == supports.end()) {
      fail(ErrorKind::invalid_argument, "support video '" + s.video_id + "' has a class outside the episode");
    }
    const TextAnatomy* text = &no_text;
    if (cfg.text_fusion != TextFusion::off) {
      if (const auto* t = class_text(store, s.class_id, cfg.phases)) {
        text = t;
      } else if (cfg.text_fusion == TextFusion::on) {
        fail(ErrorKind::invalid_argument, "text fusion is on but class " + std::to_string(s.class_id) +
                                              " has no text anatomy with L=" + std::to_string(cfg.phases));
      }
    }
    slot->second.push_back(annotated(s.video_id, [&] {
      const auto& video = find_video(store, s.video_id);
      return fuse(video, segment(video, cfg), *text, weights, cfg.fusion);
    }));
  }

  EpisodeOutcome out;
  for (const auto& q : episode.queries) {
    annotated(q.video_id, [&] {
      const auto& video = find_video(store, q.video_id);
      const Prototype proto = fuse(video, segment(video, cfg), no_text, weights, cfg.fusion);
      QueryOutcome r;
      r.video_id = q.video_id;
      r.true_class = q.class_id;
      r.video_video = video_video_scores(proto, supports, cfg.match);
      r.correct_video_video = r.video_video.predicted_class() == q.class_id;
      if (use_text_branch) {
        r.video_text = video_text_scores(proto, texts, cfg.match);
        r.correct_video_text = r.video_text->predicted_class() == q.class_id;
        r.combined = combine(r.video_video, *r.video_text, cfg.match.alpha);
      } else {
        r.combined = r.video_video;
        r.combined.source = ScoreSource::combined;
      }
      r.correct = r.combined.predicted_class() == q.class_id;
      out.queries.push_back(std::move(r));
      return 0;
    });
  }
  return out;
}

}  // namespace lga
