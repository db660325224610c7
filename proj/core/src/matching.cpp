#include "lga/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lga/error.hpp"

namespace lga {

std::string_view to_string(ScoreSource s) {
  switch (s) {
    case ScoreSource::video_video: return "video_video";
    case ScoreSource::video_text: return "video_text";
    case ScoreSource::combined: return "combined";
  }
  return "unknown";
}

std::string_view to_string(Metric m) { return m == Metric::ab_mhm ? "ab_mhm" : "bi_mhm"; }

std::string_view to_string(KShotReduction k) {
  return k == KShotReduction::mean_distance ? "mean_distance" : "min_distance";
}

Metric parse_metric(std::string_view text) {
  if (text == "ab_mhm") return Metric::ab_mhm;
  if (text == "bi_mhm") return Metric::bi_mhm;
  fail(ErrorKind::invalid_argument, "unknown metric '" + std::string(text) + "' (ab_mhm|bi_mhm)");
}

KShotReduction parse_kshot_reduction(std::string_view text) {
  if (text == "mean_distance" || text == "mean") return KShotReduction::mean_distance;
  if (text == "min_distance" || text == "min") return KShotReduction::min_distance;
  fail(ErrorKind::invalid_argument,
       "unknown k-shot reduction '" + std::string(text) + "' (mean_distance|min_distance)");
}

std::size_t ClassScores::argmax() const {
  if (probs.empty()) fail(ErrorKind::invalid_argument, "argmax of empty scores");
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void MatchConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::invalid_argument, "alpha must be in [0,1]");
  if (!(temperature_vt > 0.0) || !std::isfinite(temperature_vt)) {
    fail(ErrorKind::invalid_argument, "temperature_vt must be a positive finite number");
  }
}

namespace {

using RowRange = std::pair<std::size_t, std::size_t>;

void check_rows(const Prototype& p, const char* which) {
  if (p.fused.rows() != p.segmentation.total_rows()) {
    fail(ErrorKind::invalid_argument, std::string(which) + " prototype has " +
                                          std::to_string(p.fused.rows()) + " rows but its segmentation covers " +
                                          std::to_string(p.segmentation.total_rows()));
  }
}

// Bidirectional nearest-neighbour sum between two row blocks. The pairwise
// distance matrix is swept once, updating both directions' running minima.
double bidirectional_sum(const Matrix& a, RowRange ra, const Matrix& b, RowRange rb) {
  const std::size_t nb = rb.second - rb.first;
  std::vector<double> b_min(nb, std::numeric_limits<double>::infinity());
  double total = 0.0;
  for (std::size_t i = ra.first; i < ra.second; ++i) {
    const auto ai = a.row(i);
    double a_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = euclidean_distance(ai, b.row(rb.first + j));
      a_min = std::min(a_min, d);
      b_min[j] = std::min(b_min[j], d);
    }
    total += a_min;
  }
  for (double d : b_min) total += d;
  return total;
}

void check_frame_count(std::size_t frame_count) {
  if (frame_count == 0) fail(ErrorKind::invalid_argument, "frame count T must be positive");
}

}  // namespace

double ab_mhm(const Prototype& query, const Prototype& support, std::size_t frame_count) {
  check_frame_count(frame_count);
  if (query.phase_count() != support.phase_count()) {
    fail(ErrorKind::invalid_argument, "phase count mismatch: query L=" +
                                          std::to_string(query.phase_count()) + ", support L=" +
                                          std::to_string(support.phase_count()));
  }
  if (query.fused.cols() != support.fused.cols()) {
    fail(ErrorKind::invalid_argument, "feature dim mismatch between query and support");
  }
  check_rows(query, "query");
  check_rows(support, "support");
  double total = 0.0;
  std::size_t qo = 0;
  std::size_t so = 0;
  for (std::size_t k = 0; k < query.phase_count(); ++k) {
    const std::size_t qn = query.segmentation.clusters[k].size();
    const std::size_t sn = support.segmentation.clusters[k].size();
    if (qn == 0 || sn == 0) {
      fail(ErrorKind::degenerate_phase, "phase " + std::to_string(k) + " is empty on the " +
                                            (qn == 0 ? "query" : "support") + " side");
    }
    total += bidirectional_sum(query.fused, {qo, qo + qn}, support.fused, {so, so + sn});
    qo += qn;
    so += sn;
  }
  return total / static_cast<double>(frame_count);
}

double bi_mhm(const Prototype& query, const Prototype& support, std::size_t frame_count) {
  check_frame_count(frame_count);
  if (query.fused.rows() == 0 || support.fused.rows() == 0) {
    fail(ErrorKind::invalid_argument, "bi_mhm of an empty prototype");
  }
  if (query.fused.cols() != support.fused.cols()) {
    fail(ErrorKind::invalid_argument, "feature dim mismatch between query and support");
  }
  return bidirectional_sum(query.fused, {0, query.fused.rows()}, support.fused,
                           {0, support.fused.rows()}) /
         static_cast<double>(frame_count);
}

double distance(const Prototype& query, const Prototype& support, std::size_t frame_count,
                Metric metric) {
  return metric == Metric::ab_mhm ? ab_mhm(query, support, frame_count)
                                  : bi_mhm(query, support, frame_count);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) fail(ErrorKind::invalid_argument, "softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(top)) fail(ErrorKind::numeric, "softmax input is not finite");
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    z += out[i];
  }
  for (auto& p : out) p /= z;
  return out;
}

ClassScores video_video_scores(const Prototype& query, const ClassSupports& supports,
                               const MatchConfig& cfg) {
  cfg.validate();
  if (supports.empty()) fail(ErrorKind::invalid_argument, "no candidate classes");
  const std::size_t frame_count = query.segmentation.source_T;
  ClassScores out;
  out.source = ScoreSource::video_video;
  std::vector<double> logits;
  for (const auto& [class_id, protos] : supports) {
    if (protos.empty()) {
      fail(ErrorKind::invalid_argument, "class " + std::to_string(class_id) + " has no support videos");
    }
    if (std::find(out.class_ids.begin(), out.class_ids.end(), class_id) != out.class_ids.end()) {
      fail(ErrorKind::invalid_argument, "duplicate class id " + std::to_string(class_id));
    }
    double reduced = cfg.kshot_reduction == KShotReduction::min_distance
                         ? std::numeric_limits<double>::infinity()
                         : 0.0;
    for (const auto& s : protos) {
      const double d = distance(query, s, frame_count, cfg.metric);
      if (cfg.kshot_reduction == KShotReduction::min_distance) {
        reduced = std::min(reduced, d);
      } else {
        reduced += d;
      }
    }
    if (cfg.kshot_reduction == KShotReduction::mean_distance) {
      reduced /= static_cast<double>(protos.size());
    }
    out.class_ids.push_back(class_id);
    logits.push_back(-reduced);
  }
  out.probs = softmax(logits);
  return out;
}

Matrix pool_phases(const Prototype& proto) {
  check_rows(proto, "query");
  Matrix pooled(proto.phase_count(), proto.fused.cols());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < proto.phase_count(); ++k) {
    const std::size_t n = proto.segmentation.clusters[k].size();
    if (n == 0) fail(ErrorKind::degenerate_phase, "phase " + std::to_string(k) + " is empty");
    auto dst = pooled.row(k);
    for (std::size_t r = offset; r < offset + n; ++r) {
      const auto src = proto.fused.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    for (auto& v : dst) v /= static_cast<double>(n);
    offset += n;
  }
  return pooled;
}

ClassScores video_text_scores(const Prototype& query, std::span<const TextAnatomy> texts,
                              const MatchConfig& cfg) {
  cfg.validate();
  if (texts.empty()) fail(ErrorKind::invalid_argument, "no candidate classes");
  const Matrix pooled = pool_phases(query);
  ClassScores out;
  out.source = ScoreSource::video_text;
  std::vector<double> logits;
  for (const auto& t : texts) {
    if (t.phase_count() != pooled.rows()) {
      fail(ErrorKind::invalid_argument, "phase axis: class " + std::to_string(t.class_id) + " has " +
                                            std::to_string(t.phase_count()) + " text phases, query has " +
                                            std::to_string(pooled.rows()));
    }
    if (t.dim() != pooled.cols()) {
      fail(ErrorKind::invalid_argument, "feature axis: class " + std::to_string(t.class_id) +
                                            " text dim " + std::to_string(t.dim()) + " vs query dim " +
                                            std::to_string(pooled.cols()));
    }
    if (std::find(out.class_ids.begin(), out.class_ids.end(), t.class_id) != out.class_ids.end()) {
      fail(ErrorKind::invalid_argument, "duplicate class id " + std::to_string(t.class_id));
    }
    double score = 0.0;
    for (std::size_t k = 0; k < pooled.rows(); ++k) score += dot(pooled.row(k), t.phase_embeddings.row(k));
    out.class_ids.push_back(t.class_id);
    logits.push_back(score / cfg.temperature_vt);
  }
  out.probs = softmax(logits);
  return out;
}

namespace {

double power(double base, double exponent) {
  if (exponent == 0.0) return 1.0;
  return std::pow(base, exponent);
}

}  // namespace

ClassScores combine(const ClassScores& p_vv, const ClassScores& p_vt, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::invalid_argument, "alpha must be in [0,1]");
  if (p_vv.class_ids != p_vt.class_ids || p_vv.probs.size() != p_vv.class_ids.size() ||
      p_vt.probs.size() != p_vt.class_ids.size()) {
    fail(ErrorKind::invalid_argument, "video-video and video-text scores cover different classes");
  }
  ClassScores out;
  out.class_ids = p_vv.class_ids;
  out.source = ScoreSource::combined;
  if (alpha == 1.0) {
    out.probs = p_vv.probs;
    return out;
  }
  if (alpha == 0.0) {
    out.probs = p_vt.probs;
    return out;
  }
  out.probs.resize(p_vv.probs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    out.probs[i] = power(p_vv.probs[i], alpha) * power(p_vt.probs[i], 1.0 - alpha);
    z += out.probs[i];
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    fail(ErrorKind::numeric, "geometric mean vanished for every class; cannot renormalize");
  }
  for (auto& p : out.probs) p /= z;
  return out;
}

}  // namespace lga
