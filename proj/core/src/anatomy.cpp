#include "lga/anatomy.hpp"

#include <cmath>
#include <numeric>

#include "lga/error.hpp"

namespace lga {

std::size_t Segmentation::total_rows() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

void validate_frames(const FrameFeatures& features) {
  const auto& m = features.frames;
  if (m.rows() == 0 || m.cols() == 0) {
    fail(ErrorKind::invalid_data, "video '" + features.video_id + "' has an empty feature matrix");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        fail(ErrorKind::invalid_data, "video '" + features.video_id +
                                          "' has a non-finite entry at frame " + std::to_string(r) +
                                          ", column " + std::to_string(c));
      }
    }
  }
}

std::vector<double> mean_cluster_feature(const FrameFeatures& features, const IndexList& indices) {
  if (indices.empty()) fail(ErrorKind::invalid_argument, "mean of an empty index list");
  const auto& m = features.frames;
  std::vector<double> mean(m.cols(), 0.0);
  for (auto idx : indices) {
    if (idx >= m.rows()) {
      fail(ErrorKind::invalid_argument, "frame index " + std::to_string(idx) + " out of range for T=" +
                                            std::to_string(m.rows()));
    }
    const auto row = m.row(idx);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  const double n = static_cast<double>(indices.size());
  for (auto& v : mean) v /= n;
  return mean;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) {
    fail(ErrorKind::degenerate_feature, "cosine similarity of a zero-norm vector is undefined");
  }
  return dot(a, b) / (na * nb);
}

namespace {

std::string range_text(const IndexList& cluster) {
  return "[" + std::to_string(cluster.front()) + ", " + std::to_string(cluster.back()) + "]";
}

void check_phase_count(std::size_t frame_count, std::size_t phases) {
  if (phases < 1 || phases > frame_count) {
    fail(ErrorKind::invalid_argument, "phase count L=" + std::to_string(phases) +
                                          " must satisfy 1 <= L <= T=" + std::to_string(frame_count));
  }
}

}  // namespace

std::vector<IndexList> inject_overlap(const std::vector<IndexList>& partition, std::size_t overlap) {
  if (overlap == 0) return partition;
  std::vector<IndexList> out(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    auto& dst = out[i];
    if (i > 0) {
      const auto& left = partition[i - 1];
      const auto take = std::min(overlap, left.size());
      dst.insert(dst.end(), left.end() - static_cast<std::ptrdiff_t>(take), left.end());
    }
    dst.insert(dst.end(), partition[i].begin(), partition[i].end());
    if (i + 1 < partition.size()) {
      const auto& right = partition[i + 1];
      const auto take = std::min(overlap, right.size());
      dst.insert(dst.end(), right.begin(), right.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }
  return out;
}

Segmentation cluster_segment(const FrameFeatures& features, std::size_t phases, std::size_t overlap) {
  const std::size_t T = features.length();
  check_phase_count(T, phases);
  validate_frames(features);

  std::vector<IndexList> clusters(T);
  for (std::size_t i = 0; i < T; ++i) clusters[i] = {i};

  // Cached means; only the merged cluster's mean is recomputed per round.
  std::vector<std::vector<double>> means;
  means.reserve(T);
  for (const auto& c : clusters) means.push_back(mean_cluster_feature(features, c));

  auto similarity = [&](std::size_t j) {
    const auto& a = means[j];
    const auto& b = means[j + 1];
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) {
      const auto& bad = na == 0.0 ? clusters[j] : clusters[j + 1];
      fail(ErrorKind::degenerate_feature,
           "video '" + features.video_id + "': mean feature of frames " + range_text(bad) +
               " has zero norm; cosine similarity is undefined");
    }
    return dot(a, b) / (na * nb);
  };

  std::vector<double> sims;
  if (clusters.size() > phases) {
    sims.resize(T - 1);
    for (std::size_t j = 0; j + 1 < clusters.size(); ++j) sims[j] = similarity(j);
  }

  while (clusters.size() > phases) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < sims.size(); ++j) {
      if (sims[j] > sims[best]) best = j;
    }
    auto& dst = clusters[best];
    dst.insert(dst.end(), clusters[best + 1].begin(), clusters[best + 1].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    means.erase(means.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    means[best] = mean_cluster_feature(features, dst);

    sims.erase(sims.begin() + static_cast<std::ptrdiff_t>(best));
    if (clusters.size() <= phases) break;
    if (best > 0) sims[best - 1] = similarity(best - 1);
    if (best + 1 < clusters.size()) sims[best] = similarity(best);
  }

  Segmentation seg;
  seg.clusters = inject_overlap(clusters, overlap);
  seg.overlap = overlap;
  seg.source_T = T;
  return seg;
}

Segmentation hard_segment(std::size_t frame_count, std::size_t phases, std::size_t overlap) {
  check_phase_count(frame_count, phases);
  const std::size_t base = frame_count / phases;
  const std::size_t extra = frame_count % phases;
  std::vector<IndexList> parts(phases);
  std::size_t next = 0;
  for (std::size_t i = 0; i < phases; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    parts[i].resize(size);
    std::iota(parts[i].begin(), parts[i].end(), next);
    next += size;
  }
  Segmentation seg;
  seg.clusters = inject_overlap(parts, overlap);
  seg.overlap = overlap;
  seg.source_T = frame_count;
  return seg;
}

}  // namespace lga
