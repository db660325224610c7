#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lga/matrix.hpp"

namespace lga {

// One video: T rows of C-dimensional frame embeddings in temporal order.
struct FrameFeatures {
  Matrix frames;
  std::string video_id;
  std::optional<int> class_id;

  std::size_t length() const noexcept { return frames.rows(); }
  std::size_t dim() const noexcept { return frames.cols(); }
};

using IndexList = std::vector<std::size_t>;

// L temporally ordered phases over frame indices [0, source_T). With
// overlap > 0 each phase also carries boundary frames borrowed from its
// neighbours, so index lists may share entries.
struct Segmentation {
  std::vector<IndexList> clusters;
  std::size_t overlap = 0;
  std::size_t source_T = 0;

  std::size_t phase_count() const noexcept { return clusters.size(); }
  std::size_t total_rows() const noexcept;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

// Throws invalid_data if any entry is NaN/Inf.
void validate_frames(const FrameFeatures& features);

std::vector<double> mean_cluster_feature(const FrameFeatures& features, const IndexList& indices);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Greedy agglomerative segmentation: starting from singletons, repeatedly
// merge the adjacent pair whose mean vectors have the highest cosine
// similarity (ties go to the earliest pair) until `phases` clusters remain,
// then inject `overlap` boundary frames into each neighbour.
Segmentation cluster_segment(const FrameFeatures& features, std::size_t phases,
                             std::size_t overlap = 1);

// Uniform split; earlier segments absorb the remainder one frame each.
Segmentation hard_segment(std::size_t frame_count, std::size_t phases, std::size_t overlap = 1);

// Adds the last min(overlap, |S_{i-1}|) indices of the left neighbour and the
// first min(overlap, |S_{i+1}|) indices of the right neighbour to each
// cluster. Input clusters must be the disjoint, contiguous partition.
std::vector<IndexList> inject_overlap(const std::vector<IndexList>& partition,
                                      std::size_t overlap);

}  // namespace lga
