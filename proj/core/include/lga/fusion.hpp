#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "lga/anatomy.hpp"
#include "lga/matrix.hpp"
#include "lga/text_anatomy.hpp"

namespace lga {

// Parameters of the cross-attention + feed-forward fusion block. All
// matrices act on row vectors (y = x * W). Head k owns columns
// [k*d_k, (k+1)*d_k) of W_Q, W_K and W_V, with d_k = dim / heads.
struct FusionWeights {
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t hidden = 0;
  Matrix w_q;       // dim x dim
  Matrix w_k;       // dim x dim
  Matrix w_v;       // dim x dim
  Matrix w_o;       // dim x dim
  Matrix ffn1_w;    // dim x hidden
  std::vector<double> ffn1_b;  // hidden
  Matrix ffn2_w;    // hidden x dim
  std::vector<double> ffn2_b;  // dim

  std::size_t head_dim() const noexcept { return heads == 0 ? 0 : dim / heads; }

  // Throws invalid_argument on shape problems, invalid_data on NaN/Inf.
  void validate() const;

  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

// Seeded random init: projections and the first FFN layer drawn uniformly
// with variance 1/dim; the second FFN layer and all biases are zero, so a
// fresh block is attention plus identity residual. Every value is exactly
// representable as float so the weights file round-trips losslessly.
FusionWeights init_weights(std::size_t dim, std::size_t heads, std::size_t hidden,
                           std::uint64_t seed);

// Identity projections scaled by `sharpness` on W_Q, zero FFN. With
// well-separated features each frame attends almost entirely to frames of
// the same content, so the block acts as a per-phase denoiser.
FusionWeights passthrough_weights(std::size_t dim, std::size_t heads, std::size_t hidden,
                                  double sharpness = 1.0);

// Weights file: "LGAW", u16 version, u32 dim, heads, hidden, then f32
// little-endian parameters in the order W_Q, W_K, W_V, W_O, FFN1 weight,
// FFN1 bias, FFN2 weight, FFN2 bias (matrices row-major).
void write_weights(const std::filesystem::path& path, const FusionWeights& weights);
FusionWeights read_weights(const std::filesystem::path& path);

struct FusionOptions {
  // Adds the attention query back onto the attention output before the FFN.
  bool attention_residual = false;
  // Parameter-free layer norm on the attention output before the FFN.
  bool layer_norm = false;
};

// A fused video: rows grouped phase by phase in segmentation order, so
// phase i owns the next segmentation.clusters[i].size() rows.
struct Prototype {
  Matrix fused;
  Segmentation segmentation;
  std::optional<int> class_id;

  std::size_t phase_count() const noexcept { return segmentation.phase_count(); }
  // First row of phase `phase`; phase_offset(phase_count()) == fused.rows().
  std::size_t phase_offset(std::size_t phase) const noexcept;
};

// Debug hook: pre-softmax logits and attention weights for each head
// (rows = queries, cols = keys).
struct FusionTrace {
  std::vector<Matrix> logits;
  std::vector<Matrix> attention;
};

// Query row for frame m of phase i is t_i + f_m; keys and values are all
// phase rows concatenated (overlap duplicates included). Output row is
// FFN(a) + a where a is the multi-head attention output.
Prototype fuse(const FrameFeatures& frames, const Segmentation& seg, const TextAnatomy& text,
               const FusionWeights& weights, const FusionOptions& options = {},
               FusionTrace* trace = nullptr);

// Text anatomy of all-zero rows, used to fuse videos whose class is unknown.
TextAnatomy zero_text(std::size_t phases, std::size_t dim);

double gelu(double x) noexcept;

}  // namespace lga
