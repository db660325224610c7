#include "lga/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binary.hpp"
#include "lga/error.hpp"
#include "lga/random.hpp"

namespace lga {

namespace {

constexpr std::string_view kWeightsMagic = "LGAW";
constexpr std::uint16_t kWeightsVersion = 1;

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

void require_finite(const Matrix& m, const char* stage) {
  if (!m.all_finite()) fail(ErrorKind::numeric, std::string("non-finite values after ") + stage);
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    fail(ErrorKind::invalid_argument, std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                                          std::to_string(m.cols()) + ", expected " +
                                          std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void check_heads(std::size_t dim, std::size_t heads) {
  if (dim == 0 || heads == 0) fail(ErrorKind::invalid_argument, "dim and heads must be positive");
  if (dim % heads != 0) {
    fail(ErrorKind::invalid_argument, "dim " + std::to_string(dim) + " is not divisible by heads " +
                                          std::to_string(heads));
  }
}

void layer_norm_rows(Matrix& m) {
  constexpr double kEps = 1e-5;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (double& v : row) v = (v - mean) * inv;
  }
}

}  // namespace

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

void FusionWeights::validate() const {
  check_heads(dim, heads);
  if (hidden == 0) fail(ErrorKind::invalid_argument, "FFN hidden width must be positive");
  require_shape(w_q, dim, dim, "W_Q");
  require_shape(w_k, dim, dim, "W_K");
  require_shape(w_v, dim, dim, "W_V");
  require_shape(w_o, dim, dim, "W_O");
  require_shape(ffn1_w, dim, hidden, "FFN1 weight");
  require_shape(ffn2_w, hidden, dim, "FFN2 weight");
  if (ffn1_b.size() != hidden) fail(ErrorKind::invalid_argument, "FFN1 bias has wrong length");
  if (ffn2_b.size() != dim) fail(ErrorKind::invalid_argument, "FFN2 bias has wrong length");
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!w_q.all_finite() || !w_k.all_finite() || !w_v.all_finite() || !w_o.all_finite() ||
      !ffn1_w.all_finite() || !ffn2_w.all_finite() ||
      !std::all_of(ffn1_b.begin(), ffn1_b.end(), finite) ||
      !std::all_of(ffn2_b.begin(), ffn2_b.end(), finite)) {
    fail(ErrorKind::invalid_data, "fusion weights contain non-finite values");
  }
}

FusionWeights init_weights(std::size_t dim, std::size_t heads, std::size_t hidden,
                           std::uint64_t seed) {
  check_heads(dim, heads);
  if (hidden == 0) fail(ErrorKind::invalid_argument, "FFN hidden width must be positive");
  SplitMix64 rng(mix64(seed));
  // Uniform on [-a, a) has variance a^2/3; a = sqrt(3/dim) gives 1/dim.
  const double amplitude = std::sqrt(3.0 / static_cast<double>(dim));
  auto fill = [&](Matrix& m) {
    for (auto& v : m.data()) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * amplitude);
  };
  FusionWeights w;
  w.dim = dim;
  w.heads = heads;
  w.hidden = hidden;
  for (Matrix* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) {
    *m = Matrix(dim, dim);
    fill(*m);
  }
  w.ffn1_w = Matrix(dim, hidden);
  fill(w.ffn1_w);
  w.ffn1_b.assign(hidden, 0.0);
  w.ffn2_w = Matrix(hidden, dim);
  w.ffn2_b.assign(dim, 0.0);
  return w;
}

FusionWeights passthrough_weights(std::size_t dim, std::size_t heads, std::size_t hidden,
                                  double sharpness) {
  check_heads(dim, heads);
  if (hidden == 0) fail(ErrorKind::invalid_argument, "FFN hidden width must be positive");
  FusionWeights w;
  w.dim = dim;
  w.heads = heads;
  w.hidden = hidden;
  for (Matrix* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) *m = Matrix(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    w.w_q(i, i) = static_cast<float>(sharpness);
    w.w_k(i, i) = 1.0;
    w.w_v(i, i) = 1.0;
    w.w_o(i, i) = 1.0;
  }
  w.ffn1_w = Matrix(dim, hidden);
  w.ffn1_b.assign(hidden, 0.0);
  w.ffn2_w = Matrix(hidden, dim);
  w.ffn2_b.assign(dim, 0.0);
  return w;
}

void write_weights(const std::filesystem::path& path, const FusionWeights& weights) {
  weights.validate();
  if (weights.dim > UINT32_MAX || weights.hidden > UINT32_MAX) {
    fail(ErrorKind::invalid_argument, "weights too large for the file format");
  }
  detail::ByteWriter w;
  w.magic(kWeightsMagic);
  w.u16(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(weights.dim));
  w.u32(static_cast<std::uint32_t>(weights.heads));
  w.u32(static_cast<std::uint32_t>(weights.hidden));
  auto put = [&](std::span<const double> values) {
    for (double v : values) w.f32(static_cast<float>(v));
  };
  put(weights.w_q.data());
  put(weights.w_k.data());
  put(weights.w_v.data());
  put(weights.w_o.data());
  put(weights.ffn1_w.data());
  put(weights.ffn1_b);
  put(weights.ffn2_w.data());
  put(weights.ffn2_b);
  w.save(path);
}

FusionWeights read_weights(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic(kWeightsMagic);
  const auto version_at = r.offset();
  const auto version = r.u16();
  if (version != kWeightsVersion) {
    r.fail_at(ErrorKind::corrupt_file, "unsupported weights version " + std::to_string(version),
              version_at);
  }
  FusionWeights w;
  w.dim = r.u32();
  w.heads = r.u32();
  w.hidden = r.u32();
  if (w.dim == 0 || w.heads == 0 || w.hidden == 0 || w.dim % w.heads != 0) {
    r.fail_at(ErrorKind::corrupt_file, "inconsistent header (dim/heads/hidden)", version_at + 2);
  }
  const std::uint64_t floats = 4ull * w.dim * w.dim + 2ull * w.dim * w.hidden + w.hidden + w.dim;
  if (r.remaining() < floats * 4) {
    r.fail_at(ErrorKind::truncated_file,
              "parameters need " + std::to_string(floats * 4) + " bytes, " +
                  std::to_string(r.remaining()) + " present",
              r.offset() + r.remaining());
  }
  if (r.remaining() > floats * 4) {
    r.fail_at(ErrorKind::corrupt_file, "trailing bytes after parameters", r.offset() + floats * 4);
  }
  auto take = [&](std::span<double> dst) {
    for (auto& v : dst) v = r.f32();
  };
  for (Matrix* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) {
    *m = Matrix(w.dim, w.dim);
    take(m->data());
  }
  w.ffn1_w = Matrix(w.dim, w.hidden);
  take(w.ffn1_w.data());
  w.ffn1_b.assign(w.hidden, 0.0);
  take(w.ffn1_b);
  w.ffn2_w = Matrix(w.hidden, w.dim);
  take(w.ffn2_w.data());
  w.ffn2_b.assign(w.dim, 0.0);
  take(w.ffn2_b);
  try {
    w.validate();
  } catch (const Error& e) {
    throw Error(e.kind(), e.what(), r.path());
  }
  return w;
}

std::size_t Prototype::phase_offset(std::size_t phase) const noexcept {
  std::size_t off = 0;
  for (std::size_t i = 0; i < phase && i < segmentation.clusters.size(); ++i) {
    off += segmentation.clusters[i].size();
  }
  return off;
}

TextAnatomy zero_text(std::size_t phases, std::size_t dim) {
  TextAnatomy t;
  t.phase_embeddings = Matrix(phases, dim);
  return t;
}

Prototype fuse(const FrameFeatures& frames, const Segmentation& seg, const TextAnatomy& text,
               const FusionWeights& weights, const FusionOptions& options, FusionTrace* trace) {
  const std::size_t dim = frames.dim();
  if (seg.phase_count() != text.phase_count()) {
    fail(ErrorKind::invalid_argument, "phase axis: segmentation has " +
                                          std::to_string(seg.phase_count()) + " phases, text has " +
                                          std::to_string(text.phase_count()));
  }
  if (text.dim() != dim) {
    fail(ErrorKind::invalid_argument, "feature axis: frames have dim " + std::to_string(dim) +
                                          ", text has dim " + std::to_string(text.dim()));
  }
  if (weights.dim != dim) {
    fail(ErrorKind::invalid_argument, "feature axis: frames have dim " + std::to_string(dim) +
                                          ", weights have dim " + std::to_string(weights.dim));
  }
  weights.validate();
  if (!text.phase_embeddings.all_finite()) fail(ErrorKind::invalid_data, "text embeddings are not finite");

  const std::size_t rows = seg.total_rows();
  if (rows == 0) fail(ErrorKind::invalid_argument, "segmentation has no rows");
  Matrix keys_in(rows, dim);
  Matrix queries_in(rows, dim);
  std::size_t r = 0;
  for (std::size_t phase = 0; phase < seg.phase_count(); ++phase) {
    const auto t = text.phase_embeddings.row(phase);
    for (auto idx : seg.clusters[phase]) {
      if (idx >= frames.length()) {
        fail(ErrorKind::invalid_argument, "segmentation index " + std::to_string(idx) +
                                              " out of range for T=" + std::to_string(frames.length()));
      }
      const auto f = frames.frames.row(idx);
      for (std::size_t c = 0; c < dim; ++c) {
        keys_in(r, c) = f[c];
        queries_in(r, c) = f[c] + t[c];
      }
      ++r;
    }
  }
  require_finite(keys_in, "gathering frames");

  const Matrix q = matmul(queries_in, weights.w_q);
  const Matrix k = matmul(keys_in, weights.w_k);
  const Matrix v = matmul(keys_in, weights.w_v);
  require_finite(q, "query projection");
  require_finite(k, "key projection");
  require_finite(v, "value projection");

  const std::size_t dk = weights.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix heads_out(rows, dim);
  if (trace) {
    trace->logits.assign(weights.heads, Matrix(rows, rows));
    trace->attention.assign(weights.heads, Matrix(rows, rows));
  }
  std::vector<double> logits(rows);
  for (std::size_t h = 0; h < weights.heads; ++h) {
    const std::size_t c0 = h * dk;
    for (std::size_t i = 0; i < rows; ++i) {
      const auto qi = q.row(i).subspan(c0, dk);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < rows; ++j) {
        logits[j] = dot(qi, k.row(j).subspan(c0, dk)) * scale;
        top = std::max(top, logits[j]);
      }
      if (!std::isfinite(top)) fail(ErrorKind::numeric, "non-finite attention logits");
      double z = 0.0;
      for (std::size_t j = 0; j < rows; ++j) {
        if (trace) trace->logits[h](i, j) = logits[j];
        logits[j] = std::exp(logits[j] - top);
        z += logits[j];
      }
      auto out = heads_out.row(i).subspan(c0, dk);
      for (std::size_t j = 0; j < rows; ++j) {
        const double p = logits[j] / z;
        if (trace) trace->attention[h](i, j) = p;
        const auto vj = v.row(j).subspan(c0, dk);
        for (std::size_t c = 0; c < dk; ++c) out[c] += p * vj[c];
      }
    }
  }

  Matrix attended = matmul(heads_out, weights.w_o);
  if (options.attention_residual) {
    for (std::size_t i = 0; i < attended.data().size(); ++i) attended.data()[i] += queries_in.data()[i];
  }
  if (options.layer_norm) layer_norm_rows(attended);
  require_finite(attended, "attention");

  Matrix hidden = matmul(attended, weights.ffn1_w);
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = hidden.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = gelu(row[j] + weights.ffn1_b[j]);
  }
  Matrix fused = matmul(hidden, weights.ffn2_w);
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = fused.row(i);
    const auto a = attended.row(i);
    for (std::size_t j = 0; j < dim; ++j) row[j] += weights.ffn2_b[j] + a[j];
  }
  require_finite(fused, "feed-forward");

  return Prototype{std::move(fused), seg, frames.class_id};
}

}  // namespace lga
