#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "lga/anatomy.hpp"
#include "lga/error.hpp"
#include "lga/fusion.hpp"
#include "lga/matrix.hpp"
#include "lga/text_anatomy.hpp"
#include "oracles.hpp"

namespace lga::test {

// Kind of the lga::Error thrown by `fn`, nullopt when nothing is thrown.
inline std::optional<ErrorKind> kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline oracle::Rows to_rows(const Matrix& m) {
  oracle::Rows out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

inline Matrix to_matrix(const oracle::Rows& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// Small positive integers: plenty of exact ties, never a zero mean.
inline Matrix random_int_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int hi = 3) {
  std::uniform_int_distribution<int> dist(1, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

inline FrameFeatures make_video(Matrix frames, std::string id = "v", std::optional<int> cls = std::nullopt) {
  FrameFeatures f;
  f.frames = std::move(frames);
  f.video_id = std::move(id);
  f.class_id = cls;
  return f;
}

inline TextAnatomy make_text(Matrix rows, int cls = 0) {
  TextAnatomy t;
  t.class_id = cls;
  t.phase_embeddings = std::move(rows);
  return t;
}

// Prototype whose phase k holds exactly `phases[k]`.
inline Prototype make_prototype(const std::vector<oracle::Rows>& phases, std::optional<int> cls = std::nullopt) {
  Prototype p;
  oracle::Rows all;
  std::size_t next = 0;
  for (const auto& ph : phases) {
    IndexList idx;
    for (const auto& r : ph) {
      all.push_back(r);
      idx.push_back(next++);
    }
    p.segmentation.clusters.push_back(idx);
  }
  p.segmentation.source_T = next;
  p.fused = to_matrix(all);
  p.class_id = cls;
  return p;
}

inline std::vector<oracle::Rows> random_phases(std::mt19937_64& rng, std::size_t phases, std::size_t dim,
                                               std::size_t max_rows = 4) {
  std::uniform_int_distribution<std::size_t> count(1, max_rows);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::vector<oracle::Rows> out(phases);
  for (auto& ph : out) {
    const std::size_t n = count(rng);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(dim);
      for (double& v : row) v = val(rng);
      ph.push_back(row);
    }
  }
  return out;
}

inline oracle::FusionParams to_params(const FusionWeights& w) {
  oracle::FusionParams p;
  p.heads = w.heads;
  p.w_q = to_rows(w.w_q);
  p.w_k = to_rows(w.w_k);
  p.w_v = to_rows(w.w_v);
  p.w_o = to_rows(w.w_o);
  p.ffn1_w = to_rows(w.ffn1_w);
  p.ffn1_b = w.ffn1_b;
  p.ffn2_w = to_rows(w.ffn2_w);
  p.ffn2_b = w.ffn2_b;
  return p;
}

// Fully random weights (including a non-zero second FFN layer and biases).
inline FusionWeights random_weights(std::mt19937_64& rng, std::size_t dim, std::size_t heads, std::size_t hidden,
                                    double scale = 0.5) {
  FusionWeights w;
  w.dim = dim;
  w.heads = heads;
  w.hidden = hidden;
  w.w_q = random_matrix(rng, dim, dim, -scale, scale);
  w.w_k = random_matrix(rng, dim, dim, -scale, scale);
  w.w_v = random_matrix(rng, dim, dim, -scale, scale);
  w.w_o = random_matrix(rng, dim, dim, -scale, scale);
  w.ffn1_w = random_matrix(rng, dim, hidden, -scale, scale);
  w.ffn2_w = random_matrix(rng, hidden, dim, -scale, scale);
  std::uniform_real_distribution<double> b(-0.1, 0.1);
  w.ffn1_b.resize(hidden);
  w.ffn2_b.resize(dim);
  for (double& v : w.ffn1_b) v = b(rng);
  for (double& v : w.ffn2_b) v = b(rng);
  return w;
}

inline double max_abs_diff(const oracle::Rows& a, const oracle::Rows& b) {
  double worst = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) worst = std::max(worst, std::abs(a[r][c] - b[r][c]));
  }
  return worst;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lga_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lga::test
