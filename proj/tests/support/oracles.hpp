#pragma once

// Reference implementations used only by tests. They are deliberately
// written as naive straight-line code over nested std::vector and share no
// code with the library.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lga::oracle {

using Rows = std::vector<std::vector<double>>;
using Clusters = std::vector<std::vector<std::size_t>>;

// Greedy adjacent merging by cosine similarity of cluster means, full
// recomputation every round, ties to the first pair. Throws
// std::domain_error when a mean has zero norm.
inline Clusters greedy_segment(const Rows& frames, std::size_t target) {
  Clusters clusters;
  for (std::size_t i = 0; i < frames.size(); ++i) clusters.push_back({i});
  const std::size_t dim = frames.empty() ? 0 : frames[0].size();
  while (clusters.size() > target) {
    std::vector<std::vector<double>> means;
    for (const auto& c : clusters) {
      std::vector<double> m(dim, 0.0);
      for (std::size_t idx : c) {
        for (std::size_t d = 0; d < dim; ++d) m[d] += frames[idx][d];
      }
      for (std::size_t d = 0; d < dim; ++d) m[d] /= static_cast<double>(c.size());
      means.push_back(m);
    }
    std::vector<double> sims;
    for (std::size_t j = 0; j + 1 < clusters.size(); ++j) {
      double ab = 0.0, aa = 0.0, bb = 0.0;
      for (std::size_t d = 0; d < dim; ++d) aa += means[j][d] * means[j][d];
      for (std::size_t d = 0; d < dim; ++d) bb += means[j + 1][d] * means[j + 1][d];
      for (std::size_t d = 0; d < dim; ++d) ab += means[j][d] * means[j + 1][d];
      const double na = std::sqrt(aa);
      const double nb = std::sqrt(bb);
      if (na == 0.0 || nb == 0.0) throw std::domain_error("zero-norm cluster mean");
      sims.push_back(ab / (na * nb));
    }
    std::size_t best = 0;
    for (std::size_t j = 0; j < sims.size(); ++j) {
      if (sims[j] > sims[best]) best = j;
    }
    for (std::size_t idx : clusters[best + 1]) clusters[best].push_back(idx);
    clusters.erase(clusters.begin() + static_cast<long>(best) + 1);
  }
  return clusters;
}

inline double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Phase-aligned bidirectional mean Hausdorff sum, two separate double loops.
inline double ab_mhm(const std::vector<Rows>& query, const std::vector<Rows>& support, std::size_t T) {
  double total = 0.0;
  for (std::size_t k = 0; k < query.size(); ++k) {
    for (const auto& a : query[k]) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& b : support[k]) best = std::min(best, l2(a, b));
      total += best;
    }
    for (const auto& b : support[k]) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : query[k]) best = std::min(best, l2(b, a));
      total += best;
    }
  }
  return total / static_cast<double>(T);
}

struct FusionParams {
  std::size_t heads = 1;
  Rows w_q, w_k, w_v, w_o;  // C x C
  Rows ffn1_w;              // C x H
  std::vector<double> ffn1_b;
  Rows ffn2_w;              // H x C
  std::vector<double> ffn2_b;
};

// Straight-line cross-attention fusion. `kv_order` permutes the key/value
// rows (identity when empty); output rows follow the query order.
inline Rows fuse(const Rows& frames, const Clusters& clusters, const Rows& text, const FusionParams& p,
                 const std::vector<std::size_t>& kv_order = {}) {
  const std::size_t C = frames[0].size();
  const std::size_t H = p.ffn1_b.size();
  const std::size_t dk = C / p.heads;

  Rows visual;
  Rows query_in;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (std::size_t m : clusters[i]) {
      visual.push_back(frames[m]);
      std::vector<double> q(C);
      for (std::size_t c = 0; c < C; ++c) q[c] = text[i][c] + frames[m][c];
      query_in.push_back(q);
    }
  }
  const std::size_t n = visual.size();
  Rows kv = visual;
  if (!kv_order.empty()) {
    for (std::size_t j = 0; j < n; ++j) kv[j] = visual[kv_order[j]];
  }

  Rows out(n, std::vector<double>(C, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> concat(C, 0.0);
    for (std::size_t h = 0; h < p.heads; ++h) {
      std::vector<double> qh(dk, 0.0);
      for (std::size_t d = 0; d < dk; ++d) {
        for (std::size_t c = 0; c < C; ++c) qh[d] += query_in[r][c] * p.w_q[c][h * dk + d];
      }
      std::vector<double> logits(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t d = 0; d < dk; ++d) {
          double kd = 0.0;
          for (std::size_t c = 0; c < C; ++c) kd += kv[j][c] * p.w_k[c][h * dk + d];
          logits[j] += qh[d] * kd;
        }
        logits[j] /= std::sqrt(static_cast<double>(dk));
      }
      double mx = logits[0];
      for (double l : logits) mx = std::max(mx, l);
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
      }
      for (std::size_t j = 0; j < n; ++j) {
        const double w = logits[j] / z;
        for (std::size_t d = 0; d < dk; ++d) {
          double vd = 0.0;
          for (std::size_t c = 0; c < C; ++c) vd += kv[j][c] * p.w_v[c][h * dk + d];
          concat[h * dk + d] += w * vd;
        }
      }
    }
    std::vector<double> a(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t e = 0; e < C; ++e) a[c] += concat[e] * p.w_o[e][c];
    }
    std::vector<double> hidden(H, 0.0);
    for (std::size_t u = 0; u < H; ++u) {
      double s = p.ffn1_b[u];
      for (std::size_t c = 0; c < C; ++c) s += a[c] * p.ffn1_w[c][u];
      hidden[u] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
    }
    for (std::size_t c = 0; c < C; ++c) {
      double s = p.ffn2_b[c];
      for (std::size_t u = 0; u < H; ++u) s += hidden[u] * p.ffn2_w[u][c];
      out[r][c] = s + a[c];
    }
  }
  return out;
}

}  // namespace lga::oracle
