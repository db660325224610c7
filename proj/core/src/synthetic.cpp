#include "lga/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "lga/error.hpp"
#include "lga/random.hpp"

namespace lga {

namespace {

// Number of ordered selections of k items from n, saturating at `cap`.
std::size_t arrangements(std::size_t n, std::size_t k, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t factor = n - i;
    if (total > cap / factor) return cap;
    total *= factor;
  }
  return total;
}

std::vector<std::size_t> draw_sequence(SplitMix64& rng, std::size_t dim, std::size_t length) {
  std::vector<std::size_t> axes(dim);
  std::iota(axes.begin(), axes.end(), 0);
  for (std::size_t i = 0; i < length; ++i) {
    const auto j = i + rng.below(dim - i);
    std::swap(axes[i], axes[j]);
  }
  axes.resize(length);
  return axes;
}

std::string video_name(std::size_t cls, std::size_t idx) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "c%03zu_v%03zu", cls, idx);
  return buf;
}

}  // namespace

FeatureStore generate_synthetic(const SyntheticParams& p, SyntheticTruth* truth) {
  if (p.classes == 0 || p.videos_per_class == 0 || p.frames == 0 || p.dim == 0 || p.true_phases == 0) {
    fail(ErrorKind::invalid_argument, "synthetic parameters must all be positive");
  }
  if (p.dim < p.true_phases) {
    fail(ErrorKind::invalid_argument, "dim C=" + std::to_string(p.dim) + " must be >= L_true=" +
                                          std::to_string(p.true_phases));
  }
  if (p.frames < p.true_phases) {
    fail(ErrorKind::invalid_argument, "T=" + std::to_string(p.frames) + " must be >= L_true=" +
                                          std::to_string(p.true_phases));
  }
  if (!(p.noise_sigma >= 0.0) || !(p.phase_separation >= 0.0)) {
    fail(ErrorKind::invalid_argument, "noise_sigma and phase_separation must be non-negative");
  }
  if (arrangements(p.dim, p.true_phases, p.classes) < p.classes) {
    fail(ErrorKind::invalid_argument,
         "only " + std::to_string(arrangements(p.dim, p.true_phases, p.classes)) +
             " distinct phase sequences exist for C=" + std::to_string(p.dim) + ", L_true=" +
             std::to_string(p.true_phases) + "; asked for " + std::to_string(p.classes) + " classes");
  }

  SplitMix64 rng(mix64(p.seed));
  FeatureStore store;
  store.dim = p.dim;

  std::set<std::vector<std::size_t>> used;
  std::vector<std::vector<std::size_t>> sequences;
  while (sequences.size() < p.classes) {
    auto seq = draw_sequence(rng, p.dim, p.true_phases);
    if (used.insert(seq).second) sequences.push_back(std::move(seq));
  }

  const auto to_float = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  const double mean_value = to_float(p.phase_separation);

  for (std::size_t c = 0; c < p.classes; ++c) {
    const int cid = static_cast<int>(c);
    std::string label = "synthetic_" + std::to_string(c) + ":";
    for (auto axis : sequences[c]) label += " e" + std::to_string(axis);
    store.classes.emplace(cid, std::move(label));

    TextAnatomy text;
    text.class_id = cid;
    text.phase_embeddings = Matrix(p.true_phases, p.dim);
    for (std::size_t j = 0; j < p.true_phases; ++j) text.phase_embeddings(j, sequences[c][j]) = mean_value;
    store.text.emplace(cid, std::move(text));

    for (std::size_t v = 0; v < p.videos_per_class; ++v) {
      // Nominal equal split, then jitter each interior boundary while
      // keeping every phase at least one frame long.
      std::vector<std::size_t> starts(p.true_phases);
      for (std::size_t j = 0; j < p.true_phases; ++j) starts[j] = j * p.frames / p.true_phases;
      for (std::size_t j = 1; j < p.true_phases; ++j) {
        const std::size_t lo = starts[j - 1] + 1;
        const std::size_t next = j + 1 < p.true_phases ? starts[j + 1] : p.frames;
        const std::size_t hi = next - 1;
        const std::size_t jitter = p.boundary_jitter;
        const std::size_t from = std::max(lo, starts[j] > jitter ? starts[j] - jitter : 0);
        const std::size_t to = std::min(hi, starts[j] + jitter);
        if (from <= to) starts[j] = from + rng.below(to - from + 1);
      }

      FrameFeatures f;
      f.video_id = video_name(c, v);
      f.class_id = cid;
      f.frames = Matrix(p.frames, p.dim);
      std::size_t phase = 0;
      for (std::size_t t = 0; t < p.frames; ++t) {
        while (phase + 1 < p.true_phases && t >= starts[phase + 1]) ++phase;
        for (std::size_t d = 0; d < p.dim; ++d) {
          const double mean = d == sequences[c][phase] ? p.phase_separation : 0.0;
          f.frames(t, d) = to_float(mean + p.noise_sigma * rng.normal());
        }
      }
      if (truth) (*truth)[f.video_id] = starts;
      store.videos.emplace(f.video_id, std::move(f));
    }
  }
  return store;
}

FeatureStore shuffle_labels(FeatureStore store, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(store.videos.size());
  for (const auto& [id, v] : store.videos) labels.push_back(*v.class_id);
  SplitMix64 rng(mix64(seed ^ 0x53485546464C45ULL));
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[rng.below(i)]);
  }
  std::size_t i = 0;
  for (auto& [id, v] : store.videos) v.class_id = labels[i++];
  return store;
}

}  // namespace lga
