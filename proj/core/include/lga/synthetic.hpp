#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lga/store.hpp"

namespace lga {

struct SyntheticParams {
  std::size_t classes = 10;
  std::size_t videos_per_class = 10;
  std::size_t frames = 8;       // T
  std::size_t dim = 8;          // C
  std::size_t true_phases = 3;  // L_true
  double noise_sigma = 0.1;
  double phase_separation = 4.0;
  // Each interior phase boundary moves by up to this many frames.
  std::size_t boundary_jitter = 1;
  std::uint64_t seed = 0;
};

// Ground-truth phase boundaries: start frame of every phase, per video.
using SyntheticTruth = std::map<std::string, std::vector<std::size_t>>;

// Each class is an ordered choice of `true_phases` distinct coordinate axes;
// phase j of that class has mean phase_separation * e_axis[j], so phase
// means within a class are orthogonal. Classes are distinct sequences but
// may reuse the same axes in a different order, which makes temporal order
// part of the class identity. Frames are the phase mean plus isotropic
// Gaussian noise; text anatomy rows are the exact phase means. Values are
// rounded to float so the store survives save/load unchanged.
FeatureStore generate_synthetic(const SyntheticParams& params, SyntheticTruth* truth = nullptr);

// Randomly permutes class labels across videos (counts per class preserved),
// destroying any link between features and labels.
FeatureStore shuffle_labels(FeatureStore store, std::uint64_t seed);

}  // namespace lga
