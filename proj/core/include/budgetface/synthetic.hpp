#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "budgetface/numeric.hpp"

namespace budgetface {

struct SyntheticSpec {
  std::size_t num_identities = 200;  // training identities
  std::size_t test_identities = 50;  // disjoint held-out identities
  std::size_t samples_per_id = 20;
  std::size_t input_dim = 64;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 64;
  double noise_sigma = 0.1;        // per-coordinate Gaussian noise
  double corrupt_fraction = 0.3;   // video frames only
  double train_corrupt_fraction = 0.0;  // training samples, off by default
  std::size_t sets_per_id = 4;     // video sets per test identity
  std::size_t max_frames = 16;
  std::uint64_t seed = 20191027;

  void validate() const;
};

enum class Corruption : std::uint8_t { kClean, kNoise, kBlend };

struct Dataset {
  Matrix inputs;                        // unit-norm rows
  std::vector<std::size_t> labels;      // indices into class_names
  std::vector<std::string> class_names;
  std::vector<Corruption> corruption;

  std::size_t size() const noexcept { return labels.size(); }
  std::vector<std::string> sample_names() const;
};

struct IdentityData {
  Dataset train;
  Dataset test;
  Matrix train_prototypes;
  Matrix test_prototypes;
};

// Prototypes uniform on the unit sphere; samples normalize(prototype + noise).
// Train and test identities are disjoint. Deterministic under spec.seed.
IdentityData gen_identities(const SyntheticSpec& spec);

struct VideoSet {
  std::string set_id;
  std::string identity;
  Matrix inputs;  // one unit-norm row per frame
  std::vector<Corruption> corruption;
};

// Video sets for the test identities, 1..max_frames frames each. A corrupted
// frame has its noise scaled by 5, or is blended 50/50 with another
// identity's prototype (then noised as usual).
std::vector<VideoSet> gen_framesets(const SyntheticSpec& spec);

inline constexpr double kCorruptNoiseFactor = 5.0;

}  // namespace budgetface
