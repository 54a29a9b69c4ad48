#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "budgetface/numeric.hpp"

namespace budgetface {

struct ScoreSet {
  std::vector<double> genuine;   // same-identity pair scores
  std::vector<double> impostor;  // cross-identity pair scores
};

struct Pairing {
  enum class Mode { kAll, kSampled };
  Mode mode = Mode::kAll;
  std::size_t pairs = 0;  // per list, sampled mode only
  std::uint64_t seed = 0;

  static Pairing all() { return {}; }
  static Pairing sampled(std::size_t k, std::uint64_t seed) { return {Mode::kSampled, k, seed}; }
};

// Cosine scores of same-label and cross-label pairs (i < j). In sampled mode
// up to `pairs` genuine pairs are drawn without replacement and `pairs`
// impostor pairs with replacement. Throws kInsufficientData with fewer than
// two identities.
ScoreSet verification_pairs(const Matrix& unit_embeddings, std::span<const std::string> labels,
                            const Pairing& pairing);
ScoreSet verification_pairs(std::span<const Embedding> embeddings, std::span<const std::string> labels,
                            const Pairing& pairing);

struct TprAtFpr {
  double tpr = 0.0;
  double threshold = 0.0;
  double achieved_fpr = 0.0;
};

// Step-function rule: the threshold is the smallest candidate tau, drawn from
// the impostor scores plus nextafter(max impostor, +inf), whose impostor
// accept rate |{i >= tau}| / M is <= fpr_target; TPR = |{g >= tau}| / G.
TprAtFpr tpr_at_fpr(const ScoreSet& scores, double fpr_target);

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

// One point per distinct score, thresholds descending, plus a leading
// (+inf, 0, 0) point; the last point is always (1, 1).
std::vector<RocPoint> roc_curve(const ScoreSet& scores);

// Impostor pairs needed before an FPR target is resolvable (ceil(1/fpr)).
std::size_t min_impostors_for(double fpr_target);

}  // namespace budgetface
