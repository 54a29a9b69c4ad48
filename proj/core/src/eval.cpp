#include "budgetface/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "budgetface/error.hpp"
#include "budgetface/rng.hpp"

namespace budgetface {
namespace {

void check_scores(const ScoreSet& s) {
  require(!s.genuine.empty() && !s.impostor.empty(), ErrorCode::kEmptyScores,
          "genuine and impostor score lists must be non-empty");
  for (double x : s.genuine) require(std::isfinite(x), ErrorCode::kNonFiniteInput, "non-finite genuine score");
  for (double x : s.impostor) require(std::isfinite(x), ErrorCode::kNonFiniteInput, "non-finite impostor score");
}

// Number of elements >= tau in a descending-sorted list.
std::size_t count_at_least(const std::vector<double>& desc, double tau) {
  return static_cast<std::size_t>(
      std::partition_point(desc.begin(), desc.end(), [tau](double x) { return x >= tau; }) - desc.begin());
}

}  // namespace

ScoreSet verification_pairs(const Matrix& emb, std::span<const std::string> labels, const Pairing& pairing) {
  require(labels.size() == emb.rows(), ErrorCode::kDimensionMismatch, "label count differs from embeddings");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  require(groups.size() >= 2, ErrorCode::kInsufficientData, "verification needs at least two identities");

  ScoreSet out;
  const std::size_t n = emb.rows();
  if (pairing.mode == Pairing::Mode::kAll) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double s = cosine(emb.row(i), emb.row(j));
        (labels[i] == labels[j] ? out.genuine : out.impostor).push_back(s);
      }
    return out;
  }

  SeededRng rng(pairing.seed);
  std::vector<std::pair<std::size_t, std::size_t>> genuine;
  for (const auto& [id, members] : groups)
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) genuine.emplace_back(members[a], members[b]);
  // Partial Fisher-Yates: first k entries are a uniform sample without replacement.
  const std::size_t k = std::min(pairing.pairs, genuine.size());
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t pick = t + static_cast<std::size_t>(rng.uniform_int(genuine.size() - t));
    std::swap(genuine[t], genuine[pick]);
    out.genuine.push_back(cosine(emb.row(genuine[t].first), emb.row(genuine[t].second)));
  }
  while (out.impostor.size() < pairing.pairs) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(n));
    const auto j = static_cast<std::size_t>(rng.uniform_int(n));
    if (labels[i] == labels[j]) continue;
    out.impostor.push_back(cosine(emb.row(std::min(i, j)), emb.row(std::max(i, j))));
  }
  return out;
}

ScoreSet verification_pairs(std::span<const Embedding> embeddings, std::span<const std::string> labels,
                            const Pairing& pairing) {
  require(!embeddings.empty(), ErrorCode::kInsufficientData, "no embeddings");
  return verification_pairs(stack(embeddings), labels, pairing);
}

TprAtFpr tpr_at_fpr(const ScoreSet& scores, double fpr_target) {
  check_scores(scores);
  require(fpr_target >= 0.0 && fpr_target <= 1.0, ErrorCode::kOutOfRange, "fpr_target must lie in [0, 1]");
  std::vector<double> imp = scores.impostor;
  std::vector<double> gen = scores.genuine;
  std::sort(imp.begin(), imp.end(), std::greater<>());
  std::sort(gen.begin(), gen.end(), std::greater<>());
  const auto m = static_cast<double>(imp.size());

  // Walk distinct impostor values from high to low; the accept count is
  // nondecreasing, so the last admissible candidate is the smallest tau.
  double tau = std::nextafter(imp.front(), std::numeric_limits<double>::infinity());
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < imp.size();) {
    std::size_t j = i;
    while (j < imp.size() && imp[j] == imp[i]) ++j;
    if (static_cast<double>(j) / m > fpr_target) break;
    tau = imp[i];
    accepted = j;
    i = j;
  }
  const std::size_t hits = count_at_least(gen, tau);
  return {static_cast<double>(hits) / static_cast<double>(gen.size()), tau, static_cast<double>(accepted) / m};
}

std::vector<RocPoint> roc_curve(const ScoreSet& scores) {
  check_scores(scores);
  std::vector<double> imp = scores.impostor;
  std::vector<double> gen = scores.genuine;
  std::sort(imp.begin(), imp.end(), std::greater<>());
  std::sort(gen.begin(), gen.end(), std::greater<>());
  std::vector<double> all = imp;
  all.insert(all.end(), gen.begin(), gen.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const auto g = static_cast<double>(gen.size());
  const auto m = static_cast<double>(imp.size());
  std::vector<RocPoint> curve;
  curve.reserve(all.size() + 1);
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t gi = 0;
  std::size_t ii = 0;
  for (double tau : all) {
    while (gi < gen.size() && gen[gi] >= tau) ++gi;
    while (ii < imp.size() && imp[ii] >= tau) ++ii;
    curve.push_back({tau, static_cast<double>(gi) / g, static_cast<double>(ii) / m});
  }
  return curve;
}

std::size_t min_impostors_for(double fpr_target) {
  require(fpr_target > 0.0 && fpr_target <= 1.0, ErrorCode::kOutOfRange, "fpr_target must lie in (0, 1]");
  return static_cast<std::size_t>(std::ceil(1.0 / fpr_target - 1e-9));
}

}  // namespace budgetface
