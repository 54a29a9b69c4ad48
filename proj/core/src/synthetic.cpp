#include "budgetface/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "budgetface/error.hpp"
#include "budgetface/rng.hpp"

namespace budgetface {
namespace {

std::string identity_name(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "id%05zu", k);
  return buf;
}

Matrix draw_prototypes(std::size_t count, std::size_t dim, SeededRng& rng) {
  Matrix p(count, dim);
  for (std::size_t c = 0; c < count; ++c) {
    for (;;) {
      for (double& x : p.row(c)) x = rng.normal();
      if (l2_norm(p.row(c)) >= kMinNorm) break;
    }
    const Embedding e = normalize(p.row(c));
    std::copy(e.values().begin(), e.values().end(), p.row(c).begin());
  }
  return p;
}

// normalize(base + sigma * noise), retried on the measure-zero zero vector.
void noisy_sample(std::span<const double> base, double sigma, SeededRng& rng, std::span<double> out) {
  std::vector<double> v(base.size());
  for (;;) {
    for (std::size_t k = 0; k < base.size(); ++k) v[k] = base[k] + sigma * rng.normal();
    if (l2_norm(v) >= kMinNorm) break;
  }
  const Embedding e = normalize(v);
  std::copy(e.values().begin(), e.values().end(), out.begin());
}

Corruption draw_corruption(double fraction, SeededRng& rng) {
  if (!rng.bernoulli(fraction)) return Corruption::kClean;
  return rng.bernoulli(0.5) ? Corruption::kNoise : Corruption::kBlend;
}

void corrupted_sample(const Matrix& prototypes, std::size_t own, Corruption kind, double sigma, SeededRng& rng,
                      std::span<double> out) {
  const auto proto = prototypes.row(own);
  switch (kind) {
    case Corruption::kClean:
      noisy_sample(proto, sigma, rng, out);
      return;
    case Corruption::kNoise:
      noisy_sample(proto, sigma * kCorruptNoiseFactor, rng, out);
      return;
    case Corruption::kBlend: {
      std::size_t other = own;
      while (other == own) other = static_cast<std::size_t>(rng.uniform_int(prototypes.rows()));
      std::vector<double> mixed(proto.size());
      for (std::size_t k = 0; k < mixed.size(); ++k) mixed[k] = 0.5 * proto[k] + 0.5 * prototypes(other, k);
      noisy_sample(mixed, sigma, rng, out);
      return;
    }
  }
}

Dataset make_split(const Matrix& prototypes, std::size_t name_offset, const SyntheticSpec& spec, double corrupt,
                   SeededRng& rng) {
  Dataset d;
  const std::size_t n = prototypes.rows() * spec.samples_per_id;
  d.inputs = Matrix(n, spec.input_dim);
  for (std::size_t c = 0; c < prototypes.rows(); ++c) d.class_names.push_back(identity_name(name_offset + c));
  std::size_t row = 0;
  for (std::size_t c = 0; c < prototypes.rows(); ++c)
    for (std::size_t s = 0; s < spec.samples_per_id; ++s, ++row) {
      const Corruption kind = prototypes.rows() > 1 ? draw_corruption(corrupt, rng) : Corruption::kClean;
      corrupted_sample(prototypes, c, kind, spec.noise_sigma, rng, d.inputs.row(row));
      d.labels.push_back(c);
      d.corruption.push_back(kind);
    }
  return d;
}

}  // namespace

void SyntheticSpec::validate() const {
  require(num_identities >= 2, ErrorCode::kInvalidSpec, "need at least two training identities");
  require(test_identities >= 2, ErrorCode::kInvalidSpec, "need at least two test identities");
  require(samples_per_id >= 1 && input_dim >= 1 && embed_dim >= 1 && hidden_dim >= 1, ErrorCode::kInvalidSpec,
          "sizes must be positive");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorCode::kInvalidSpec, "noise_sigma must be >= 0");
  require(corrupt_fraction >= 0.0 && corrupt_fraction <= 1.0, ErrorCode::kInvalidSpec,
          "corrupt_fraction must lie in [0, 1]");
  require(train_corrupt_fraction >= 0.0 && train_corrupt_fraction <= 1.0, ErrorCode::kInvalidSpec,
          "train_corrupt_fraction must lie in [0, 1]");
  require(sets_per_id >= 1 && max_frames >= 1, ErrorCode::kInvalidSpec, "sets_per_id and max_frames must be >= 1");
}

std::vector<std::string> Dataset::sample_names() const {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(class_names[l]);
  return out;
}

IdentityData gen_identities(const SyntheticSpec& spec) {
  spec.validate();
  SeededRng root(spec.seed);
  SeededRng proto_rng = root.split("prototypes");
  SeededRng train_rng = root.split("train_samples");
  SeededRng test_rng = root.split("test_samples");

  IdentityData data;
  data.train_prototypes = draw_prototypes(spec.num_identities, spec.input_dim, proto_rng);
  data.test_prototypes = draw_prototypes(spec.test_identities, spec.input_dim, proto_rng);
  data.train = make_split(data.train_prototypes, 0, spec, spec.train_corrupt_fraction, train_rng);
  data.test = make_split(data.test_prototypes, spec.num_identities, spec, 0.0, test_rng);
  return data;
}

std::vector<VideoSet> gen_framesets(const SyntheticSpec& spec) {
  spec.validate();
  SeededRng root(spec.seed);
  SeededRng proto_rng = root.split("prototypes");
  SeededRng video_rng = root.split("video");
  // Same draw order as gen_identities, so the test prototypes coincide.
  draw_prototypes(spec.num_identities, spec.input_dim, proto_rng);
  const Matrix prototypes = draw_prototypes(spec.test_identities, spec.input_dim, proto_rng);

  std::vector<VideoSet> sets;
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    for (std::size_t s = 0; s < spec.sets_per_id; ++s) {
      VideoSet v;
      v.identity = identity_name(spec.num_identities + c);
      v.set_id = v.identity + "_v" + std::to_string(s);
      const auto n = static_cast<std::size_t>(1 + video_rng.uniform_int(spec.max_frames));
      v.inputs = Matrix(n, spec.input_dim);
      for (std::size_t f = 0; f < n; ++f) {
        const Corruption kind = draw_corruption(spec.corrupt_fraction, video_rng);
        corrupted_sample(prototypes, c, kind, spec.noise_sigma, video_rng, v.inputs.row(f));
        v.corruption.push_back(kind);
      }
      sets.push_back(std::move(v));
    }
  }
  return sets;
}

}  // namespace budgetface
