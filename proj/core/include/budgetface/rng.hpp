#pragma once

#include <cstdint>
#include <string_view>

namespace budgetface {

// Counter-based SplitMix64 generator.
//
// Draw k of a stream with key K is mix64(K + (k + 1) * 0x9E3779B97F4A7C15),
// where mix64 is the SplitMix64 finalizer. The integer sequence depends only
// on the key and the counter, so it is identical on every platform. split()
// derives a child key from the parent key and a stream id; children do not
// advance the parent.
//
// Real-valued draws use 53-bit mantissas; normal() uses Box-Muller on two
// uniforms and therefore inherits libm's log/cos/sqrt rounding.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;  // [0, 1)
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;
  bool bernoulli(double p) noexcept;
  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) noexcept;

  SeededRng split(std::uint64_t stream_id) const noexcept;
  SeededRng split(std::string_view name) const noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace budgetface
