#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace speechrt {

// temperature == 0 selects greedy argmax (lowest index wins ties).
struct SamplerConfig {
  double temperature = 0.0;
  std::size_t top_k = 0;
  std::uint64_t seed = 0;

  bool greedy() const noexcept { return temperature <= 0.0; }
};

int argmax(std::span<const double> logits) noexcept;
int sample_logits(std::span<const double> logits, const SamplerConfig& cfg, std::mt19937_64& rng);

// splitmix64 finalizer; used to derive per-call seeds from content.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace speechrt
