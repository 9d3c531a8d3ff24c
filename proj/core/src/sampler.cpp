#include "speechrt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace speechrt {

int argmax(std::span<const double> logits) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

int sample_logits(std::span<const double> logits, const SamplerConfig& cfg, std::mt19937_64& rng) {
  if (cfg.greedy()) return argmax(logits);
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t keep = logits.size();
  if (cfg.top_k > 0 && cfg.top_k < keep) {
    keep = cfg.top_k;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
    order.resize(keep);
  }
  double top = -INFINITY;
  for (std::size_t i : order) top = std::max(top, logits[i]);
  std::vector<double> weights(keep);
  for (std::size_t n = 0; n < keep; ++n) weights[n] = std::exp((logits[order[n]] - top) / cfg.temperature);
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return static_cast<int>(order[dist(rng)]);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace speechrt
