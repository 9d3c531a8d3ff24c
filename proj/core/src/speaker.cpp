#include "speechrt/speaker.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

constexpr std::size_t kBands = 48;
constexpr std::size_t kFft = 512;
constexpr double kMinSeconds = 0.5;

// FFTW planning is not thread-safe.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

void center(std::span<double> block) {
  double mean = 0.0;
  for (double v : block) mean += v / static_cast<double>(block.size());
  for (double& v : block) v -= mean;
}

}  // namespace

SpeakerEmbedding extract_speaker_embedding(const Waveform& wave) {
  if (wave.sample_rate <= 0 || wave.duration_s() < kMinSeconds)
    throw TooShort("speaker embedding needs at least 0.5 s of audio");
  const auto sr = static_cast<double>(wave.sample_rate);
  const auto window = std::min<std::size_t>(kFft, static_cast<std::size_t>(0.02 * sr));
  const std::size_t hop = window / 2;
  const std::size_t bins = kFft / 2 + 1;

  // Band edges in FFT bins, log-spaced from ~50 Hz to min(10 kHz, Nyquist), at least one bin wide.
  const double lo = std::max(1.0, 50.0 * kFft / sr);
  const double hi = std::min(10000.0, sr / 2.0) * kFft / sr;
  std::vector<std::size_t> edges(kBands + 1);
  for (std::size_t b = 0; b <= kBands; ++b) {
    const auto e = static_cast<std::size_t>(std::lround(lo * std::pow(hi / lo, static_cast<double>(b) / kBands)));
    edges[b] = b == 0 ? e : std::max(e, edges[b - 1] + 1);
  }
  for (auto& e : edges) e = std::min(e, bins - 1);

  std::vector<double> hann(window);
  for (std::size_t n = 0; n < window; ++n)
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(window));

  double* in = fftw_alloc_real(kFft);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(kFft), in, out, FFTW_ESTIMATE);
  }

  std::vector<std::vector<double>> energies;
  for (std::size_t start = 0; start + window <= wave.samples.size(); start += hop) {
    std::fill(in, in + kFft, 0.0);
    for (std::size_t n = 0; n < window; ++n) in[n] = wave.samples[start + n] * hann[n];
    fftw_execute(plan);
    std::vector<double> e(kBands);
    for (std::size_t b = 0; b < kBands; ++b) {
      double p = 0.0;
      for (std::size_t k = edges[b]; k < std::max(edges[b + 1], edges[b] + 1); ++k) p += out[k][0] * out[k][0] + out[k][1] * out[k][1];
      e[b] = std::log(p + 1e-10);
    }
    energies.push_back(std::move(e));
  }
  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  const auto frames = static_cast<double>(energies.size());
  SpeakerEmbedding emb;
  emb.extractor_id = "band-stats-v1";
  emb.vector.assign(kSpeakerEmbeddingDim, 0.0);
  std::span<double> mean(emb.vector.data(), kBands), spread(emb.vector.data() + kBands, kBands),
      delta(emb.vector.data() + 2 * kBands, kBands), relative(emb.vector.data() + 3 * kBands, kBands);
  for (std::size_t t = 0; t < energies.size(); ++t) {
    double frame_mean = 0.0;
    for (double v : energies[t]) frame_mean += v / kBands;
    for (std::size_t b = 0; b < kBands; ++b) {
      mean[b] += energies[t][b] / frames;
      relative[b] += (energies[t][b] - frame_mean) / frames;
      if (t > 0) delta[b] += std::abs(energies[t][b] - energies[t - 1][b]) / std::max(1.0, frames - 1);
    }
  }
  for (std::size_t b = 0; b < kBands; ++b) {
    double sq = 0.0;
    for (const auto& e : energies) sq += (e[b] - mean[b]) * (e[b] - mean[b]) / frames;
    spread[b] = std::log(std::sqrt(sq) + 1e-6);
  }
  for (auto block : {mean, spread, delta, relative}) center(block);
  return emb;
}

double compute_sim(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (a.vector.size() != b.vector.size()) throw DimensionMismatch("speaker embeddings differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) {
    dot += a.vector[i] * b.vector[i];
    na += a.vector[i] * a.vector[i];
    nb += b.vector[i] * b.vector[i];
  }
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine similarity of a zero vector");
  // Product of the two norms commutes exactly, keeping the result symmetric.
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace speechrt
