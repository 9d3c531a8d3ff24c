#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "speechrt/tensor.hpp"
#include "speechrt/tokens.hpp"

namespace speechrt {

struct CodecConfig {
  std::size_t levels = 8;
  int vocab = 256;
  std::size_t dim = 16;
  std::size_t frame_hop = 480;
  int sample_rate = 24000;
  double tail_gain = 0.25;  // how much of frame t leaks into frame t+1
  std::uint64_t seed = 5;
  std::size_t kmeans_iters = 20;

  int end_code() const noexcept { return vocab - 1; }
  double frame_rate() const noexcept { return static_cast<double>(sample_rate) / static_cast<double>(frame_hop); }
  void validate() const;
};

struct Codebook {
  std::size_t level = 0;
  Matrix entries;  // V x d_c
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 24000;

  double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
  friend bool operator==(const Waveform&, const Waveform&) = default;
};

// Residual vector quantizer paired with a causal filterbank synthesizer.
//
// Level 0 never selects the end-of-audio index V-1; that entry is reserved for
// the backbone's stop code. Trained codebooks keep a zero codeword at V-1 on
// every level, which makes greedy refinement error non-increasing in depth.
//
// Synthesis writes frame t into samples [t*hop, (t+1)*hop) through a cosine
// basis and leaks a decaying copy of frame t-1 into the same window, so sample s
// depends only on frames <= s / hop. Analysis projects each hop-aligned window
// back onto the basis.
class RvqCodec {
 public:
  RvqCodec(CodecConfig cfg, std::vector<Codebook> codebooks);

  const CodecConfig& config() const noexcept { return cfg_; }
  std::size_t levels() const noexcept { return codebooks_.size(); }
  int vocab() const noexcept { return cfg_.vocab; }
  std::size_t dim() const noexcept { return cfg_.dim; }
  const std::vector<Codebook>& codebooks() const noexcept { return codebooks_; }
  std::vector<Codebook>& codebooks() noexcept { return codebooks_; }
  const Matrix& basis() const noexcept { return basis_; }

  // Levels >= `levels` are zero-filled. Throws DimensionMismatch, LevelOutOfRange.
  std::vector<AcousticFrame> encode(const Matrix& features, std::size_t levels) const;
  // Throws CodeOutOfRange, LevelOutOfRange.
  Matrix decode(std::span<const AcousticFrame> frames, std::size_t levels) const;

  Waveform synthesize(const Matrix& features) const;
  // `previous` is empty for the first frame of a stream.
  void synthesize_frame(std::span<const double> current, std::span<const double> previous, std::span<double> out) const;
  // Throws TooShort when fewer than frame_hop samples are given.
  Matrix analyze(const Waveform& wave) const;

  double reconstruction_mse(const Matrix& features, std::size_t levels) const;

 private:
  int nearest(std::size_t level, std::span<const double> residual) const;

  CodecConfig cfg_;
  std::vector<Codebook> codebooks_;
  Matrix basis_;  // d_c x hop
  Matrix tail_;   // d_c x hop
};

// Per-level k-means on running residuals; seeded, cfg.kmeans_iters Lloyd steps.
RvqCodec train_codec(const Matrix& pool, const CodecConfig& cfg);

// Random codebooks with no reserved zero entries; mostly for tests.
RvqCodec random_codec(const CodecConfig& cfg, double scale = 1.0);

// Streams frames into waveform chunks of `group` frames; flush() emits the tail.
class StreamingCodecDecoder {
 public:
  StreamingCodecDecoder(const RvqCodec& codec, std::size_t group = 4);

  std::optional<Waveform> push(const AcousticFrame& frame);
  std::optional<Waveform> flush();

 private:
  Waveform emit();

  const RvqCodec& codec_;
  std::size_t group_;
  std::vector<AcousticFrame> pending_;
  std::vector<double> previous_;
};

std::vector<Waveform> codec_decode_batched(std::span<const AcousticFrame> frames, const RvqCodec& codec,
                                           std::size_t group = 4);

}  // namespace speechrt
