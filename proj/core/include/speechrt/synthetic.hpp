#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "speechrt/backbone.hpp"
#include "speechrt/codec.hpp"
#include "speechrt/reasoner.hpp"

namespace speechrt {

// Per-speaker spectral envelope and offset over codec feature dimensions.
struct SpeakerTimbre {
  std::vector<double> envelope;
  std::vector<double> offset;

  static SpeakerTimbre from_seed(std::uint64_t speaker_seed, std::size_t dim);
};

// Procedural "speech" features: each response token owns a fixed content
// pattern, consecutive frames glide between patterns at two frames per token,
// and the speaker timbre colours every frame.
Matrix synthetic_features(const SpeakerTimbre& timbre, std::span<const TextToken> tokens, std::size_t frames,
                          std::uint64_t utterance_seed);

// Fixed statistics projection from reference features to a d-wide speaker vector.
std::vector<double> speaker_vector(const Matrix& reference_features, std::size_t width);

// Feature rows from `speakers` synthetic speakers, for codec training.
Matrix codec_training_pool(std::size_t dim, int text_vocab, std::size_t speakers, std::size_t frames_per_speaker,
                           std::uint64_t seed);

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t frames = 24;
  std::uint64_t speaker_seed = 0;
  std::size_t ref_frames = 8;
};

struct TrainingBatch {
  ReasonerOutput reasoner;
  std::vector<AcousticFrame> target_frames;
  ConditioningPrefix prefix;
  Matrix target_features;
};

// Text through the reasoner stub, then "speech" for that text in the requested
// speaker's timbre, quantized by the codec. Deterministic in its inputs.
class SyntheticGenerator {
 public:
  SyntheticGenerator(const ReasonerStub& reasoner, const RvqCodec& codec, std::size_t backbone_width);

  TrainingBatch generate(const SyntheticSpec& spec) const;

  const ReasonerStub& reasoner() const noexcept { return reasoner_; }
  const RvqCodec& codec() const noexcept { return codec_; }

 private:
  std::vector<TextToken> random_text(std::uint64_t seed, std::size_t count) const;

  const ReasonerStub& reasoner_;
  const RvqCodec& codec_;
  std::size_t width_;
};

}  // namespace speechrt
