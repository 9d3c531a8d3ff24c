#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "speechrt/codec.hpp"

namespace speechrt {

inline constexpr std::size_t kSpeakerEmbeddingDim = 192;

struct SpeakerEmbedding {
  std::vector<double> vector;
  std::string extractor_id;
};

// 48 log-spaced bands x {mean log energy, log-energy spread, mean absolute
// frame-to-frame change, mean level relative to the frame average}, each block
// centred across bands. Needs at least 0.5 s of audio; throws TooShort.
SpeakerEmbedding extract_speaker_embedding(const Waveform& wave);

// Cosine similarity. Throws ZeroVector or DimensionMismatch.
double compute_sim(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

}  // namespace speechrt
