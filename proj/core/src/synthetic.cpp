#include "speechrt/synthetic.hpp"

#include <cmath>
#include <random>

#include "speechrt/errors.hpp"
#include "speechrt/sampler.hpp"

namespace speechrt {

namespace {

constexpr std::uint64_t kContentSalt = 0xC0FFEE;
constexpr std::uint64_t kTimbreSalt = 0x7157;
constexpr std::uint64_t kSpeakerProjSeed = 0x5EED;

std::vector<double> content_pattern(int token_id, std::size_t dim) {
  std::mt19937_64 rng(mix_seed(kContentSalt, static_cast<std::uint64_t>(token_id)));
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> p(dim);
  for (auto& v : p) v = n(rng);
  return p;
}

}  // namespace

SpeakerTimbre SpeakerTimbre::from_seed(std::uint64_t speaker_seed, std::size_t dim) {
  std::mt19937_64 rng(mix_seed(kTimbreSalt, speaker_seed));
  std::normal_distribution<double> n(0.0, 1.0);
  SpeakerTimbre t;
  t.envelope.resize(dim);
  t.offset.resize(dim);
  for (auto& g : t.envelope) g = std::exp(0.6 * n(rng));
  for (auto& o : t.offset) o = 0.4 * n(rng);
  return t;
}

Matrix synthetic_features(const SpeakerTimbre& timbre, std::span<const TextToken> tokens, std::size_t frames,
                          std::uint64_t utterance_seed) {
  if (tokens.empty()) throw EmptyInput("synthetic speech needs text");
  const std::size_t dim = timbre.envelope.size();
  std::mt19937_64 rng(utterance_seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix f(frames, dim);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t i = std::min(t / 2, tokens.size() - 1);
    const std::size_t next = std::min(i + 1, tokens.size() - 1);
    const double phase = 0.5 * static_cast<double>(t % 2);
    const auto a = content_pattern(tokens[i].id, dim);
    const auto b = content_pattern(tokens[next].id, dim);
    for (std::size_t k = 0; k < dim; ++k)
      f(t, k) = 0.5 * timbre.envelope[k] * ((1.0 - phase) * a[k] + phase * b[k]) + timbre.offset[k] + noise(rng);
  }
  return f;
}

std::vector<double> speaker_vector(const Matrix& reference_features, std::size_t width) {
  if (reference_features.rows == 0) throw EmptyInput("speaker vector needs reference features");
  const std::size_t dim = reference_features.cols;
  const auto n = static_cast<double>(reference_features.rows);
  std::vector<double> stats(2 * dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < reference_features.rows; ++r) mean += reference_features(r, k) / n;
    for (std::size_t r = 0; r < reference_features.rows; ++r) sq += std::pow(reference_features(r, k) - mean, 2) / n;
    stats[k] = mean;
    stats[dim + k] = std::log(std::sqrt(sq) + 1e-3);
  }
  std::mt19937_64 rng(mix_seed(kSpeakerProjSeed, dim));
  const Matrix proj = random_normal(2 * dim, width, 1.0 / std::sqrt(static_cast<double>(2 * dim)), rng);
  std::vector<double> out(width);
  vec_mat(stats, proj, out);
  for (auto& v : out) v = std::tanh(v);
  return out;
}

Matrix codec_training_pool(std::size_t dim, int text_vocab, std::size_t speakers, std::size_t frames_per_speaker,
                           std::uint64_t seed) {
  Matrix pool(speakers * frames_per_speaker, dim);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(2, text_vocab - 1);
  for (std::size_t s = 0; s < speakers; ++s) {
    const SpeakerTimbre timbre = SpeakerTimbre::from_seed(mix_seed(seed, s), dim);
    std::vector<TextToken> tokens;
    for (std::size_t i = 0; i < frames_per_speaker / 2 + 1; ++i) tokens.push_back(TextToken{tok(rng), false, false});
    const Matrix f = synthetic_features(timbre, tokens, frames_per_speaker, mix_seed(seed, 1000 + s));
    std::copy(f.data.begin(), f.data.end(), pool.data.begin() + static_cast<std::ptrdiff_t>(s * frames_per_speaker * dim));
  }
  return pool;
}

SyntheticGenerator::SyntheticGenerator(const ReasonerStub& reasoner, const RvqCodec& codec, std::size_t backbone_width)
    : reasoner_(reasoner), codec_(codec), width_(backbone_width) {}

std::vector<TextToken> SyntheticGenerator::random_text(std::uint64_t seed, std::size_t count) const {
  const TextVocab& vocab = reasoner_.vocab();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(2, vocab.size() - 1);
  std::vector<TextToken> text;
  for (std::size_t i = 0; i < count; ++i) text.push_back(vocab.token(tok(rng)));
  return text;
}

TrainingBatch SyntheticGenerator::generate(const SyntheticSpec& spec) const {
  if (spec.frames < 1) throw EmptyInput("synthetic pairs need at least one frame");
  const SpeakerTimbre timbre = SpeakerTimbre::from_seed(spec.speaker_seed, codec_.dim());
  TrainingBatch batch;
  const auto prompt = random_text(mix_seed(spec.seed, 0), (spec.frames + 1) / 2);
  batch.reasoner = reasoner_.reason(prompt);
  batch.target_features = synthetic_features(timbre, batch.reasoner.text_tokens, spec.frames, mix_seed(spec.seed, 1));
  batch.target_frames = codec_.encode(batch.target_features, codec_.levels());

  if (spec.ref_frames > 0) {
    batch.prefix.ref_text = random_text(mix_seed(spec.seed, 2), (spec.ref_frames + 1) / 2);
    const Matrix ref = synthetic_features(timbre, batch.prefix.ref_text, spec.ref_frames, mix_seed(spec.seed, 3));
    batch.prefix.ref_audio = codec_.encode(ref, codec_.levels());
    batch.prefix.speaker = speaker_vector(ref, width_);
  }
  return batch;
}

}  // namespace speechrt
