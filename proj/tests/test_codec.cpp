#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "speechrt/codec.hpp"
#include "speechrt/errors.hpp"
#include "speechrt/synthetic.hpp"

using namespace speechrt;

namespace {

CodecConfig small_config() {
  CodecConfig cfg;
  cfg.levels = 3;
  cfg.vocab = 8;
  cfg.dim = 4;
  cfg.frame_hop = 16;
  cfg.sample_rate = 800;
  return cfg;
}

const RvqCodec& trained() {
  static const RvqCodec codec = train_codec(codec_training_pool(16, 64, 16, 128, 13), CodecConfig{});
  return codec;
}

Matrix features_for(std::uint64_t seed, std::size_t frames) {
  std::mt19937_64 rng(seed);
  std::vector<TextToken> text;
  const TextVocab vocab(64);
  for (std::size_t i = 0; i < frames / 2 + 1; ++i) text.push_back(vocab.token(2 + static_cast<int>(rng() % 62)));
  return synthetic_features(SpeakerTimbre::from_seed(seed + 1000, 16), text, frames, seed);
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < m.rows; ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

}  // namespace

TEST(RvqEncode, ExactCodewordQuantizesToItself) {
  const auto codec = random_codec(small_config());
  for (int m = 0; m < 7; ++m) {
    Matrix x(1, 4);
    const auto row = codec.codebooks()[0].entries.row(static_cast<std::size_t>(m));
    std::copy(row.begin(), row.end(), x.row(0).begin());
    const auto frames = codec.encode(x, 1);
    EXPECT_EQ(frames[0][0], m);
    EXPECT_EQ(codec.decode(frames, 1), x);
  }
}

TEST(RvqEncode, MatchesBruteForceNearestNeighbour) {
  const auto codec = random_codec(small_config());
  std::mt19937_64 rng(1);
  const Matrix x = random_normal(200, 4, 1.0, rng);
  const auto frames = codec.encode(x, 3);
  for (std::size_t t = 0; t < x.rows; ++t) {
    std::vector<double> residual(x.row(t).begin(), x.row(t).end());
    for (std::size_t j = 0; j < 3; ++j) {
      // Level 0 keeps the last index for the stop code.
      const int want = oracle::nearest_row(rows_of(codec.codebooks()[j].entries), residual, j == 0 ? 7 : -1);
      ASSERT_EQ(frames[t][j], want) << t << " " << j;
      for (std::size_t i = 0; i < 4; ++i) residual[i] -= codec.codebooks()[j].entries(static_cast<std::size_t>(want), i);
    }
  }
}

TEST(RvqEncode, TiesGoToLowestIndex) {
  CodecConfig cfg = small_config();
  cfg.levels = 1;
  Matrix entries(8, 4);
  for (std::size_t i = 0; i < 8; ++i) entries(i, 0) = i % 2 ? -1.0 : 1.0;
  const RvqCodec codec(cfg, {{0, entries}});
  const auto frames = codec.encode(Matrix(1, 4), 1);
  EXPECT_EQ(frames[0][0], 0);
}

TEST(RvqEncode, UnusedLevelsAreZeroFilledAndDepthChecked) {
  const auto codec = random_codec(small_config());
  std::mt19937_64 rng(2);
  const Matrix x = random_normal(5, 4, 1.0, rng);
  for (const auto& f : codec.encode(x, 1)) {
    EXPECT_EQ(f[1], 0);
    EXPECT_EQ(f[2], 0);
  }
  EXPECT_THROW(codec.encode(x, 0), LevelOutOfRange);
  EXPECT_THROW(codec.encode(x, 4), LevelOutOfRange);
  EXPECT_THROW(codec.encode(Matrix(2, 5), 1), DimensionMismatch);
}

TEST(RvqEncode, LevelZeroNeverEmitsStopCode) {
  const auto& codec = trained();
  const Matrix x = features_for(3, 400);
  for (const auto& f : codec.encode(x, codec.levels())) EXPECT_NE(f[0], codec.config().end_code());
}

TEST(RvqDecode, ZeroCodebooksGiveZeros) {
  CodecConfig cfg = small_config();
  std::vector<Codebook> books;
  for (std::size_t j = 0; j < 3; ++j) books.push_back({j, Matrix(8, 4)});
  const RvqCodec codec(cfg, books);
  const std::vector<AcousticFrame> frames(4, AcousticFrame(3));
  EXPECT_EQ(codec.decode(frames, 3), Matrix(4, 4));
}

TEST(RvqDecode, OutOfRangeCodes) {
  const auto codec = random_codec(small_config());
  const std::vector<AcousticFrame> frames{AcousticFrame({1, 8, 0})};
  EXPECT_THROW(codec.decode(frames, 3), CodeOutOfRange);
  EXPECT_NO_THROW(codec.decode(frames, 1));
}

TEST(RvqDecode, SumsCodewords) {
  const auto codec = random_codec(small_config());
  const std::vector<AcousticFrame> frames{AcousticFrame({1, 2, 3})};
  const Matrix out = codec.decode(frames, 3);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_DOUBLE_EQ(out(0, i), codec.codebooks()[0].entries(1, i) + codec.codebooks()[1].entries(2, i) +
                                    codec.codebooks()[2].entries(3, i));
}

TEST(RvqTraining, ReservesZeroCodewordAndIsSeeded) {
  const auto& codec = trained();
  for (const auto& book : codec.codebooks())
    for (std::size_t i = 0; i < codec.dim(); ++i) EXPECT_EQ(book.entries(255, i), 0.0);
  const Matrix pool = codec_training_pool(4, 16, 4, 32, 1);
  const auto a = train_codec(pool, small_config()), b = train_codec(pool, small_config());
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(a.codebooks()[j].entries, b.codebooks()[j].entries);
}

TEST(RvqTraining, ErrorIsNonIncreasingInDepth) {
  const auto& codec = trained();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = features_for(seed, 60);
    double prev = INFINITY;
    for (std::size_t k = 1; k <= 8; ++k) {
      const double e = codec.reconstruction_mse(x, k);
      EXPECT_LE(e, prev) << "seed " << seed << " k " << k;
      prev = e;
    }
    EXPECT_LT(codec.reconstruction_mse(x, 8), codec.reconstruction_mse(x, 1));
  }
}

TEST(RvqTraining, FullDepthBeatsOneLevelOnRandomFixedCodebooks) {
  const auto codec = random_codec(small_config(), 1.0);
  std::mt19937_64 rng(5);
  const Matrix x = random_normal(300, 4, 1.0, rng);
  EXPECT_LT(codec.reconstruction_mse(x, 3), codec.reconstruction_mse(x, 1));
}

TEST(Synthesis, LengthContract) {
  const auto& codec = trained();
  EXPECT_EQ(codec.synthesize(Matrix(1, 16)).samples.size(), 480u);
  const auto zeros = codec.synthesize(Matrix(5, 16));
  EXPECT_EQ(zeros.samples.size(), 5u * 480u);
  for (double s : zeros.samples) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(zeros.sample_rate, 24000);
  EXPECT_THROW(codec.synthesize(Matrix(0, 16)), EmptyInput);
}

TEST(Synthesis, IsCausal) {
  const auto& codec = trained();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = random_normal(10, 16, 1.0, rng);
    const auto base = codec.synthesize(x);
    const std::size_t t = rng() % 9;
    for (std::size_t r = t + 1; r < 10; ++r)
      for (std::size_t c = 0; c < 16; ++c) x(r, c) += 0.5;
    const auto changed = codec.synthesize(x);
    for (std::size_t s = 0; s < (t + 1) * 480; ++s) ASSERT_EQ(changed.samples[s], base.samples[s]);
  }
}

TEST(Synthesis, ClampsInsteadOfWrapping) {
  const auto& codec = trained();
  Matrix x(2, 16, 1e6);
  const auto w = codec.synthesize(x);
  for (double s : w.samples) {
    EXPECT_LE(s, 1.0);
    EXPECT_GE(s, -1.0);
  }
  EXPECT_EQ(*std::max_element(w.samples.begin(), w.samples.end()), 1.0);
}

TEST(Analysis, FramingAndErrors) {
  const auto& codec = trained();
  Waveform w;
  w.samples.assign(4 * 480 + 100, 0.0);
  const Matrix silent = codec.analyze(w);
  EXPECT_EQ(silent.rows, 4u);
  for (double v : silent.data) EXPECT_EQ(v, 0.0);
  w.samples.assign(479, 0.0);
  EXPECT_THROW(codec.analyze(w), TooShort);
}

TEST(Analysis, RowsOnlySeeTheirWindow) {
  const auto& codec = trained();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Waveform w;
  for (int i = 0; i < 6 * 480; ++i) w.samples.push_back(u(rng));
  const Matrix base = codec.analyze(w);
  for (std::size_t n = 2 * 480; n < 3 * 480; ++n) w.samples[n] = 0.0;
  const Matrix changed = codec.analyze(w);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 16; ++c) {
      if (t == 2) continue;
      EXPECT_EQ(changed(t, c), base(t, c));
    }
}

TEST(Analysis, RoundTripThroughSynthesisIsFaithful) {
  const auto& codec = trained();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = features_for(seed, 100);
    const Matrix decoded = codec.decode(codec.encode(x, 8), 8);
    const Matrix back = codec.analyze(codec.synthesize(decoded));
    EXPECT_GT(oracle::pearson(back.data, x.data), 0.9) << seed;
    EXPECT_GT(oracle::pearson(back.data, decoded.data), 0.9) << seed;
  }
}

TEST(BatchedDecode, ChunkSizes) {
  const auto& codec = trained();
  std::vector<AcousticFrame> frames(8, AcousticFrame(std::vector<int>(8, 3)));
  auto chunks = codec_decode_batched(frames, codec, 4);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].samples.size(), 4u * 480u);
  EXPECT_EQ(chunks[1].samples.size(), 4u * 480u);
  frames.resize(5);
  chunks = codec_decode_batched(frames, codec, 4);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].samples.size(), 4u * 480u);
  EXPECT_EQ(chunks[1].samples.size(), 480u);
}

TEST(BatchedDecode, SampleExactToUnbatched) {
  const auto& codec = trained();
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t L = 1 + rng() % 23;
    std::vector<AcousticFrame> frames;
    for (std::size_t t = 0; t < L; ++t) {
      AcousticFrame f(8);
      for (auto& c : f.codes) c = static_cast<int>(rng() % 256);
      frames.push_back(f);
    }
    const auto whole = codec.synthesize(codec.decode(frames, 8));
    const std::size_t group = 1 + rng() % 6;
    std::vector<double> joined;
    for (const auto& chunk : codec_decode_batched(frames, codec, group))
      joined.insert(joined.end(), chunk.samples.begin(), chunk.samples.end());
    ASSERT_EQ(joined, whole.samples) << trial;
  }
}
