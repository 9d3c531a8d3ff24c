#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "speechrt/errors.hpp"
#include "speechrt/tokens.hpp"

using namespace speechrt;

namespace {

const TextVocab vocab(16);

TextToken t(int id) { return vocab.token(id); }
InterleavedItem T(int id) { return t(id); }
InterleavedItem A(int v) { return CoarseCode{v}; }

}  // namespace

TEST(TextVocab, PadAndEosAreDistinctAndFlagged) {
  EXPECT_TRUE(vocab.pad().is_pad);
  EXPECT_FALSE(vocab.pad().is_eos);
  EXPECT_TRUE(vocab.eos().is_eos);
  EXPECT_NE(vocab.pad_id(), vocab.eos_id());
  EXPECT_FALSE(t(5).is_pad || t(5).is_eos);
  EXPECT_THROW(TextVocab(8, 2, 2), ConfigError);
  EXPECT_THROW(TextVocab(2), ConfigError);
  EXPECT_THROW(vocab.token(16), CodeOutOfRange);
}

TEST(CheckFrame, RejectsWrongLengthOrValue) {
  EXPECT_NO_THROW(check_frame(AcousticFrame({1, 2, 3}), 3, 4));
  EXPECT_THROW(check_frame(AcousticFrame({1, 2}), 3, 4), DimensionMismatch);
  EXPECT_THROW(check_frame(AcousticFrame({1, 2, 4}), 3, 4), CodeOutOfRange);
  EXPECT_THROW(check_frame(AcousticFrame({-1, 2, 3}), 3, 4), CodeOutOfRange);
}

TEST(Interleave, TwoTextFourCodes) {
  const std::vector<TextToken> text{t(5), t(6)};
  const std::vector<int> codes{10, 11, 12, 13};
  const InterleavedSequence want{{T(5), A(10), A(11), T(6), A(12), A(13)}};
  EXPECT_EQ(interleave(text, codes, vocab), want);
}

TEST(Interleave, PadsWhenAudioOutlastsText) {
  const std::vector<TextToken> text{t(5)};
  const std::vector<int> codes{10, 11, 12, 13};
  const InterleavedSequence want{{T(5), A(10), A(11), InterleavedItem(vocab.pad()), A(12), A(13)}};
  EXPECT_EQ(interleave(text, codes, vocab), want);
}

TEST(Interleave, TooFewCodesIsRatioError) {
  const std::vector<TextToken> text{t(5), t(6)};
  const std::vector<int> codes{10};
  EXPECT_THROW(interleave(text, codes, vocab), RatioError);
}

TEST(Interleave, NoCodesIsEmptyInput) {
  const std::vector<TextToken> text{t(5)};
  EXPECT_THROW(interleave(text, std::vector<int>{}, vocab), EmptyInput);
  EXPECT_THROW(interleave_stream(text, std::vector<int>{}, vocab), EmptyInput);
}

TEST(Interleave, StreamVariantLeavesUnreachedTextOut) {
  const std::vector<TextToken> text{t(5), t(6), t(7)};
  const std::vector<int> codes{10, 11, 12};
  const InterleavedSequence want{{T(5), A(10), A(11), T(6), A(12)}};
  EXPECT_EQ(interleave_stream(text, codes, vocab), want);
}

TEST(Deinterleave, SingleGroup) {
  const auto [text, codes] = deinterleave({{T(3), A(1), A(2)}});
  EXPECT_EQ(text, std::vector<TextToken>{t(3)});
  EXPECT_EQ(codes, (std::vector<int>{1, 2}));
}

TEST(Deinterleave, CodeBeforeTextIsMalformed) {
  EXPECT_THROW(deinterleave({{A(1), T(3)}}), MalformedSequence);
}

TEST(ValidateRatio, Examples) {
  EXPECT_TRUE(validate_ratio({{T(1), A(1), A(2), T(2), A(3), A(4)}}));
  EXPECT_FALSE(validate_ratio({{T(1), A(1), T(2), A(2)}}));
  EXPECT_TRUE(validate_ratio({}));
  EXPECT_TRUE(validate_ratio({{T(1), A(1), A(2), T(2)}}));
  EXPECT_TRUE(validate_ratio({{T(1), A(1)}}));
  EXPECT_FALSE(validate_ratio({{T(1), A(1), A(2), A(3)}}));
  EXPECT_FALSE(validate_ratio({{T(1), T(2)}}));
}

TEST(Interleave, RoundTripAndOrderOnRandomPairs) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_codes = 1 + rng() % 40;
    const std::size_t n_text = rng() % (n_codes / 2 + 1);
    std::vector<TextToken> text;
    for (std::size_t i = 0; i < n_text; ++i) text.push_back(t(2 + static_cast<int>(rng() % 14)));
    std::vector<int> codes;
    for (std::size_t i = 0; i < n_codes; ++i) codes.push_back(static_cast<int>(rng() % 256));

    const auto seq = interleave(text, codes, vocab);
    ASSERT_TRUE(validate_ratio(seq));
    const auto [text_out, codes_out] = deinterleave(seq);
    EXPECT_EQ(codes_out, codes);
    auto padded = text;
    padded.resize((n_codes + 1) / 2, vocab.pad());
    EXPECT_EQ(text_out, padded);
  }
}

TEST(Serialization, SequenceRoundTrip) {
  const InterleavedSequence seq{{T(5), A(10), A(255), InterleavedItem(vocab.pad()), A(0)}};
  std::stringstream ss;
  write_sequence(ss, seq);
  EXPECT_EQ(ss.str(), "T 5\nA 10\nA 255\nT 0\nA 0\n");
  EXPECT_EQ(read_sequence(ss, vocab), seq);
}

TEST(Serialization, BadRecordsAreRejected) {
  std::stringstream bad_tag("X 3\n");
  EXPECT_THROW(read_sequence(bad_tag, vocab), FormatError);
  std::stringstream bad_value("T nope\n");
  EXPECT_THROW(read_sequence(bad_value, vocab), FormatError);
}

TEST(Serialization, FramesRoundTrip) {
  const std::vector<AcousticFrame> frames{AcousticFrame({1, 2, 3}), AcousticFrame({4, 5, 6})};
  std::stringstream ss;
  write_frames(ss, frames);
  EXPECT_EQ(ss.str(), "1 2 3\n4 5 6\n");
  EXPECT_EQ(read_frames(ss, 3, 8), frames);
  std::stringstream wrong("1 2\n");
  EXPECT_THROW(read_frames(wrong, 3, 8), DimensionMismatch);
}
