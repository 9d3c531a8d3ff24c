#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace speechrt {

struct TextToken {
  int id = 0;
  bool is_pad = false;
  bool is_eos = false;

  friend bool operator==(const TextToken&, const TextToken&) = default;
};

// Text vocabulary with one designated pad id and one designated end-of-sequence id.
class TextVocab {
 public:
  explicit TextVocab(int size, int pad_id = 0, int eos_id = 1);

  int size() const noexcept { return size_; }
  int pad_id() const noexcept { return pad_id_; }
  int eos_id() const noexcept { return eos_id_; }

  TextToken token(int id) const;
  TextToken pad() const { return token(pad_id_); }
  TextToken eos() const { return token(eos_id_); }

 private:
  int size_;
  int pad_id_;
  int eos_id_;
};

struct AcousticCode {
  int level = 0;
  int value = 0;
};

// One time step: codes[j] is the level-j codebook index.
struct AcousticFrame {
  std::vector<int> codes;

  AcousticFrame() = default;
  explicit AcousticFrame(std::vector<int> c) : codes(std::move(c)) {}
  explicit AcousticFrame(std::size_t levels) : codes(levels, 0) {}

  std::size_t size() const noexcept { return codes.size(); }
  int operator[](std::size_t j) const { return codes[j]; }
  int& operator[](std::size_t j) { return codes[j]; }

  friend bool operator==(const AcousticFrame&, const AcousticFrame&) = default;
};

// Throws CodeOutOfRange or DimensionMismatch.
void check_frame(const AcousticFrame& frame, std::size_t levels, int vocab);

struct CoarseCode {
  int value = 0;
  friend bool operator==(const CoarseCode&, const CoarseCode&) = default;
};

using InterleavedItem = std::variant<TextToken, CoarseCode>;

struct InterleavedSequence {
  std::vector<InterleavedItem> items;

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }
  friend bool operator==(const InterleavedSequence&, const InterleavedSequence&) = default;
};

inline constexpr std::size_t kCodesPerText = 2;

// Strict 1:2 interleave. Text is pad-extended when codes outlast it.
InterleavedSequence interleave(std::span<const TextToken> text, std::span<const int> codes,
                               const TextVocab& vocab);

// Streaming variant: text that codes never reach is left unconsumed instead of
// raising RatioError. This is the order a generation session sees.
InterleavedSequence interleave_stream(std::span<const TextToken> text, std::span<const int> codes,
                                      const TextVocab& vocab);

std::pair<std::vector<TextToken>, std::vector<int>> deinterleave(const InterleavedSequence& seq);

bool validate_ratio(const InterleavedSequence& seq) noexcept;

// Newline-delimited `T <id>` / `A <value>` records.
void write_sequence(std::ostream& out, const InterleavedSequence& seq);
InterleavedSequence read_sequence(std::istream& in, const TextVocab& vocab);

// Frame-major integer code files: one frame per line, N values.
void write_frames(std::ostream& out, std::span<const AcousticFrame> frames);
std::vector<AcousticFrame> read_frames(std::istream& in, std::size_t levels, int vocab);

}  // namespace speechrt
