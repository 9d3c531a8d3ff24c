#include "speechrt/tokens.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "speechrt/errors.hpp"

namespace speechrt {

TextVocab::TextVocab(int size, int pad_id, int eos_id) : size_(size), pad_id_(pad_id), eos_id_(eos_id) {
  if (size < 3) throw ConfigError("text vocabulary needs pad, eos and one content token");
  if (pad_id == eos_id) throw ConfigError("pad and eos ids must differ");
  if (pad_id < 0 || pad_id >= size || eos_id < 0 || eos_id >= size)
    throw ConfigError("pad/eos ids outside the vocabulary");
}

TextToken TextVocab::token(int id) const {
  if (id < 0 || id >= size_) throw CodeOutOfRange("text token id " + std::to_string(id));
  return TextToken{id, id == pad_id_, id == eos_id_};
}

void check_frame(const AcousticFrame& frame, std::size_t levels, int vocab) {
  if (frame.size() != levels)
    throw DimensionMismatch("frame has " + std::to_string(frame.size()) + " levels, expected " +
                            std::to_string(levels));
  for (int c : frame.codes)
    if (c < 0 || c >= vocab) throw CodeOutOfRange("code " + std::to_string(c));
}

namespace {

InterleavedSequence build(std::span<const TextToken> text, std::span<const int> codes, const TextVocab& vocab) {
  InterleavedSequence seq;
  const std::size_t groups = (codes.size() + kCodesPerText - 1) / kCodesPerText;
  seq.items.reserve(groups + codes.size());
  for (std::size_t g = 0; g < groups; ++g) {
    seq.items.emplace_back(g < text.size() ? text[g] : vocab.pad());
    for (std::size_t k = g * kCodesPerText; k < std::min(codes.size(), (g + 1) * kCodesPerText); ++k)
      seq.items.emplace_back(CoarseCode{codes[k]});
  }
  return seq;
}

}  // namespace

InterleavedSequence interleave(std::span<const TextToken> text, std::span<const int> codes,
                               const TextVocab& vocab) {
  if (codes.empty()) throw EmptyInput("interleave needs at least one code");
  if (codes.size() < kCodesPerText * text.size())
    throw RatioError(std::to_string(codes.size()) + " codes cannot cover " + std::to_string(text.size()) +
                     " text tokens");
  return build(text, codes, vocab);
}

InterleavedSequence interleave_stream(std::span<const TextToken> text, std::span<const int> codes,
                                      const TextVocab& vocab) {
  if (codes.empty()) throw EmptyInput("interleave needs at least one code");
  return build(text, codes, vocab);
}

std::pair<std::vector<TextToken>, std::vector<int>> deinterleave(const InterleavedSequence& seq) {
  if (!validate_ratio(seq)) throw MalformedSequence("sequence violates the 1:2 schedule");
  std::pair<std::vector<TextToken>, std::vector<int>> out;
  for (const auto& item : seq.items) {
    if (const auto* t = std::get_if<TextToken>(&item))
      out.first.push_back(*t);
    else
      out.second.push_back(std::get<CoarseCode>(item).value);
  }
  return out;
}

bool validate_ratio(const InterleavedSequence& seq) noexcept {
  // -1: no text seen yet. Otherwise the number of codes since the last text token.
  long run = -1;
  for (const auto& item : seq.items) {
    if (std::holds_alternative<TextToken>(item)) {
      if (run >= 0 && run != static_cast<long>(kCodesPerText)) return false;
      run = 0;
    } else {
      if (run < 0 || run == static_cast<long>(kCodesPerText)) return false;
      ++run;
    }
  }
  // The final group may be cut short by end of generation.
  return true;
}

void write_sequence(std::ostream& out, const InterleavedSequence& seq) {
  for (const auto& item : seq.items) {
    if (const auto* t = std::get_if<TextToken>(&item))
      out << "T " << t->id << '\n';
    else
      out << "A " << std::get<CoarseCode>(item).value << '\n';
  }
}

InterleavedSequence read_sequence(std::istream& in, const TextVocab& vocab) {
  InterleavedSequence seq;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    char tag = 0;
    long value = 0;
    if (!(ls >> tag >> value)) throw FormatError("line " + std::to_string(lineno) + ": expected `<tag> <int>`");
    if (tag == 'T')
      seq.items.emplace_back(vocab.token(static_cast<int>(value)));
    else if (tag == 'A')
      seq.items.emplace_back(CoarseCode{static_cast<int>(value)});
    else
      throw FormatError("line " + std::to_string(lineno) + ": unknown tag");
  }
  return seq;
}

void write_frames(std::ostream& out, std::span<const AcousticFrame> frames) {
  for (const auto& f : frames) {
    for (std::size_t j = 0; j < f.size(); ++j) out << (j ? " " : "") << f[j];
    out << '\n';
  }
}

std::vector<AcousticFrame> read_frames(std::istream& in, std::size_t levels, int vocab) {
  std::vector<AcousticFrame> frames;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    AcousticFrame f;
    int v = 0;
    while (ls >> v) f.codes.push_back(v);
    if (f.codes.empty()) continue;
    check_frame(f, levels, vocab);
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace speechrt
