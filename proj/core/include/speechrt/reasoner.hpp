#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "speechrt/tensor.hpp"
#include "speechrt/tokens.hpp"

namespace speechrt {

struct StubConfig {
  std::size_t width = 64;
  int text_vocab = 64;
  std::uint64_t seed = 7;
};

struct ReasonerOutput {
  Matrix text_embeddings;  // T x d
  Matrix hidden_states;    // T x d
  std::vector<TextToken> text_tokens;

  std::size_t length() const noexcept { return text_tokens.size(); }
  friend bool operator==(const ReasonerOutput&, const ReasonerOutput&) = default;
};

// Frozen, deterministic stand-in for the dialogue model that feeds the speech
// generator. The response echoes each content token of the input through a fixed
// id permutation and terminates with eos. Embeddings come from a seeded table;
// hidden states from one fixed mixing layer over the causal running mean.
class ReasonerStub {
 public:
  explicit ReasonerStub(StubConfig cfg);

  const StubConfig& config() const noexcept { return cfg_; }
  const TextVocab& vocab() const noexcept { return vocab_; }

  std::vector<TextToken> respond(std::span<const TextToken> input) const;
  // `features`, when given, is a frame-feature matrix of any width whose mean
  // row is mixed into every hidden state. Throws EmptyInput.
  ReasonerOutput reason(std::span<const TextToken> input, const Matrix* features = nullptr) const;

 private:
  StubConfig cfg_;
  TextVocab vocab_;
  Matrix table_;
  Matrix w_mean_;
  Matrix w_self_;
  Matrix bias_;
};

}  // namespace speechrt
