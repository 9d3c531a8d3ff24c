#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "speechrt/graph.hpp"
#include "speechrt/nn.hpp"
#include "speechrt/sampler.hpp"
#include "speechrt/tokens.hpp"

namespace speechrt {

struct RefinerConfig {
  std::size_t width = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 64;
  std::size_t levels = 8;
  int vocab = 256;
  std::size_t backbone_width = 64;
  std::uint64_t seed = 3;

  TransformerShape shape() const { return {width, layers, heads, mlp_hidden}; }
  void validate() const;
};

struct RefinerWeights {
  Matrix hidden_proj;               // d_backbone x d_r
  Matrix coarse_embedding;          // V x d_r
  std::vector<Matrix> level_inputs;  // levels 1..N-2, each V x d_r
  Matrix positions;                 // (N-1) x d_r
  TransformerWeights trunk;
  std::vector<Matrix> heads;  // levels 1..N-1, each d_r x V

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "hidden_proj", hidden_proj);
    f(prefix + "coarse_emb", coarse_embedding);
    for (std::size_t j = 0; j < level_inputs.size(); ++j) f(prefix + "level_emb." + std::to_string(j + 1), level_inputs[j]);
    f(prefix + "positions", positions);
    trunk.visit(prefix + "trunk.", f);
    for (std::size_t j = 0; j < heads.size(); ++j) f(prefix + "head." + std::to_string(j + 1), heads[j]);
  }

  RefinerWeights zeros_like() const;
};

struct RefineInput {
  int coarse_code = 0;
  std::vector<double> backbone_hidden;
};

// Intra-frame autoregressive prediction of residual levels 1..N-1. Position 0
// of the intra-frame sequence holds the projected backbone state plus the coarse
// code embedding; position i >= 1 holds the level-i code. The state at position
// j-1 feeds the level-j head.
class Refiner {
 public:
  explicit Refiner(RefinerConfig cfg);
  Refiner(RefinerConfig cfg, RefinerWeights weights);

  const RefinerConfig& config() const noexcept { return cfg_; }
  const RefinerWeights& weights() const noexcept { return w_; }
  RefinerWeights& weights() noexcept { return w_; }

  // Logits for level j given codes c^1..c^{j-1}. Throws LevelOutOfRange.
  std::vector<double> level_logits(const RefineInput& input, std::span<const int> prefix, std::size_t level) const;

  // Full N-level frame; entry 0 is the coarse code. Non-greedy draws are seeded
  // from (sampler seed, input) so the result is a pure function of its arguments.
  AcousticFrame refine_frame(const RefineInput& input, const SamplerConfig& sampler) const;

  // sum_j log p(c^j | c^0, h, c^{1:j-1}) under teacher forcing.
  double log_prob(const RefineInput& input, const AcousticFrame& frame) const;

 private:
  void check(const RefineInput& input) const;
  std::vector<double> input_row(const RefineInput& input, std::size_t position, int code) const;
  std::vector<double> head_logits(std::span<const double> hidden, std::size_t level) const;

  RefinerConfig cfg_;
  RefinerWeights w_;
};

// Teacher-forced differentiable pass over L frames. `hidden` is an L x d_b
// graph value; returns N-1 logit matrices (L x V), index j-1 for level j.
std::vector<Graph::Var> refiner_graph(Graph& g, const Refiner& refiner, RefinerWeights* grads, Graph::Var hidden,
                                      std::span<const AcousticFrame> frames);

}  // namespace speechrt
