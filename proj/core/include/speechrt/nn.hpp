#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "speechrt/graph.hpp"
#include "speechrt/tensor.hpp"

namespace speechrt {

struct TransformerShape {
  std::size_t width = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
};

// Pre-norm decoder block: RMSNorm -> causal MHA with rotary positions -> residual,
// RMSNorm -> SiLU-gated MLP -> residual.
struct BlockWeights {
  Matrix attn_norm, wq, wk, wv, wo;
  Matrix mlp_norm, w_gate, w_up, w_down;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "attn_norm", attn_norm);
    f(prefix + "wq", wq);
    f(prefix + "wk", wk);
    f(prefix + "wv", wv);
    f(prefix + "wo", wo);
    f(prefix + "mlp_norm", mlp_norm);
    f(prefix + "w_gate", w_gate);
    f(prefix + "w_up", w_up);
    f(prefix + "w_down", w_down);
  }
};

struct TransformerWeights {
  std::vector<BlockWeights> blocks;
  Matrix final_norm;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].visit(prefix + "l" + std::to_string(l) + ".", f);
    f(prefix + "final_norm", final_norm);
  }
};

TransformerWeights init_transformer(const TransformerShape& shape, std::mt19937_64& rng);

// Per-layer rotated keys and values for positions [0, length).
class KvCache {
 public:
  KvCache() = default;
  KvCache(std::size_t layers, std::size_t width, std::size_t limit);

  std::size_t length() const noexcept { return length_; }
  std::size_t limit() const noexcept { return limit_; }
  std::size_t layers() const noexcept { return keys_.size(); }
  std::size_t width() const noexcept { return width_; }
  bool full() const noexcept { return length_ >= limit_; }

  std::span<const double> keys(std::size_t layer) const { return {keys_[layer].data(), length_ * width_}; }
  std::span<const double> values(std::size_t layer) const { return {values_[layer].data(), length_ * width_}; }

  // Writes position `length()` of one layer; commit() advances all layers together.
  void put(std::size_t layer, std::span<const double> k, std::span<const double> v);
  void commit();

 private:
  std::size_t width_ = 0;
  std::size_t limit_ = 0;
  std::size_t length_ = 0;
  std::vector<std::vector<double>> keys_;
  std::vector<std::vector<double>> values_;
};

void rmsnorm_row(std::span<const double> x, const Matrix& gain, std::span<double> out, double eps = 1e-6);
void rope_row(std::span<double> x, std::size_t heads, std::size_t position, double base = 10000.0);

// One incremental position through the stack. `x` is the input embedding; on
// return `hidden` holds the final-normalized state. Throws ContextOverflow.
void transformer_step(const TransformerWeights& w, const TransformerShape& shape, KvCache& cache,
                      std::span<const double> x, std::span<double> hidden);

// Uncached pass over all rows, layer by layer. Returns final-normalized hidden
// rows. When `fill` is given it receives every layer's keys and values.
Matrix transformer_forward(const TransformerWeights& w, const TransformerShape& shape, const Matrix& inputs,
                           ArithmeticMode mode, KvCache* fill = nullptr);

// Differentiable pass; rows form independent causal blocks of `block` rows and
// rotary positions restart at 0 in each block. `grads` may be null (frozen).
Graph::Var transformer_graph(Graph& g, const TransformerWeights& w, TransformerWeights* grads,
                             const TransformerShape& shape, Graph::Var x, std::size_t block);

}  // namespace speechrt
