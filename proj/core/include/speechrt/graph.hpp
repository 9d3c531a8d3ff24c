#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "speechrt/tensor.hpp"

namespace speechrt {

// Reverse-mode autodiff tape over dense matrices. Nodes are appended in
// evaluation order; backward() walks them in reverse.
class Graph {
 public:
  struct Var {
    std::size_t id = 0;
  };

  Var constant(Matrix m);
  // A leaf bound to external storage. Gradients are added into `grad` when it is
  // non-null; a null sink marks the leaf frozen and prunes its subgraph.
  Var param(const Matrix& value, Matrix* grad);

  const Matrix& value(Var v) const;
  double scalar(Var v) const { return value(v).data.at(0); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var silu(Var a);
  Var rmsnorm(Var x, Var gain, double eps = 1e-6);
  Var gather(Var table, std::vector<std::size_t> indices);
  Var select_rows(Var x, std::vector<std::size_t> indices);
  Var concat_rows(std::span<const Var> parts);
  // Row r * parts.size() + p of the result is row r of parts[p].
  Var interleave_rows(std::span<const Var> parts);
  Var rope(Var x, std::size_t heads, std::vector<std::size_t> positions, double base = 10000.0);
  // Causal multi-head attention; rows are split into independent blocks of `block` rows.
  Var causal_attention(Var q, Var k, Var v, std::size_t heads, std::size_t block);
  // Sum over rows of -log softmax(logits_r)[targets_r]; a 1x1 result.
  Var cross_entropy(Var logits, std::vector<int> targets);

  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    Matrix* sink = nullptr;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Var push(Matrix value, bool needs_grad);
  const Matrix& val(std::size_t id) const { return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].owned; }
  Matrix& grad_of(std::size_t id);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  std::vector<Node> nodes_;
};

}  // namespace speechrt
