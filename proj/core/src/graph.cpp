#include "speechrt/graph.hpp"

#include <cmath>

#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

}  // namespace

Graph::Var Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Matrix& v = val(id);
    n.grad = Matrix(v.rows, v.cols);
  }
  return n.grad;
}

Graph::Var Graph::constant(Matrix m) { return push(std::move(m), false); }

Graph::Var Graph::param(const Matrix& value, Matrix* grad) {
  Node n;
  n.ref = &value;
  n.sink = grad;
  n.needs_grad = grad != nullptr;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Graph::value(Var v) const { return val(v.id); }

Graph::Var Graph::matmul(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  require(A.cols == B.rows, "matmul inner dimensions");
  Matrix C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double aik = A(i, k);
      for (std::size_t j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
    }
  Var out = push(std::move(C), needs(a) || needs(b));
  if (needs(out))
    nodes_[out.id].back = [this, a, b, out] {
      const Matrix& A = val(a.id);
      const Matrix& B = val(b.id);
      const Matrix& G = nodes_[out.id].grad;
      if (needs(a)) {
        Matrix& gA = grad_of(a.id);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t k = 0; k < A.cols; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < B.cols; ++j) s += G(i, j) * B(k, j);
            gA(i, k) += s;
          }
      }
      if (needs(b)) {
        Matrix& gB = grad_of(b.id);
        for (std::size_t i = 0; i < A.rows; ++i)
          for (std::size_t k = 0; k < A.cols; ++k) {
            const double aik = A(i, k);
            for (std::size_t j = 0; j < B.cols; ++j) gB(k, j) += aik * G(i, j);
          }
      }
    };
  return out;
}

Graph::Var Graph::add(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  require(A.rows == B.rows && A.cols == B.cols, "add shapes");
  Matrix C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  Var out = push(std::move(C), needs(a) || needs(b));
  if (needs(out))
    nodes_[out.id].back = [this, a, b, out] {
      const Matrix& G = nodes_[out.id].grad;
      for (Var v : {a, b})
        if (needs(v)) {
          Matrix& g = grad_of(v.id);
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += G.data[i];
        }
    };
  return out;
}

Graph::Var Graph::add_row(Var a, Var row) {
  const Matrix& A = val(a.id);
  const Matrix& R = val(row.id);
  require(R.rows == 1 && R.cols == A.cols, "add_row shapes");
  Matrix C = A;
  for (std::size_t i = 0; i < C.rows; ++i)
    for (std::size_t j = 0; j < C.cols; ++j) C(i, j) += R(0, j);
  Var out = push(std::move(C), needs(a) || needs(row));
  if (needs(out))
    nodes_[out.id].back = [this, a, row, out] {
      const Matrix& G = nodes_[out.id].grad;
      if (needs(a)) {
        Matrix& g = grad_of(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += G.data[i];
      }
      if (needs(row)) {
        Matrix& g = grad_of(row.id);
        for (std::size_t i = 0; i < G.rows; ++i)
          for (std::size_t j = 0; j < G.cols; ++j) g(0, j) += G(i, j);
      }
    };
  return out;
}

Graph::Var Graph::mul(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  require(A.rows == B.rows && A.cols == B.cols, "mul shapes");
  Matrix C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  Var out = push(std::move(C), needs(a) || needs(b));
  if (needs(out))
    nodes_[out.id].back = [this, a, b, out] {
      const Matrix& G = nodes_[out.id].grad;
      if (needs(a)) {
        const Matrix& B = val(b.id);
        Matrix& g = grad_of(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += G.data[i] * B.data[i];
      }
      if (needs(b)) {
        const Matrix& A = val(a.id);
        Matrix& g = grad_of(b.id);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += G.data[i] * A.data[i];
      }
    };
  return out;
}

Graph::Var Graph::scale(Var a, double s) {
  Matrix C = val(a.id);
  for (auto& x : C.data) x *= s;
  Var out = push(std::move(C), needs(a));
  if (needs(out))
    nodes_[out.id].back = [this, a, s, out] {
      const Matrix& G = nodes_[out.id].grad;
      Matrix& g = grad_of(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += s * G.data[i];
    };
  return out;
}

Graph::Var Graph::silu(Var a) {
  Matrix C = val(a.id);
  for (auto& x : C.data) x = x / (1.0 + std::exp(-x));
  Var out = push(std::move(C), needs(a));
  if (needs(out))
    nodes_[out.id].back = [this, a, out] {
      const Matrix& X = val(a.id);
      const Matrix& G = nodes_[out.id].grad;
      Matrix& g = grad_of(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-X.data[i]));
        g.data[i] += G.data[i] * sig * (1.0 + X.data[i] * (1.0 - sig));
      }
    };
  return out;
}

Graph::Var Graph::rmsnorm(Var x, Var gain, double eps) {
  const Matrix& X = val(x.id);
  const Matrix& W = val(gain.id);
  require(W.rows == 1 && W.cols == X.cols, "rmsnorm gain shape");
  Matrix Y(X.rows, X.cols);
  std::vector<double> inv(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) {
    double ms = 0.0;
    for (std::size_t c = 0; c < X.cols; ++c) ms += X(r, c) * X(r, c);
    inv[r] = 1.0 / std::sqrt(ms / static_cast<double>(X.cols) + eps);
    for (std::size_t c = 0; c < X.cols; ++c) Y(r, c) = X(r, c) * inv[r] * W(0, c);
  }
  Var out = push(std::move(Y), needs(x) || needs(gain));
  if (needs(out))
    nodes_[out.id].back = [this, x, gain, out, inv = std::move(inv)] {
      const Matrix& X = val(x.id);
      const Matrix& W = val(gain.id);
      const Matrix& G = nodes_[out.id].grad;
      const double n = static_cast<double>(X.cols);
      for (std::size_t r = 0; r < X.rows; ++r) {
        if (needs(gain)) {
          Matrix& gW = grad_of(gain.id);
          for (std::size_t c = 0; c < X.cols; ++c) gW(0, c) += G(r, c) * X(r, c) * inv[r];
        }
        if (needs(x)) {
          Matrix& gX = grad_of(x.id);
          double dot = 0.0;
          for (std::size_t c = 0; c < X.cols; ++c) dot += G(r, c) * W(0, c) * X(r, c);
          const double k = inv[r] * inv[r] * inv[r] * dot / n;
          for (std::size_t c = 0; c < X.cols; ++c) gX(r, c) += inv[r] * G(r, c) * W(0, c) - k * X(r, c);
        }
      }
    };
  return out;
}

Graph::Var Graph::gather(Var table, std::vector<std::size_t> indices) {
  const Matrix& T = val(table.id);
  Matrix Y(indices.size(), T.cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= T.rows) throw CodeOutOfRange("gather index " + std::to_string(indices[r]));
    for (std::size_t c = 0; c < T.cols; ++c) Y(r, c) = T(indices[r], c);
  }
  Var out = push(std::move(Y), needs(table));
  if (needs(out))
    nodes_[out.id].back = [this, table, out, indices = std::move(indices)] {
      const Matrix& G = nodes_[out.id].grad;
      Matrix& g = grad_of(table.id);
      for (std::size_t r = 0; r < indices.size(); ++r)
        for (std::size_t c = 0; c < G.cols; ++c) g(indices[r], c) += G(r, c);
    };
  return out;
}

Graph::Var Graph::select_rows(Var x, std::vector<std::size_t> indices) { return gather(x, std::move(indices)); }

Graph::Var Graph::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const std::size_t cols = val(parts[0].id).cols;
  std::size_t rows = 0;
  bool ng = false;
  for (Var p : parts) {
    require(val(p.id).cols == cols, "concat_rows widths");
    rows += val(p.id).rows;
    ng = ng || needs(p);
  }
  Matrix Y(rows, cols);
  std::size_t at = 0;
  for (Var p : parts) {
    const Matrix& P = val(p.id);
    std::copy(P.data.begin(), P.data.end(), Y.data.begin() + static_cast<std::ptrdiff_t>(at * cols));
    at += P.rows;
  }
  Var out = push(std::move(Y), ng);
  if (needs(out))
    nodes_[out.id].back = [this, out, parts = std::vector<Var>(parts.begin(), parts.end())] {
      const Matrix& G = nodes_[out.id].grad;
      std::size_t at = 0;
      for (Var p : parts) {
        const std::size_t n = val(p.id).size();
        if (needs(p)) {
          Matrix& g = grad_of(p.id);
          for (std::size_t i = 0; i < n; ++i) g.data[i] += G.data[at + i];
        }
        at += n;
      }
    };
  return out;
}

Graph::Var Graph::interleave_rows(std::span<const Var> parts) {
  require(!parts.empty(), "interleave_rows of nothing");
  const Matrix& first = val(parts[0].id);
  const std::size_t P = parts.size();
  bool ng = false;
  for (Var p : parts) {
    require(val(p.id).rows == first.rows && val(p.id).cols == first.cols, "interleave_rows shapes");
    ng = ng || needs(p);
  }
  Matrix Y(first.rows * P, first.cols);
  for (std::size_t p = 0; p < P; ++p) {
    const Matrix& X = val(parts[p].id);
    for (std::size_t r = 0; r < X.rows; ++r)
      for (std::size_t c = 0; c < X.cols; ++c) Y(r * P + p, c) = X(r, c);
  }
  Var out = push(std::move(Y), ng);
  if (needs(out))
    nodes_[out.id].back = [this, out, parts = std::vector<Var>(parts.begin(), parts.end())] {
      const Matrix& G = nodes_[out.id].grad;
      const std::size_t P = parts.size();
      for (std::size_t p = 0; p < P; ++p) {
        if (!needs(parts[p])) continue;
        Matrix& g = grad_of(parts[p].id);
        for (std::size_t r = 0; r < g.rows; ++r)
          for (std::size_t c = 0; c < g.cols; ++c) g(r, c) += G(r * P + p, c);
      }
    };
  return out;
}

Graph::Var Graph::rope(Var x, std::size_t heads, std::vector<std::size_t> positions, double base) {
  const Matrix& X = val(x.id);
  require(positions.size() == X.rows, "rope positions");
  require(heads > 0 && X.cols % heads == 0 && (X.cols / heads) % 2 == 0, "rope head width");
  const std::size_t hd = X.cols / heads;
  auto angle = [hd, base](std::size_t pos, std::size_t i) {
    return static_cast<double>(pos) * std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(hd));
  };
  Matrix Y(X.rows, X.cols);
  for (std::size_t r = 0; r < X.rows; ++r)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < hd / 2; ++i) {
        const double th = angle(positions[r], i);
        const std::size_t c0 = h * hd + 2 * i;
        const double a = X(r, c0), b = X(r, c0 + 1);
        Y(r, c0) = a * std::cos(th) - b * std::sin(th);
        Y(r, c0 + 1) = a * std::sin(th) + b * std::cos(th);
      }
  Var out = push(std::move(Y), needs(x));
  if (needs(out))
    nodes_[out.id].back = [this, x, out, heads, hd, angle, positions = std::move(positions)] {
      const Matrix& G = nodes_[out.id].grad;
      Matrix& g = grad_of(x.id);
      for (std::size_t r = 0; r < G.rows; ++r)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t i = 0; i < hd / 2; ++i) {
            const double th = angle(positions[r], i);
            const std::size_t c0 = h * hd + 2 * i;
            const double ga = G(r, c0), gb = G(r, c0 + 1);
            g(r, c0) += ga * std::cos(th) + gb * std::sin(th);
            g(r, c0 + 1) += -ga * std::sin(th) + gb * std::cos(th);
          }
    };
  return out;
}

Graph::Var Graph::causal_attention(Var q, Var k, Var v, std::size_t heads, std::size_t block) {
  const Matrix& Q = val(q.id);
  const Matrix& K = val(k.id);
  const Matrix& V = val(v.id);
  require(Q.rows == K.rows && K.rows == V.rows && Q.cols == K.cols && K.cols == V.cols, "attention shapes");
  require(heads > 0 && Q.cols % heads == 0, "attention heads");
  require(block > 0 && Q.rows % block == 0, "attention block");
  const std::size_t hd = Q.cols / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const std::size_t R = Q.rows;
  // probs[h][r] holds the attention row of query r for head h (length = position in block + 1).
  std::vector<std::vector<std::vector<double>>> probs(heads, std::vector<std::vector<double>>(R));
  Matrix O(R, Q.cols);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t start = (r / block) * block;
      std::vector<double>& p = probs[h][r];
      p.resize(r - start + 1);
      for (std::size_t s = start; s <= r; ++s) {
        double dot = 0.0;
        for (std::size_t c = 0; c < hd; ++c) dot += Q(r, h * hd + c) * K(s, h * hd + c);
        p[s - start] = dot * inv_sqrt;
      }
      const double lse = log_sum_exp(p);
      for (auto& x : p) x = std::exp(x - lse);
      for (std::size_t s = start; s <= r; ++s)
        for (std::size_t c = 0; c < hd; ++c) O(r, h * hd + c) += p[s - start] * V(s, h * hd + c);
    }
  Var out = push(std::move(O), needs(q) || needs(k) || needs(v));
  if (needs(out))
    nodes_[out.id].back = [this, q, k, v, out, heads, hd, block, inv_sqrt, probs = std::move(probs)] {
      const Matrix& Q = val(q.id);
      const Matrix& K = val(k.id);
      const Matrix& V = val(v.id);
      const Matrix& G = nodes_[out.id].grad;
      Matrix dQ(Q.rows, Q.cols), dK(K.rows, K.cols), dV(V.rows, V.cols);
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t r = 0; r < Q.rows; ++r) {
          const std::size_t start = (r / block) * block;
          const std::vector<double>& p = probs[h][r];
          std::vector<double> dp(p.size());
          double weighted = 0.0;
          for (std::size_t s = start; s <= r; ++s) {
            double acc = 0.0;
            for (std::size_t c = 0; c < hd; ++c) {
              acc += G(r, h * hd + c) * V(s, h * hd + c);
              dV(s, h * hd + c) += p[s - start] * G(r, h * hd + c);
            }
            dp[s - start] = acc;
            weighted += acc * p[s - start];
          }
          for (std::size_t s = start; s <= r; ++s) {
            const double ds = p[s - start] * (dp[s - start] - weighted) * inv_sqrt;
            for (std::size_t c = 0; c < hd; ++c) {
              dQ(r, h * hd + c) += ds * K(s, h * hd + c);
              dK(s, h * hd + c) += ds * Q(r, h * hd + c);
            }
          }
        }
      const std::pair<Var, const Matrix*> pairs[] = {{q, &dQ}, {k, &dK}, {v, &dV}};
      for (const auto& [var, d] : pairs)
        if (needs(var)) {
          Matrix& g = grad_of(var.id);
          for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += d->data[i];
        }
    };
  return out;
}

Graph::Var Graph::cross_entropy(Var logits, std::vector<int> targets) {
  const Matrix& Z = val(logits.id);
  require(targets.size() == Z.rows, "cross_entropy targets");
  Matrix loss(1, 1);
  for (std::size_t r = 0; r < Z.rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= Z.cols)
      throw CodeOutOfRange("target " + std::to_string(targets[r]));
    loss(0, 0) += log_sum_exp(Z.row(r)) - Z(r, static_cast<std::size_t>(targets[r]));
  }
  Var out = push(std::move(loss), needs(logits));
  if (needs(out))
    nodes_[out.id].back = [this, logits, out, targets = std::move(targets)] {
      const Matrix& Z = val(logits.id);
      const double up = nodes_[out.id].grad(0, 0);
      Matrix& g = grad_of(logits.id);
      for (std::size_t r = 0; r < Z.rows; ++r) {
        const double lse = log_sum_exp(Z.row(r));
        for (std::size_t c = 0; c < Z.cols; ++c) g(r, c) += up * std::exp(Z(r, c) - lse);
        g(r, static_cast<std::size_t>(targets[r])) -= up;
      }
    };
  return out;
}

void Graph::backward(Var loss) {
  require(val(loss.id).size() == 1, "backward needs a scalar");
  if (!needs(loss)) return;
  grad_of(loss.id)(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.back) n.back();
    if (n.sink) {
      Node& m = nodes_[i];
      for (std::size_t j = 0; j < m.grad.size(); ++j) m.sink->data[j] += m.grad.data[j];
    }
  }
}

}  // namespace speechrt
