#include "speechrt/nn.hpp"

#include <cmath>

#include "speechrt/errors.hpp"

namespace speechrt {

TransformerWeights init_transformer(const TransformerShape& s, std::mt19937_64& rng) {
  if (s.heads == 0 || s.width % s.heads != 0) throw ConfigError("width must be divisible by heads");
  if ((s.width / s.heads) % 2 != 0) throw ConfigError("head width must be even for rotary positions");
  const double in_std = 1.0 / std::sqrt(static_cast<double>(s.width));
  const double out_std = in_std / std::sqrt(2.0 * static_cast<double>(s.layers));
  const double down_std = 1.0 / std::sqrt(static_cast<double>(s.mlp_hidden)) / std::sqrt(2.0 * static_cast<double>(s.layers));
  TransformerWeights w;
  for (std::size_t l = 0; l < s.layers; ++l) {
    BlockWeights b;
    b.attn_norm = Matrix(1, s.width, 1.0);
    b.wq = random_normal(s.width, s.width, in_std, rng);
    b.wk = random_normal(s.width, s.width, in_std, rng);
    b.wv = random_normal(s.width, s.width, in_std, rng);
    b.wo = random_normal(s.width, s.width, out_std, rng);
    b.mlp_norm = Matrix(1, s.width, 1.0);
    b.w_gate = random_normal(s.width, s.mlp_hidden, in_std, rng);
    b.w_up = random_normal(s.width, s.mlp_hidden, in_std, rng);
    b.w_down = random_normal(s.mlp_hidden, s.width, down_std, rng);
    w.blocks.push_back(std::move(b));
  }
  w.final_norm = Matrix(1, s.width, 1.0);
  return w;
}

KvCache::KvCache(std::size_t layers, std::size_t width, std::size_t limit)
    : width_(width), limit_(limit), keys_(layers), values_(layers) {
  for (std::size_t l = 0; l < layers; ++l) {
    keys_[l].reserve(std::min<std::size_t>(limit, 256) * width);
    values_[l].reserve(std::min<std::size_t>(limit, 256) * width);
  }
}

void KvCache::put(std::size_t layer, std::span<const double> k, std::span<const double> v) {
  auto& ks = keys_[layer];
  auto& vs = values_[layer];
  if (ks.size() / width_ >= limit_) throw ContextOverflow("cache holds " + std::to_string(limit_) + " positions");
  ks.insert(ks.end(), k.begin(), k.end());
  vs.insert(vs.end(), v.begin(), v.end());
}

void KvCache::commit() { ++length_; }

void rmsnorm_row(std::span<const double> x, const Matrix& gain, std::span<double> out, double eps) {
  double ms = 0.0;
  for (double v : x) ms += v * v;
  const double inv = 1.0 / std::sqrt(ms / static_cast<double>(x.size()) + eps);
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = x[c] * inv * gain.data[c];
}

void rope_row(std::span<double> x, std::size_t heads, std::size_t position, double base) {
  const std::size_t hd = x.size() / heads;
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < hd / 2; ++i) {
      const double th =
          static_cast<double>(position) * std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(hd));
      const std::size_t c0 = h * hd + 2 * i;
      const double a = x[c0], b = x[c0 + 1];
      x[c0] = a * std::cos(th) - b * std::sin(th);
      x[c0 + 1] = a * std::sin(th) + b * std::cos(th);
    }
}

namespace {

// Attention of one query over keys/values [0, count).
void attend_row(std::span<const double> q, std::span<const double> keys, std::span<const double> values,
                std::size_t count, std::size_t heads, std::span<double> out) {
  const std::size_t width = q.size();
  const std::size_t hd = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> scores(count);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t s = 0; s < count; ++s) {
      double dot = 0.0;
      for (std::size_t c = 0; c < hd; ++c) dot += q[h * hd + c] * keys[s * width + h * hd + c];
      scores[s] = dot * inv_sqrt;
    }
    const double lse = log_sum_exp(scores);
    for (std::size_t c = 0; c < hd; ++c) out[h * hd + c] = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      const double p = std::exp(scores[s] - lse);
      for (std::size_t c = 0; c < hd; ++c) out[h * hd + c] += p * values[s * width + h * hd + c];
    }
  }
}

void project(std::span<const double> x, const Matrix& w, std::span<double> out, ArithmeticMode mode) {
  if (mode == ArithmeticMode::fast)
    vec_mat_lanes(x, w, out);
  else
    vec_mat(x, w, out);
}

void mlp_row(const BlockWeights& b, std::span<double> x, std::size_t hidden, ArithmeticMode mode) {
  const std::size_t width = x.size();
  std::vector<double> xn(width), gate(hidden), up(hidden), down(width);
  rmsnorm_row(x, b.mlp_norm, xn);
  project(xn, b.w_gate, gate, mode);
  project(xn, b.w_up, up, mode);
  for (std::size_t i = 0; i < hidden; ++i) gate[i] = gate[i] / (1.0 + std::exp(-gate[i])) * up[i];
  project(gate, b.w_down, down, mode);
  for (std::size_t c = 0; c < width; ++c) x[c] += down[c];
}

}  // namespace

void transformer_step(const TransformerWeights& w, const TransformerShape& s, KvCache& cache,
                      std::span<const double> input, std::span<double> hidden) {
  if (cache.full()) throw ContextOverflow("cannot step past " + std::to_string(cache.limit()) + " positions");
  const std::size_t pos = cache.length();
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> xn(s.width), q(s.width), k(s.width), v(s.width), att(s.width), o(s.width);
  for (std::size_t l = 0; l < s.layers; ++l) {
    const BlockWeights& b = w.blocks[l];
    rmsnorm_row(x, b.attn_norm, xn);
    vec_mat(xn, b.wq, q);
    vec_mat(xn, b.wk, k);
    vec_mat(xn, b.wv, v);
    rope_row(q, s.heads, pos);
    rope_row(k, s.heads, pos);
    cache.put(l, k, v);
    const std::size_t count = pos + 1;
    // put() extended storage but length() still excludes this position.
    attend_row(q, {cache.keys(l).data(), count * s.width}, {cache.values(l).data(), count * s.width}, count,
               s.heads, att);
    vec_mat(att, b.wo, o);
    for (std::size_t c = 0; c < s.width; ++c) x[c] += o[c];
    mlp_row(b, x, s.mlp_hidden, ArithmeticMode::deterministic);
  }
  cache.commit();
  rmsnorm_row(x, w.final_norm, hidden);
}

Matrix transformer_forward(const TransformerWeights& w, const TransformerShape& s, const Matrix& inputs,
                           ArithmeticMode mode, KvCache* fill) {
  const std::size_t n = inputs.rows;
  if (fill && fill->length() + n > fill->limit())
    throw ContextOverflow(std::to_string(n) + " rows exceed the cache limit");
  Matrix x = inputs;
  Matrix keys(n, s.width), values(n, s.width);
  std::vector<double> xn(s.width), q(s.width), att(s.width), o(s.width);
  for (std::size_t l = 0; l < s.layers; ++l) {
    const BlockWeights& b = w.blocks[l];
    Matrix queries(n, s.width);
    for (std::size_t r = 0; r < n; ++r) {
      rmsnorm_row(x.row(r), b.attn_norm, xn);
      project(xn, b.wq, queries.row(r), mode);
      project(xn, b.wk, keys.row(r), mode);
      project(xn, b.wv, values.row(r), mode);
      rope_row(queries.row(r), s.heads, r);
      rope_row(keys.row(r), s.heads, r);
    }
    for (std::size_t r = 0; r < n; ++r) {
      attend_row(queries.row(r), keys.data, values.data, r + 1, s.heads, att);
      project(att, b.wo, o, mode);
      auto xr = x.row(r);
      for (std::size_t c = 0; c < s.width; ++c) xr[c] += o[c];
      mlp_row(b, xr, s.mlp_hidden, mode);
    }
    if (fill)
      for (std::size_t r = 0; r < n; ++r) fill->put(l, keys.row(r), values.row(r));
  }
  if (fill)
    for (std::size_t r = 0; r < n; ++r) fill->commit();
  Matrix hidden(n, s.width);
  for (std::size_t r = 0; r < n; ++r) rmsnorm_row(x.row(r), w.final_norm, hidden.row(r));
  return hidden;
}

Graph::Var transformer_graph(Graph& g, const TransformerWeights& w, TransformerWeights* grads,
                             const TransformerShape& s, Graph::Var x, std::size_t block) {
  const std::size_t rows = g.value(x).rows;
  std::vector<std::size_t> positions(rows);
  for (std::size_t r = 0; r < rows; ++r) positions[r] = r % block;
  auto P = [&](const Matrix& m, Matrix* gm) { return g.param(m, grads ? gm : nullptr); };
  for (std::size_t l = 0; l < s.layers; ++l) {
    const BlockWeights& b = w.blocks[l];
    BlockWeights* gb = grads ? &grads->blocks[l] : nullptr;
    auto xn = g.rmsnorm(x, P(b.attn_norm, gb ? &gb->attn_norm : nullptr));
    auto q = g.rope(g.matmul(xn, P(b.wq, gb ? &gb->wq : nullptr)), s.heads, positions);
    auto k = g.rope(g.matmul(xn, P(b.wk, gb ? &gb->wk : nullptr)), s.heads, positions);
    auto v = g.matmul(xn, P(b.wv, gb ? &gb->wv : nullptr));
    auto att = g.causal_attention(q, k, v, s.heads, block);
    x = g.add(x, g.matmul(att, P(b.wo, gb ? &gb->wo : nullptr)));
    auto hn = g.rmsnorm(x, P(b.mlp_norm, gb ? &gb->mlp_norm : nullptr));
    auto gate = g.silu(g.matmul(hn, P(b.w_gate, gb ? &gb->w_gate : nullptr)));
    auto up = g.matmul(hn, P(b.w_up, gb ? &gb->w_up : nullptr));
    x = g.add(x, g.matmul(g.mul(gate, up), P(b.w_down, gb ? &gb->w_down : nullptr)));
  }
  return g.rmsnorm(x, P(w.final_norm, grads ? &grads->final_norm : nullptr));
}

}  // namespace speechrt
