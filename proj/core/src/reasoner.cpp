#include "speechrt/reasoner.hpp"

#include <cmath>

#include "speechrt/errors.hpp"
#include "speechrt/sampler.hpp"

namespace speechrt {

ReasonerStub::ReasonerStub(StubConfig cfg) : cfg_(cfg), vocab_(cfg.text_vocab) {
  if (cfg.width == 0) throw ConfigError("reasoner width must be positive");
  std::mt19937_64 rng(cfg.seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  table_ = random_normal(static_cast<std::size_t>(cfg.text_vocab), cfg.width, 1.0, rng);
  w_mean_ = random_normal(cfg.width, cfg.width, s, rng);
  w_self_ = random_normal(cfg.width, cfg.width, s, rng);
  bias_ = random_normal(1, cfg.width, 0.1, rng);
}

std::vector<TextToken> ReasonerStub::respond(std::span<const TextToken> input) const {
  const int content = vocab_.size() - 2;
  std::vector<TextToken> out;
  for (const TextToken& t : input) {
    if (t.is_pad || t.is_eos) continue;
    int id = 2 + static_cast<int>((static_cast<long>(t.id) * 31 + 17) % content);
    if (id == vocab_.pad_id() || id == vocab_.eos_id()) id = 2;
    out.push_back(vocab_.token(id));
  }
  out.push_back(vocab_.eos());
  return out;
}

ReasonerOutput ReasonerStub::reason(std::span<const TextToken> input, const Matrix* features) const {
  if (input.empty()) throw EmptyInput("reasoner needs at least one input token");
  ReasonerOutput out;
  out.text_tokens = respond(input);
  const std::size_t T = out.text_tokens.size();
  const std::size_t d = cfg_.width;

  std::vector<double> feature_term(d, 0.0);
  if (features && features->rows > 0) {
    std::mt19937_64 frng(mix_seed(cfg_.seed, features->cols));
    const Matrix w_feat = random_normal(features->cols, d, 1.0 / std::sqrt(static_cast<double>(features->cols)), frng);
    std::vector<double> mean(features->cols, 0.0);
    for (std::size_t r = 0; r < features->rows; ++r)
      for (std::size_t c = 0; c < features->cols; ++c) mean[c] += (*features)(r, c) / static_cast<double>(features->rows);
    vec_mat(mean, w_feat, feature_term);
  }

  out.text_embeddings = Matrix(T, d);
  out.hidden_states = Matrix(T, d);
  std::vector<double> running(d, 0.0), mean(d), a(d), b(d);
  for (std::size_t t = 0; t < T; ++t) {
    const auto e = table_.row(static_cast<std::size_t>(out.text_tokens[t].id));
    std::copy(e.begin(), e.end(), out.text_embeddings.row(t).begin());
    for (std::size_t c = 0; c < d; ++c) {
      running[c] += e[c];
      mean[c] = running[c] / static_cast<double>(t + 1);
    }
    vec_mat(mean, w_mean_, a);
    vec_mat(e, w_self_, b);
    auto h = out.hidden_states.row(t);
    for (std::size_t c = 0; c < d; ++c) h[c] = std::tanh(a[c] + b[c] + bias_.data[c] + feature_term[c]);
  }
  return out;
}

}  // namespace speechrt
