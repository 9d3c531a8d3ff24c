#include "speechrt/refiner.hpp"

#include <cmath>
#include <cstring>

#include "speechrt/errors.hpp"

namespace speechrt {

void RefinerConfig::validate() const {
  if (levels < 2) throw ConfigError("refiner needs at least 2 RVQ levels");
  if (vocab < 2) throw ConfigError("refiner vocabulary needs at least 2 codes");
  if (heads == 0 || width % heads != 0) throw ConfigError("refiner width must be divisible by heads");
}

RefinerWeights RefinerWeights::zeros_like() const {
  RefinerWeights z = *this;
  z.visit("", [](const std::string&, Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });
  return z;
}

namespace {

RefinerWeights init_refiner(const RefinerConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const auto V = static_cast<std::size_t>(cfg.vocab);
  RefinerWeights w;
  w.hidden_proj = random_normal(cfg.backbone_width, cfg.width, 1.0 / std::sqrt(static_cast<double>(cfg.backbone_width)), rng);
  w.coarse_embedding = random_normal(V, cfg.width, 0.5, rng);
  for (std::size_t j = 1; j + 1 < cfg.levels; ++j) w.level_inputs.push_back(random_normal(V, cfg.width, 0.5, rng));
  w.positions = random_normal(cfg.levels - 1, cfg.width, 0.1, rng);
  w.trunk = init_transformer(cfg.shape(), rng);
  for (std::size_t j = 1; j < cfg.levels; ++j) w.heads.push_back(random_normal(cfg.width, V, 0.02, rng));
  return w;
}

}  // namespace

Refiner::Refiner(RefinerConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  w_ = init_refiner(cfg_);
}

Refiner::Refiner(RefinerConfig cfg, RefinerWeights weights) : cfg_(cfg), w_(std::move(weights)) {
  cfg_.validate();
  if (w_.heads.size() != cfg_.levels - 1 || w_.level_inputs.size() != cfg_.levels - 2 ||
      w_.hidden_proj.rows != cfg_.backbone_width || w_.trunk.blocks.size() != cfg_.layers)
    throw ShapeMismatch("refiner weights do not match the configuration");
}

void Refiner::check(const RefineInput& input) const {
  if (input.coarse_code < 0 || input.coarse_code >= cfg_.vocab)
    throw CodeOutOfRange("coarse code " + std::to_string(input.coarse_code));
  if (input.backbone_hidden.size() != cfg_.backbone_width)
    throw DimensionMismatch("backbone hidden has the wrong width");
  if (!all_finite(input.backbone_hidden)) throw DimensionMismatch("backbone hidden is not finite");
}

std::vector<double> Refiner::input_row(const RefineInput& input, std::size_t position, int code) const {
  std::vector<double> row(cfg_.width, 0.0);
  if (position == 0) {
    vec_mat(input.backbone_hidden, w_.hidden_proj, row);
    const auto e = w_.coarse_embedding.row(static_cast<std::size_t>(input.coarse_code));
    for (std::size_t c = 0; c < cfg_.width; ++c) row[c] += e[c];
  } else {
    if (code < 0 || code >= cfg_.vocab) throw CodeOutOfRange("level code " + std::to_string(code));
    const auto e = w_.level_inputs[position - 1].row(static_cast<std::size_t>(code));
    for (std::size_t c = 0; c < cfg_.width; ++c) row[c] = e[c];
  }
  const auto p = w_.positions.row(position);
  for (std::size_t c = 0; c < cfg_.width; ++c) row[c] += p[c];
  return row;
}

std::vector<double> Refiner::head_logits(std::span<const double> hidden, std::size_t level) const {
  std::vector<double> logits(static_cast<std::size_t>(cfg_.vocab));
  vec_mat(hidden, w_.heads[level - 1], logits);
  return logits;
}

std::vector<double> Refiner::level_logits(const RefineInput& input, std::span<const int> prefix,
                                          std::size_t level) const {
  if (level < 1 || level >= cfg_.levels)
    throw LevelOutOfRange("level " + std::to_string(level) + " outside [1, " + std::to_string(cfg_.levels - 1) + "]");
  if (prefix.size() != level - 1) throw ShapeMismatch("level j needs exactly j-1 prefix codes");
  check(input);
  KvCache cache(cfg_.layers, cfg_.width, cfg_.levels - 1);
  std::vector<double> hidden(cfg_.width);
  for (std::size_t pos = 0; pos < level; ++pos)
    transformer_step(w_.trunk, cfg_.shape(), cache, input_row(input, pos, pos == 0 ? 0 : prefix[pos - 1]), hidden);
  return head_logits(hidden, level);
}

AcousticFrame Refiner::refine_frame(const RefineInput& input, const SamplerConfig& sampler) const {
  check(input);
  std::mt19937_64 rng;
  if (!sampler.greedy()) {
    std::uint64_t seed = mix_seed(sampler.seed, static_cast<std::uint64_t>(input.coarse_code));
    for (double h : input.backbone_hidden) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &h, sizeof bits);
      seed = mix_seed(seed, bits);
    }
    rng.seed(seed);
  }
  AcousticFrame frame(cfg_.levels);
  frame[0] = input.coarse_code;
  KvCache cache(cfg_.layers, cfg_.width, cfg_.levels - 1);
  std::vector<double> hidden(cfg_.width);
  transformer_step(w_.trunk, cfg_.shape(), cache, input_row(input, 0, 0), hidden);
  for (std::size_t j = 1; j < cfg_.levels; ++j) {
    frame[j] = sample_logits(head_logits(hidden, j), sampler, rng);
    if (j + 1 < cfg_.levels) transformer_step(w_.trunk, cfg_.shape(), cache, input_row(input, j, frame[j]), hidden);
  }
  return frame;
}

double Refiner::log_prob(const RefineInput& input, const AcousticFrame& frame) const {
  check_frame(frame, cfg_.levels, cfg_.vocab);
  double total = 0.0;
  for (std::size_t j = 1; j < cfg_.levels; ++j) {
    const auto logits = level_logits(input, std::span<const int>(frame.codes).subspan(1, j - 1), j);
    total += logits[static_cast<std::size_t>(frame[j])] - log_sum_exp(logits);
  }
  return total;
}

std::vector<Graph::Var> refiner_graph(Graph& g, const Refiner& refiner, RefinerWeights* grads, Graph::Var hidden,
                                      std::span<const AcousticFrame> frames) {
  const RefinerConfig& cfg = refiner.config();
  const RefinerWeights& w = refiner.weights();
  const std::size_t L = frames.size();
  const std::size_t P = cfg.levels - 1;
  if (g.value(hidden).rows != L) throw ShapeMismatch("one backbone hidden row per frame");
  for (const auto& f : frames) check_frame(f, cfg.levels, cfg.vocab);
  auto param = [&](const Matrix& m, Matrix* gm) { return g.param(m, grads ? gm : nullptr); };

  auto codes_at = [&](std::size_t level) {
    std::vector<std::size_t> ids(L);
    for (std::size_t t = 0; t < L; ++t) ids[t] = static_cast<std::size_t>(frames[t][level]);
    return ids;
  };
  const Graph::Var positions = param(w.positions, grads ? &grads->positions : nullptr);
  std::vector<Graph::Var> parts;
  auto pos_row = [&](std::size_t p) { return g.select_rows(positions, std::vector<std::size_t>{p}); };
  auto first = g.add(g.matmul(hidden, param(w.hidden_proj, grads ? &grads->hidden_proj : nullptr)),
                     g.gather(param(w.coarse_embedding, grads ? &grads->coarse_embedding : nullptr), codes_at(0)));
  parts.push_back(g.add_row(first, pos_row(0)));
  for (std::size_t p = 1; p < P; ++p)
    parts.push_back(g.add_row(
        g.gather(param(w.level_inputs[p - 1], grads ? &grads->level_inputs[p - 1] : nullptr), codes_at(p)),
        pos_row(p)));

  const Graph::Var x = g.interleave_rows(parts);
  const Graph::Var out = transformer_graph(g, w.trunk, grads ? &grads->trunk : nullptr, cfg.shape(), x, P);
  std::vector<Graph::Var> logits;
  for (std::size_t j = 1; j <= P; ++j) {
    std::vector<std::size_t> rows(L);
    for (std::size_t t = 0; t < L; ++t) rows[t] = t * P + (j - 1);
    logits.push_back(g.matmul(g.select_rows(out, rows), param(w.heads[j - 1], grads ? &grads->heads[j - 1] : nullptr)));
  }
  return logits;
}

}  // namespace speechrt
