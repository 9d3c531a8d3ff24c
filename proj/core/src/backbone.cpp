#include "speechrt/backbone.hpp"

#include <cmath>
#include <limits>

#include "speechrt/errors.hpp"

namespace speechrt {

void BackboneConfig::validate() const {
  if (heads == 0 || width % heads != 0) throw ConfigError("backbone width must be divisible by heads");
  if (vocab < 2) throw ConfigError("backbone vocabulary needs at least 2 codes");
  if (context_limit < 1) throw ConfigError("context limit must be positive");
  if (levels < 1) throw ConfigError("backbone needs at least one RVQ level");
}

BackboneWeights BackboneWeights::zeros_like() const {
  BackboneWeights z = *this;
  z.visit("", [](const std::string&, Matrix& m) { std::fill(m.data.begin(), m.data.end(), 0.0); });
  return z;
}

namespace {

BackboneWeights init_backbone(const BackboneConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const auto V = static_cast<std::size_t>(cfg.vocab);
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.width));
  BackboneWeights w;
  for (std::size_t j = 0; j < cfg.levels; ++j) w.code_embeddings.push_back(random_normal(V, cfg.width, 0.5, rng));
  w.text_embeddings = random_normal(static_cast<std::size_t>(cfg.text_vocab), cfg.width, 0.5, rng);
  w.text_bias = random_normal(1, cfg.width, 0.1, rng);
  w.code_bias = random_normal(1, cfg.width, 0.1, rng);
  w.speaker_proj = random_normal(cfg.width, cfg.width, s, rng);
  w.trunk = init_transformer(cfg.shape(), rng);
  w.head = random_normal(cfg.width, V, 0.02, rng);
  w.head_bias = Matrix(1, V);
  return w;
}

void add_into(std::vector<double>& acc, std::span<const double> v) {
  for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += v[c];
}

}  // namespace

Backbone::Backbone(BackboneConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  w_ = init_backbone(cfg_);
}

Backbone::Backbone(BackboneConfig cfg, BackboneWeights weights) : cfg_(cfg), w_(std::move(weights)) {
  cfg_.validate();
  if (w_.code_embeddings.size() != cfg_.levels || w_.head.rows != cfg_.width ||
      w_.head.cols != static_cast<std::size_t>(cfg_.vocab) || w_.trunk.blocks.size() != cfg_.layers)
    throw ShapeMismatch("backbone weights do not match the configuration");
}

std::vector<double> Backbone::embed_item(const BackboneInput& item) const {
  std::vector<double> out(cfg_.width, 0.0);
  if (const auto* text = std::get_if<TextRows>(&item)) {
    if (text->embedding.size() != cfg_.width || text->hidden.size() != cfg_.width)
      throw DimensionMismatch("text rows must have the backbone width");
    for (std::size_t c = 0; c < cfg_.width; ++c)
      out[c] = text->embedding[c] + text->hidden[c] + w_.text_bias.data[c];
    return out;
  }
  const int code = std::get<CoarseCode>(item).value;
  if (code < 0 || code >= cfg_.vocab) throw CodeOutOfRange("coarse code " + std::to_string(code));
  const auto row = w_.code_embeddings[0].row(static_cast<std::size_t>(code));
  for (std::size_t c = 0; c < cfg_.width; ++c) out[c] = row[c] + w_.code_bias.data[c];
  return out;
}

std::vector<double> Backbone::embed_text_token(const TextToken& t) const {
  if (t.id < 0 || t.id >= cfg_.text_vocab) throw CodeOutOfRange("text token " + std::to_string(t.id));
  const std::vector<double> zeros(cfg_.width, 0.0);
  return embed_item(TextRows{w_.text_embeddings.row(static_cast<std::size_t>(t.id)), zeros});
}

std::vector<double> Backbone::embed_reference_frame(const AcousticFrame& frame) const {
  check_frame(frame, cfg_.levels, cfg_.vocab);
  std::vector<double> out(w_.code_bias.data.begin(), w_.code_bias.data.end());
  for (std::size_t j = 0; j < cfg_.levels; ++j)
    add_into(out, w_.code_embeddings[j].row(static_cast<std::size_t>(frame[j])));
  return out;
}

std::vector<double> Backbone::embed_speaker(std::span<const double> speaker) const {
  if (speaker.size() != cfg_.width) throw DimensionMismatch("speaker embedding must have the backbone width");
  if (!all_finite(speaker)) throw DimensionMismatch("speaker embedding is not finite");
  std::vector<double> out(cfg_.width);
  vec_mat(speaker, w_.speaker_proj, out);
  return out;
}

Matrix Backbone::embed_prefix(const ConditioningPrefix& prefix) const {
  Matrix rows(prefix.length(), cfg_.width);
  std::size_t r = 0;
  auto put = [&](const std::vector<double>& v) { std::copy(v.begin(), v.end(), rows.row(r++).begin()); };
  if (!prefix.speaker.empty()) put(embed_speaker(prefix.speaker));
  for (const auto& t : prefix.ref_text) put(embed_text_token(t));
  for (const auto& f : prefix.ref_audio) put(embed_reference_frame(f));
  return rows;
}

KvCache Backbone::new_cache() const { return KvCache(cfg_.layers, cfg_.width, cfg_.context_limit); }

KvCache Backbone::prefill(const ConditioningPrefix& prefix) const {
  if (prefix.length() > cfg_.context_limit)
    throw ContextOverflow("prefix of " + std::to_string(prefix.length()) + " positions exceeds " +
                          std::to_string(cfg_.context_limit));
  KvCache cache = new_cache();
  if (prefix.length() == 0) return cache;
  transformer_forward(w_.trunk, cfg_.shape(), embed_prefix(prefix), cfg_.mode, &cache);
  return cache;
}

BackboneStepOutput Backbone::readout(std::span<const double> hidden) const {
  BackboneStepOutput out;
  out.hidden.assign(hidden.begin(), hidden.end());
  out.logits.resize(static_cast<std::size_t>(cfg_.vocab));
  vec_mat(hidden, w_.head, out.logits);
  for (std::size_t v = 0; v < out.logits.size(); ++v) out.logits[v] += w_.head_bias.data[v];
  return out;
}

BackboneStepOutput Backbone::step(KvCache& cache, std::span<const double> input) const {
  if (input.size() != cfg_.width) throw DimensionMismatch("step input must have the backbone width");
  std::vector<double> hidden(cfg_.width);
  transformer_step(w_.trunk, cfg_.shape(), cache, input, hidden);
  return readout(hidden);
}

std::vector<BackboneStepOutput> Backbone::forward_full(const Matrix& inputs) const {
  if (inputs.rows > cfg_.context_limit) throw ContextOverflow("sequence longer than the context limit");
  if (inputs.cols != cfg_.width) throw DimensionMismatch("inputs must have the backbone width");
  const Matrix hidden = transformer_forward(w_.trunk, cfg_.shape(), inputs, cfg_.mode);
  std::vector<BackboneStepOutput> out;
  out.reserve(inputs.rows);
  for (std::size_t r = 0; r < inputs.rows; ++r) out.push_back(readout(hidden.row(r)));
  return out;
}

CoarseStream::CoarseStream(const Backbone& backbone, const ConditioningPrefix& prefix,
                           const ReasonerOutput& reasoner, StreamOptions options)
    : backbone_(backbone),
      reasoner_(reasoner),
      options_(options),
      vocab_(backbone.config().text_vocab),
      cache_(backbone.prefill(prefix)),
      rng_(options.sampler.seed),
      zeros_(backbone.config().width, 0.0) {
  if (reasoner.length() == 0) throw EmptyInput("reasoner output is empty");
  if (reasoner.text_embeddings.cols != backbone.config().width)
    throw DimensionMismatch("reasoner width differs from the backbone width");
}

BackboneStepOutput CoarseStream::feed_text() {
  std::vector<double> row;
  if (text_consumed_ < reasoner_.length()) {
    schedule_.items.emplace_back(reasoner_.text_tokens[text_consumed_]);
    row = backbone_.embed_item(TextRows{reasoner_.text_embeddings.row(text_consumed_),
                                        reasoner_.hidden_states.row(text_consumed_)});
  } else {
    schedule_.items.emplace_back(vocab_.pad());
    row = backbone_.embed_text_token(vocab_.pad());
  }
  ++text_consumed_;
  return backbone_.step(cache_, row);
}

std::optional<CoarseStep> CoarseStream::next() {
  if (finished_) return std::nullopt;
  if (frames_ >= options_.frame_cap) {
    finished_ = capped_ = true;
    return std::nullopt;
  }
  BackboneStepOutput out;
  if (pending_) {
    // Output of the previously emitted code: it predicts the second code of a
    // pair, or is discarded when the next position belongs to a text item.
    out = std::move(*pending_);
    pending_.reset();
  }
  if (frames_ % kCodesPerText == 0) out = feed_text();

  if (frames_ < options_.min_frames) out.logits[static_cast<std::size_t>(backbone_.config().end_code())] =
      -std::numeric_limits<double>::infinity();
  const int code = sample_logits(out.logits, options_.sampler, rng_);
  if (code == backbone_.config().end_code()) {
    finished_ = true;
    return std::nullopt;
  }
  schedule_.items.emplace_back(CoarseCode{code});
  CoarseStep emitted{frames_, code, std::move(out.hidden)};
  ++frames_;
  if (frames_ < options_.frame_cap) pending_ = backbone_.step(cache_, backbone_.embed_item(CoarseCode{code}));
  return emitted;
}

StreamSummary generate_stream(const Backbone& backbone, const ConditioningPrefix& prefix,
                              const ReasonerOutput& reasoner, const StreamOptions& options,
                              BoundedChannel<CoarseStep>& out) {
  StreamSummary summary;
  try {
    CoarseStream stream(backbone, prefix, reasoner, options);
    while (auto step = stream.next())
      if (!out.push(std::move(*step))) break;
    summary.frames = stream.frames();
    summary.capped = stream.capped();
    summary.schedule = stream.schedule();
  } catch (...) {
    out.close();
    throw;
  }
  out.close();
  return summary;
}

BackboneGraphOutput backbone_graph(Graph& g, const Backbone& backbone, BackboneWeights* grads,
                                   const ConditioningPrefix& prefix, const ReasonerOutput& reasoner,
                                   std::span<const int> coarse_codes) {
  const BackboneConfig& cfg = backbone.config();
  const BackboneWeights& w = backbone.weights();
  const std::size_t d = cfg.width;
  const TextVocab vocab(cfg.text_vocab);
  auto P = [&](const Matrix& m, Matrix* gm) { return g.param(m, grads ? gm : nullptr); };
  auto G = [&](auto member) -> Matrix* { return grads ? &(grads->*member) : nullptr; };

  std::vector<TextToken> text = reasoner.text_tokens;
  const InterleavedSequence seq = interleave_stream(text, coarse_codes, vocab);

  std::vector<Graph::Var> parts;
  std::size_t rows = 0;
  if (!prefix.speaker.empty()) {
    if (prefix.speaker.size() != d) throw DimensionMismatch("speaker embedding must have the backbone width");
    Matrix s(1, d);
    s.data = prefix.speaker;
    parts.push_back(g.matmul(g.constant(std::move(s)), P(w.speaker_proj, G(&BackboneWeights::speaker_proj))));
    rows += 1;
  }
  const Graph::Var text_bias = P(w.text_bias, G(&BackboneWeights::text_bias));
  const Graph::Var code_bias = P(w.code_bias, G(&BackboneWeights::code_bias));
  const Graph::Var text_table = P(w.text_embeddings, G(&BackboneWeights::text_embeddings));
  std::vector<Graph::Var> code_tables;
  for (std::size_t j = 0; j < cfg.levels; ++j)
    code_tables.push_back(P(w.code_embeddings[j], grads ? &grads->code_embeddings[j] : nullptr));

  if (!prefix.ref_text.empty()) {
    std::vector<std::size_t> ids;
    for (const auto& t : prefix.ref_text) ids.push_back(static_cast<std::size_t>(t.id));
    parts.push_back(g.add_row(g.gather(text_table, ids), text_bias));
    rows += ids.size();
  }
  if (!prefix.ref_audio.empty()) {
    Graph::Var acc{};
    for (std::size_t j = 0; j < cfg.levels; ++j) {
      std::vector<std::size_t> ids;
      for (const auto& f : prefix.ref_audio) {
        check_frame(f, cfg.levels, cfg.vocab);
        ids.push_back(static_cast<std::size_t>(f[j]));
      }
      auto level = g.gather(code_tables[j], ids);
      acc = j == 0 ? level : g.add(acc, level);
    }
    parts.push_back(g.add_row(acc, code_bias));
    rows += prefix.ref_audio.size();
  }
  const std::size_t prefix_rows = rows;

  // Row order inside the concatenation: prefix | reasoner text | pad text | codes.
  std::size_t n_reasoner = 0, n_pad = 0;
  for (const auto& item : seq.items)
    if (std::holds_alternative<TextToken>(item)) (n_reasoner < reasoner.length() ? n_reasoner : n_pad)++;
  if (n_reasoner > 0) {
    Matrix eh(n_reasoner, d);
    for (std::size_t r = 0; r < n_reasoner; ++r)
      for (std::size_t c = 0; c < d; ++c)
        eh(r, c) = reasoner.text_embeddings(r, c) + reasoner.hidden_states(r, c);
    parts.push_back(g.add_row(g.constant(std::move(eh)), text_bias));
  }
  if (n_pad > 0)
    parts.push_back(g.add_row(g.gather(text_table, std::vector<std::size_t>(n_pad, static_cast<std::size_t>(vocab.pad_id()))),
                              text_bias));
  std::vector<std::size_t> code_ids;
  for (int c : coarse_codes) {
    if (c < 0 || c >= cfg.vocab) throw CodeOutOfRange("coarse code " + std::to_string(c));
    code_ids.push_back(static_cast<std::size_t>(c));
  }
  parts.push_back(g.add_row(g.gather(code_tables[0], code_ids), code_bias));

  std::vector<std::size_t> order(prefix_rows);
  for (std::size_t r = 0; r < prefix_rows; ++r) order[r] = r;
  std::size_t next_text = prefix_rows, next_pad = prefix_rows + n_reasoner, next_code = prefix_rows + n_reasoner + n_pad;
  std::size_t texts_seen = 0;
  std::vector<std::size_t> predicting;  // sequence position whose output predicts each code
  for (const auto& item : seq.items) {
    if (std::holds_alternative<TextToken>(item)) {
      order.push_back(texts_seen++ < n_reasoner ? next_text++ : next_pad++);
    } else {
      predicting.push_back(order.size() - 1);
      order.push_back(next_code++);
    }
  }
  if (order.size() > cfg.context_limit) throw ContextOverflow("training sequence exceeds the context limit");

  const Graph::Var x = g.select_rows(g.concat_rows(parts), order);
  const Graph::Var hidden_all = transformer_graph(g, w.trunk, grads ? &grads->trunk : nullptr, cfg.shape(), x, order.size());
  const Graph::Var hidden = g.select_rows(hidden_all, predicting);
  const Graph::Var logits = g.add_row(g.matmul(hidden, P(w.head, G(&BackboneWeights::head))),
                                      P(w.head_bias, G(&BackboneWeights::head_bias)));
  return {logits, hidden};
}

}  // namespace speechrt
