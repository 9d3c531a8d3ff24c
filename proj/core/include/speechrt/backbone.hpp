#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "speechrt/channel.hpp"
#include "speechrt/graph.hpp"
#include "speechrt/nn.hpp"
#include "speechrt/reasoner.hpp"
#include "speechrt/sampler.hpp"
#include "speechrt/tokens.hpp"

namespace speechrt {

struct BackboneConfig {
  std::size_t width = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
  int vocab = 256;  // last id is the end-of-audio code
  std::size_t levels = 8;
  int text_vocab = 64;
  std::size_t context_limit = 2048;
  std::uint64_t seed = 1;
  ArithmeticMode mode = ArithmeticMode::deterministic;

  int end_code() const noexcept { return vocab - 1; }
  TransformerShape shape() const { return {width, layers, heads, mlp_hidden}; }
  void validate() const;
};

struct BackboneWeights {
  std::vector<Matrix> code_embeddings;  // one V x d table per RVQ level
  Matrix text_embeddings;               // V_text x d, for reference text and pad items
  Matrix text_bias;                     // 1 x d
  Matrix code_bias;                     // 1 x d
  Matrix speaker_proj;                  // d x d
  TransformerWeights trunk;
  Matrix head;       // d x V
  Matrix head_bias;  // 1 x V

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t j = 0; j < code_embeddings.size(); ++j)
      f(prefix + "code_emb." + std::to_string(j), code_embeddings[j]);
    f(prefix + "text_emb", text_embeddings);
    f(prefix + "text_bias", text_bias);
    f(prefix + "code_bias", code_bias);
    f(prefix + "speaker_proj", speaker_proj);
    trunk.visit(prefix + "trunk.", f);
    f(prefix + "head", head);
    f(prefix + "head_bias", head_bias);
  }

  BackboneWeights zeros_like() const;
};

struct ConditioningPrefix {
  std::vector<AcousticFrame> ref_audio;
  std::vector<TextToken> ref_text;
  std::vector<double> speaker;  // length d; empty means no speaker position

  std::size_t length() const noexcept { return (speaker.empty() ? 0 : 1) + ref_text.size() + ref_audio.size(); }
};

struct BackboneStepOutput {
  std::vector<double> logits;  // V
  std::vector<double> hidden;  // d
};

// A text position carries its reasoner embedding and hidden-state rows.
struct TextRows {
  std::span<const double> embedding;
  std::span<const double> hidden;
};
using BackboneInput = std::variant<TextRows, CoarseCode>;

class Backbone {
 public:
  explicit Backbone(BackboneConfig cfg);
  Backbone(BackboneConfig cfg, BackboneWeights weights);

  const BackboneConfig& config() const noexcept { return cfg_; }
  const BackboneWeights& weights() const noexcept { return w_; }
  BackboneWeights& weights() noexcept { return w_; }

  // Text: embedding + hidden + text bias. Code: level-0 lookup + code bias.
  std::vector<double> embed_item(const BackboneInput& item) const;
  std::vector<double> embed_text_token(const TextToken& t) const;
  std::vector<double> embed_reference_frame(const AcousticFrame& frame) const;
  std::vector<double> embed_speaker(std::span<const double> speaker) const;
  Matrix embed_prefix(const ConditioningPrefix& prefix) const;

  KvCache new_cache() const;
  // Throws ContextOverflow when the prefix does not fit.
  KvCache prefill(const ConditioningPrefix& prefix) const;
  BackboneStepOutput step(KvCache& cache, std::span<const double> input) const;
  // Uncached pass over a full input sequence.
  std::vector<BackboneStepOutput> forward_full(const Matrix& inputs) const;

  BackboneStepOutput readout(std::span<const double> hidden) const;

 private:
  BackboneConfig cfg_;
  BackboneWeights w_;
};

struct StreamOptions {
  SamplerConfig sampler;
  std::size_t frame_cap = 1000;  // 20 s at 50 frames/s; the schedule needs about 1.5 positions per frame
  // End-of-audio is masked until this many frames have been emitted.
  std::size_t min_frames = 0;
};

struct CoarseStep {
  std::size_t frame = 0;
  int code = 0;
  std::vector<double> hidden;
};

// Incremental coarse-code generation under the 1:2 schedule: one text item is
// consumed before every pair of codes, pad items once the reasoner output is
// exhausted. Stops on the end-of-audio code or at the frame cap.
class CoarseStream {
 public:
  CoarseStream(const Backbone& backbone, const ConditioningPrefix& prefix, const ReasonerOutput& reasoner,
               StreamOptions options);

  std::optional<CoarseStep> next();

  bool finished() const noexcept { return finished_; }
  bool capped() const noexcept { return capped_; }
  std::size_t frames() const noexcept { return frames_; }
  const InterleavedSequence& schedule() const noexcept { return schedule_; }
  const KvCache& cache() const noexcept { return cache_; }

 private:
  BackboneStepOutput feed_text();

  const Backbone& backbone_;
  const ReasonerOutput& reasoner_;
  StreamOptions options_;
  TextVocab vocab_;
  KvCache cache_;
  std::mt19937_64 rng_;
  std::vector<double> zeros_;
  std::optional<BackboneStepOutput> pending_;
  std::size_t text_consumed_ = 0;
  std::size_t frames_ = 0;
  bool finished_ = false;
  bool capped_ = false;
  InterleavedSequence schedule_;
};

struct StreamSummary {
  std::size_t frames = 0;
  bool capped = false;
  InterleavedSequence schedule;
};

// Producer side of a streaming session: pushes every coarse step into `out`
// (blocking while the consumer lags by more than the channel capacity) and
// closes it when generation ends.
StreamSummary generate_stream(const Backbone& backbone, const ConditioningPrefix& prefix,
                              const ReasonerOutput& reasoner, const StreamOptions& options,
                              BoundedChannel<CoarseStep>& out);

// Teacher-forced differentiable pass. Returns logits (L x V) for each target code
// and the hidden rows (L x d) that produced them.
struct BackboneGraphOutput {
  Graph::Var logits;
  Graph::Var hidden;
};
BackboneGraphOutput backbone_graph(Graph& g, const Backbone& backbone, BackboneWeights* grads,
                                   const ConditioningPrefix& prefix, const ReasonerOutput& reasoner,
                                   std::span<const int> coarse_codes);

}  // namespace speechrt
