#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "speechrt/backbone.hpp"
#include "speechrt/codec.hpp"
#include "speechrt/config.hpp"
#include "speechrt/latency.hpp"
#include "speechrt/reasoner.hpp"
#include "speechrt/refiner.hpp"
#include "speechrt/synthetic.hpp"

namespace speechrt {

// Reasoner stub, backbone, refiner and codec built from one RuntimeConfig.
// The codec is fitted on a synthetic feature pool at construction; the two
// transformers start from their seeded initialisation unless loaded.
class Pipeline {
 public:
  explicit Pipeline(RuntimeConfig cfg);
  // Throws FormatError or ShapeMismatch when the file does not fit the config.
  Pipeline(RuntimeConfig cfg, const std::filesystem::path& weights);

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void save(const std::filesystem::path& weights) const;

  const RuntimeConfig& config() const noexcept { return cfg_; }
  const ReasonerStub& reasoner() const noexcept { return reasoner_; }
  const Backbone& backbone() const noexcept { return backbone_; }
  Backbone& backbone() noexcept { return backbone_; }
  const Refiner& refiner() const noexcept { return refiner_; }
  Refiner& refiner() noexcept { return refiner_; }
  const RvqCodec& codec() const noexcept { return codec_; }

  SyntheticGenerator synthetic_data() const { return SyntheticGenerator(reasoner_, codec_, cfg_.backbone.width); }

  // Reference audio is analysed into codec features, quantized, and summarised
  // into the speaker vector. Throws TooShort.
  ConditioningPrefix reference_prefix(const Waveform& reference, std::span<const TextToken> reference_text) const;
  ConditioningPrefix synthetic_reference(std::uint64_t speaker_seed, std::size_t frames, std::uint64_t seed) const;

 private:
  RuntimeConfig cfg_;
  ReasonerStub reasoner_;
  Backbone backbone_;
  Refiner refiner_;
  RvqCodec codec_;
};

struct Session {
  std::vector<TextToken> input;
  std::optional<Matrix> input_features;
  ConditioningPrefix prefix;
  StreamOptions stream;
  SamplerConfig refine_sampler;
  TimingMode mode = TimingMode::sequential;
};

struct GenerationResult {
  LatencyReport report;
  Waveform audio;
  std::vector<AcousticFrame> frames;
  InterleavedSequence schedule;
  bool capped = false;
};

// Runs one end-to-end generation and times every component on a monotonic
// clock. Sequential mode runs the stages back to back per frame and reports
// the sum of their busy times as the total; pipelined mode runs backbone and
// refiner on worker threads joined by bounded channels and reports wall-clock
// time. Component TTFT is a stage's own time to its first output; the overall
// TTFT is their sum. Failures surface as PipelineFailure carrying a JSON report
// of the timings gathered so far.
GenerationResult instrument_generation(const Pipeline& pipeline, const Session& session);

}  // namespace speechrt
