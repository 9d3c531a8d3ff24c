#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "speechrt/backbone.hpp"
#include "speechrt/losses.hpp"
#include "speechrt/refiner.hpp"
#include "speechrt/synthetic.hpp"

namespace speechrt {

struct TrainConfig {
  double learning_rate = 5e-5;
  double momentum = 0.9;
  double clip_norm = 1.0;
  std::size_t batch_size = 4;
  std::size_t frames = 24;
  std::size_t ref_frames = 8;
  std::size_t speakers = 8;
  std::uint64_t seed = 11;
  std::size_t prefetch = 2;  // batches generated ahead on a worker; 0 disables
};

struct ModelGradients {
  BackboneWeights backbone;
  RefinerWeights refiner;
};

struct TraceRow {
  std::size_t step = 0;
  LossBreakdown loss;
  double grad_norm = 0.0;     // before clipping
  double clipped_norm = 0.0;  // after clipping
};

// Teacher-forced losses for one training pair. When `grads` is non-null the
// combined loss times `grad_scale` is backpropagated into it; backbone
// gradients are skipped under a frozen schedule.
LossBreakdown pair_loss(const Backbone& backbone, const Refiner& refiner, const TrainingBatch& pair,
                        const StageSchedule& schedule, ModelGradients* grads = nullptr, double grad_scale = 1.0);

// Decoder loss for `frames` scored against `targets`: the refiner is
// conditioned on the level prefixes of `frames` (teacher forcing) while the NLL
// is taken on the codes of `targets`.
double teacher_forced_decoder_loss(const Refiner& refiner, const Matrix& backbone_hidden,
                                   std::span<const AcousticFrame> frames, std::span<const AcousticFrame> targets);

// Momentum gradient descent with global-norm clipping over synthetic pairs.
class Trainer {
 public:
  Trainer(Backbone& backbone, Refiner& refiner, const SyntheticGenerator& data, TrainConfig cfg);

  TraceRow step(const StageSchedule& schedule);
  // Throws DivergenceDetected when a loss or gradient becomes non-finite.
  std::vector<TraceRow> train(const StageSchedule& schedule, std::size_t steps,
                              const std::function<void(const TraceRow&)>& on_step = {});

  std::vector<TrainingBatch> batch_for_step(std::size_t step) const;
  std::size_t steps_done() const noexcept { return steps_; }

 private:
  TraceRow apply(const StageSchedule& schedule, const std::vector<TrainingBatch>& batch);

  Backbone& backbone_;
  Refiner& refiner_;
  const SyntheticGenerator& data_;
  TrainConfig cfg_;
  ModelGradients velocity_;
  std::size_t steps_ = 0;
};

// Tab-separated: step, backbone_loss, decoder_loss, lambda, combined, grad_norm
// (grad_norm is the post-clip norm).
void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRow& row);

}  // namespace speechrt
