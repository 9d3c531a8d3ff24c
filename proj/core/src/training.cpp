#include "speechrt/training.hpp"

#include <cmath>
#include <exception>
#include <iomanip>
#include <ostream>
#include <thread>

#include "speechrt/channel.hpp"
#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

template <class F>
void for_each_pair(ModelGradients& a, Backbone& bb, Refiner& rf, bool with_backbone, F&& f) {
  if (with_backbone) {
    std::vector<Matrix*> gs;
    a.backbone.visit("", [&](const std::string&, Matrix& m) { gs.push_back(&m); });
    std::size_t i = 0;
    bb.weights().visit("", [&](const std::string&, Matrix& m) { f(m, *gs[i++]); });
  }
  std::vector<Matrix*> gs;
  a.refiner.visit("", [&](const std::string&, Matrix& m) { gs.push_back(&m); });
  std::size_t i = 0;
  rf.weights().visit("", [&](const std::string&, Matrix& m) { f(m, *gs[i++]); });
}

}  // namespace

LossBreakdown pair_loss(const Backbone& backbone, const Refiner& refiner, const TrainingBatch& pair,
                        const StageSchedule& schedule, ModelGradients* grads, double grad_scale) {
  const std::size_t L = pair.target_frames.size();
  if (L == 0) throw EmptyInput("training pair has no target frames");
  std::vector<int> coarse(L);
  for (std::size_t t = 0; t < L; ++t) coarse[t] = pair.target_frames[t][0];

  Graph g;
  BackboneWeights* bb_grads = grads && !schedule.backbone_frozen ? &grads->backbone : nullptr;
  RefinerWeights* rf_grads = grads ? &grads->refiner : nullptr;
  const auto bb = backbone_graph(g, backbone, bb_grads, pair.prefix, pair.reasoner, coarse);
  const auto bb_loss = g.scale(g.cross_entropy(bb.logits, coarse), 1.0 / static_cast<double>(L));

  const auto level_logits = refiner_graph(g, refiner, rf_grads, bb.hidden, pair.target_frames);
  Graph::Var dec{};
  for (std::size_t j = 1; j <= level_logits.size(); ++j) {
    std::vector<int> targets(L);
    for (std::size_t t = 0; t < L; ++t) targets[t] = pair.target_frames[t][j];
    const auto nll = g.cross_entropy(level_logits[j - 1], targets);
    dec = j == 1 ? nll : g.add(dec, nll);
  }
  dec = g.scale(dec, 1.0 / static_cast<double>(L));

  const LossBreakdown out = combined_loss(g.scalar(bb_loss), g.scalar(dec), schedule);
  if (grads) {
    const auto total = g.add(g.scale(bb_loss, (1.0 - schedule.lambda) * grad_scale), g.scale(dec, schedule.lambda * grad_scale));
    g.backward(total);
  }
  return out;
}

double teacher_forced_decoder_loss(const Refiner& refiner, const Matrix& backbone_hidden,
                                   std::span<const AcousticFrame> frames, std::span<const AcousticFrame> targets) {
  if (frames.size() != targets.size()) throw ShapeMismatch("frames and targets differ in length");
  Graph g;
  const auto logits = refiner_graph(g, refiner, nullptr, g.constant(backbone_hidden), frames);
  const std::size_t L = frames.size();
  LevelLogits ll(L, logits.size(), static_cast<std::size_t>(refiner.config().vocab));
  std::vector<std::vector<int>> tgt(L, std::vector<int>(logits.size()));
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const Matrix& m = g.value(logits[j]);
    for (std::size_t t = 0; t < L; ++t) {
      std::copy(m.row(t).begin(), m.row(t).end(), ll.at(t, j).begin());
      tgt[t][j] = targets[t][j + 1];
    }
  }
  return decoder_loss(ll, tgt);
}

Trainer::Trainer(Backbone& backbone, Refiner& refiner, const SyntheticGenerator& data, TrainConfig cfg)
    : backbone_(backbone),
      refiner_(refiner),
      data_(data),
      cfg_(cfg),
      velocity_{backbone.weights().zeros_like(), refiner.weights().zeros_like()} {
  if (cfg_.batch_size == 0) throw ConfigError("batch size must be positive");
  if (cfg_.speakers == 0) throw ConfigError("need at least one synthetic speaker");
}

std::vector<TrainingBatch> Trainer::batch_for_step(std::size_t step) const {
  std::vector<TrainingBatch> batch;
  for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
    const std::uint64_t seed = mix_seed(mix_seed(cfg_.seed, step), i);
    batch.push_back(data_.generate(SyntheticSpec{seed, cfg_.frames, seed % cfg_.speakers, cfg_.ref_frames}));
  }
  return batch;
}

TraceRow Trainer::apply(const StageSchedule& schedule, const std::vector<TrainingBatch>& batch) {
  ModelGradients grads{backbone_.weights().zeros_like(), refiner_.weights().zeros_like()};
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean{0.0, 0.0, schedule.lambda, 0.0};
  for (const auto& pair : batch) {
    const LossBreakdown b = pair_loss(backbone_, refiner_, pair, schedule, &grads, scale);
    mean.backbone_loss += b.backbone_loss * scale;
    mean.decoder_loss += b.decoder_loss * scale;
    mean.combined += b.combined * scale;
  }
  ++steps_;
  if (!std::isfinite(mean.combined)) throw DivergenceDetected("loss at step " + std::to_string(steps_));

  const bool train_backbone = !schedule.backbone_frozen;
  double sq = 0.0;
  for_each_pair(grads, backbone_, refiner_, train_backbone, [&](Matrix&, Matrix& g) {
    for (double v : g.data) sq += v * v;
  });
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw DivergenceDetected("gradient norm at step " + std::to_string(steps_));
  const double clip = norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;

  double clipped_sq = 0.0;
  for_each_pair(grads, backbone_, refiner_, train_backbone, [&](Matrix&, Matrix& g) {
    for (double& v : g.data) {
      v *= clip;
      clipped_sq += v * v;
    }
  });

  // Velocity buffers mirror the gradient layout, so walk them in lockstep.
  ModelGradients* vel = &velocity_;
  std::vector<Matrix*> vs;
  if (train_backbone) vel->backbone.visit("", [&](const std::string&, Matrix& m) { vs.push_back(&m); });
  vel->refiner.visit("", [&](const std::string&, Matrix& m) { vs.push_back(&m); });
  std::size_t k = 0;
  for_each_pair(grads, backbone_, refiner_, train_backbone, [&](Matrix& w, Matrix& g) {
    Matrix& v = *vs[k++];
    for (std::size_t i = 0; i < w.size(); ++i) {
      v.data[i] = cfg_.momentum * v.data[i] + g.data[i];
      w.data[i] -= cfg_.learning_rate * v.data[i];
    }
  });

  return TraceRow{steps_, mean, norm, std::sqrt(clipped_sq)};
}

TraceRow Trainer::step(const StageSchedule& schedule) { return apply(schedule, batch_for_step(steps_)); }

std::vector<TraceRow> Trainer::train(const StageSchedule& schedule, std::size_t steps,
                                     const std::function<void(const TraceRow&)>& on_step) {
  std::vector<TraceRow> trace;
  trace.reserve(steps);
  if (cfg_.prefetch == 0) {
    for (std::size_t s = 0; s < steps; ++s) {
      trace.push_back(step(schedule));
      if (on_step) on_step(trace.back());
    }
    return trace;
  }
  // One producer keeps batch order fixed regardless of timing.
  BoundedChannel<std::vector<TrainingBatch>> queue(cfg_.prefetch);
  const std::size_t first = steps_;
  std::exception_ptr worker_error;
  std::jthread worker([&, first] {
    try {
      for (std::size_t s = 0; s < steps; ++s)
        if (!queue.push(batch_for_step(first + s))) break;
    } catch (...) {
      worker_error = std::current_exception();
    }
    queue.close();
  });
  try {
    for (std::size_t s = 0; s < steps; ++s) {
      auto batch = queue.pop();
      if (!batch) {
        if (worker_error) std::rethrow_exception(worker_error);
        throw Error("training data worker stopped early");
      }
      trace.push_back(apply(schedule, *batch));
      if (on_step) on_step(trace.back());
    }
  } catch (...) {
    queue.close();
    throw;
  }
  return trace;
}

void write_trace_header(std::ostream& out) {
  out << "step\tbackbone_loss\tdecoder_loss\tlambda\tcombined\tgrad_norm\n";
}

void write_trace_row(std::ostream& out, const TraceRow& row) {
  out << row.step << '\t' << std::setprecision(10) << row.loss.backbone_loss << '\t' << row.loss.decoder_loss << '\t'
      << row.loss.lambda << '\t' << row.loss.combined << '\t' << row.clipped_norm << '\n';
}

}  // namespace speechrt
