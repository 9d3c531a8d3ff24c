#include "speechrt/losses.hpp"

#include <cmath>

#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

double nll(std::span<const double> row, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= row.size())
    throw CodeOutOfRange("target " + std::to_string(target) + " outside the vocabulary");
  return log_sum_exp(row) - row[static_cast<std::size_t>(target)];
}

}  // namespace

double backbone_loss(const Matrix& logits, std::span<const int> targets) {
  if (logits.rows == 0 || logits.rows != targets.size())
    throw ShapeMismatch(std::to_string(logits.rows) + " logit rows for " + std::to_string(targets.size()) + " targets");
  double total = 0.0;
  for (std::size_t t = 0; t < logits.rows; ++t) total += nll(logits.row(t), targets[t]);
  return total / static_cast<double>(logits.rows);
}

double decoder_loss(const LevelLogits& logits, const std::vector<std::vector<int>>& targets) {
  if (logits.frames == 0 || targets.size() != logits.frames)
    throw ShapeMismatch("one target row per frame required");
  if (logits.data.size() != logits.frames * logits.levels * logits.vocab) throw ShapeMismatch("logit storage size");
  double total = 0.0;
  for (std::size_t t = 0; t < logits.frames; ++t) {
    if (targets[t].size() != logits.levels) throw ShapeMismatch("one target per refinement level required");
    for (std::size_t j = 0; j < logits.levels; ++j) total += nll(logits.at(t, j), targets[t][j]);
  }
  return total / static_cast<double>(logits.frames);
}

StageSchedule StageSchedule::for_stage(int stage) {
  if (stage == 1) return {1, 0.5, false};
  if (stage == 2) return {2, 1.0, true};
  throw ConfigError("training stage must be 1 or 2");
}

LossBreakdown combined_loss(double backbone, double decoder, const StageSchedule& schedule) {
  LossBreakdown b;
  b.backbone_loss = backbone;
  b.decoder_loss = decoder;
  b.lambda = schedule.lambda;
  b.combined = (1.0 - schedule.lambda) * backbone + schedule.lambda * decoder;
  return b;
}

}  // namespace speechrt
