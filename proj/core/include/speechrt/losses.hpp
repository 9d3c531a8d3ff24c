#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "speechrt/tensor.hpp"

namespace speechrt {

// Logits for the refinement levels of L frames: at(t, j) is the length-V row
// for level j + 1 of frame t.
struct LevelLogits {
  std::size_t frames = 0;
  std::size_t levels = 0;  // N - 1
  std::size_t vocab = 0;
  std::vector<double> data;

  LevelLogits() = default;
  LevelLogits(std::size_t l, std::size_t n, std::size_t v) : frames(l), levels(n), vocab(v), data(l * n * v, 0.0) {}
  std::span<double> at(std::size_t t, std::size_t j) { return {data.data() + (t * levels + j) * vocab, vocab}; }
  std::span<const double> at(std::size_t t, std::size_t j) const { return {data.data() + (t * levels + j) * vocab, vocab}; }
};

// Mean over frames of -log softmax(logits_t)[target_t].
double backbone_loss(const Matrix& logits, std::span<const int> targets);

// Mean over frames of the summed per-level NLL; targets[t][j] is the level j + 1 code.
double decoder_loss(const LevelLogits& logits, const std::vector<std::vector<int>>& targets);

struct LossBreakdown {
  double backbone_loss = 0.0;
  double decoder_loss = 0.0;
  double lambda = 0.5;
  double combined = 0.0;
};

struct StageSchedule {
  int stage = 1;
  double lambda = 0.5;
  bool backbone_frozen = false;

  // Stage 1 trains both models at lambda 0.5; stage 2 freezes the backbone at lambda 1.
  static StageSchedule for_stage(int stage);
};

// (1 - lambda) * backbone + lambda * decoder.
LossBreakdown combined_loss(double backbone, double decoder, const StageSchedule& schedule);

}  // namespace speechrt
