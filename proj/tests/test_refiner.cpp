#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "speechrt/errors.hpp"
#include "speechrt/refiner.hpp"

using namespace speechrt;

namespace {

RefinerConfig tiny(std::size_t levels = 3, int vocab = 4, std::uint64_t seed = 3) {
  RefinerConfig cfg;
  cfg.width = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.mlp_hidden = 16;
  cfg.levels = levels;
  cfg.vocab = vocab;
  cfg.backbone_width = 6;
  cfg.seed = seed;
  return cfg;
}

RefineInput random_input(const RefinerConfig& cfg, std::mt19937_64& rng) {
  RefineInput in;
  in.coarse_code = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.vocab));
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t c = 0; c < cfg.backbone_width; ++c) in.backbone_hidden.push_back(n(rng));
  return in;
}

}  // namespace

TEST(Refiner, GreedyFrameContract) {
  const Refiner rf(RefinerConfig{});
  std::mt19937_64 rng(1);
  const auto in = random_input(rf.config(), rng);
  const auto a = rf.refine_frame(in, {});
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(a[0], in.coarse_code);
  EXPECT_EQ(a, rf.refine_frame(in, {}));
}

TEST(Refiner, GreedyMatchesLevelByLevelArgmax) {
  const Refiner rf(tiny());
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_input(rf.config(), rng);
    const auto frame = rf.refine_frame(in, {});
    std::vector<int> prefix;
    for (std::size_t j = 1; j < 3; ++j) {
      const auto logits = rf.level_logits(in, prefix, j);
      int best = 0;
      for (int v = 1; v < 4; ++v)
        if (logits[static_cast<std::size_t>(v)] > logits[static_cast<std::size_t>(best)]) best = v;
      EXPECT_EQ(frame[j], best);
      prefix.push_back(best);
    }
  }
}

TEST(Refiner, FactorizedDistributionIsNormalized) {
  const Refiner rf(tiny());
  std::mt19937_64 rng(3);
  const auto in = random_input(rf.config(), rng);
  long double total = 0.0L;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) total += std::exp(static_cast<long double>(rf.log_prob(in, AcousticFrame({in.coarse_code, a, b}))));
  EXPECT_NEAR(static_cast<double>(total), 1.0, 1e-12);
}

TEST(Refiner, LogProbIsSumOfLevelLogProbs) {
  const Refiner rf(tiny(4, 5));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_input(rf.config(), rng);
    AcousticFrame f({in.coarse_code, int(rng() % 5), int(rng() % 5), int(rng() % 5)});
    long double expected = 0.0L;
    for (std::size_t j = 1; j < 4; ++j) {
      const auto logits = rf.level_logits(in, std::span<const int>(f.codes).subspan(1, j - 1), j);
      expected += std::log(oracle::softmax_prob(logits, f[j]));
    }
    EXPECT_NEAR(rf.log_prob(in, f), static_cast<double>(expected), 1e-12);
  }
}

TEST(Refiner, LevelBounds) {
  const Refiner rf(tiny());
  std::mt19937_64 rng(5);
  const auto in = random_input(rf.config(), rng);
  EXPECT_EQ(rf.level_logits(in, {}, 1).size(), 4u);
  EXPECT_THROW(rf.level_logits(in, {}, 0), LevelOutOfRange);
  const std::vector<int> two{1, 2};
  EXPECT_THROW(rf.level_logits(in, two, 3), LevelOutOfRange);
  EXPECT_THROW(rf.level_logits(in, two, 2), ShapeMismatch);
}

TEST(Refiner, HeadsAreIsolated) {
  Refiner rf(tiny(4, 6));
  std::mt19937_64 rng(6);
  const auto in = random_input(rf.config(), rng);
  const std::vector<int> p1{2}, p2{2, 3};
  const auto l1 = rf.level_logits(in, {}, 1);
  const auto l2 = rf.level_logits(in, p1, 2);
  const auto l3 = rf.level_logits(in, p2, 3);
  for (double& v : rf.weights().heads[1].data) v += 0.25;
  EXPECT_EQ(rf.level_logits(in, {}, 1), l1);
  EXPECT_NE(rf.level_logits(in, p1, 2), l2);
  EXPECT_EQ(rf.level_logits(in, p2, 3), l3);
}

TEST(Refiner, InputValidation) {
  const Refiner rf(tiny());
  RefineInput bad{4, std::vector<double>(6, 0.0)};
  EXPECT_THROW(rf.refine_frame(bad, {}), CodeOutOfRange);
  RefineInput narrow{1, std::vector<double>(5, 0.0)};
  EXPECT_THROW(rf.refine_frame(narrow, {}), DimensionMismatch);
  auto cfg = tiny();
  cfg.levels = 1;
  EXPECT_THROW(Refiner{cfg}, ConfigError);
}

TEST(Refiner, SampledFrameIsPureFunctionOfInput) {
  const Refiner rf(RefinerConfig{});
  std::mt19937_64 rng(7);
  std::vector<RefineInput> inputs;
  for (int i = 0; i < 100; ++i) inputs.push_back(random_input(rf.config(), rng));
  const SamplerConfig sampler{1.0, 0, 99};
  std::vector<AcousticFrame> stream;
  for (const auto& in : inputs) stream.push_back(rf.refine_frame(in, sampler));
  for (std::size_t i = 100; i-- > 0;) EXPECT_EQ(rf.refine_frame(inputs[i], sampler), stream[i]) << i;
  // Different sampler seeds should not all give the same frame.
  int differ = 0;
  for (std::size_t i = 0; i < 20; ++i) differ += rf.refine_frame(inputs[i], {1.0, 0, 100}) != stream[i];
  EXPECT_GT(differ, 0);
}

TEST(RefinerGraph, TeacherForcedLogitsMatchIncremental) {
  const Refiner rf(tiny(5, 7));
  std::mt19937_64 rng(8);
  std::vector<RefineInput> inputs;
  std::vector<AcousticFrame> frames;
  Matrix hidden(6, 6);
  for (std::size_t t = 0; t < 6; ++t) {
    inputs.push_back(random_input(rf.config(), rng));
    std::copy(inputs[t].backbone_hidden.begin(), inputs[t].backbone_hidden.end(), hidden.row(t).begin());
    AcousticFrame f(5);
    f[0] = inputs[t].coarse_code;
    for (std::size_t j = 1; j < 5; ++j) f[j] = static_cast<int>(rng() % 7);
    frames.push_back(f);
  }
  Graph g;
  const auto logits = refiner_graph(g, rf, nullptr, g.constant(hidden), frames);
  ASSERT_EQ(logits.size(), 4u);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 1; j < 5; ++j) {
      const auto ref = rf.level_logits(inputs[t], std::span<const int>(frames[t].codes).subspan(1, j - 1), j);
      for (std::size_t v = 0; v < 7; ++v) EXPECT_NEAR(g.value(logits[j - 1])(t, v), ref[v], 1e-12);
    }
}

TEST(RefinerGraph, LevelLogitsIgnoreLaterCodes) {
  const Refiner rf(tiny(6, 5));
  std::mt19937_64 rng(9);
  Matrix hidden = random_normal(4, 6, 1.0, rng);
  std::vector<AcousticFrame> frames;
  for (int t = 0; t < 4; ++t) {
    AcousticFrame f(6);
    for (auto& c : f.codes) c = static_cast<int>(rng() % 5);
    frames.push_back(f);
  }
  Graph g0;
  const auto base = refiner_graph(g0, rf, nullptr, g0.constant(hidden), frames);
  for (std::size_t j = 1; j < 6; ++j) {
    auto changed = frames;
    for (auto& f : changed)
      for (std::size_t k = j; k < 6; ++k) f[k] = (f[k] + 1) % 5;
    Graph g;
    const auto out = refiner_graph(g, rf, nullptr, g.constant(hidden), changed);
    for (std::size_t level = 1; level <= j; ++level) EXPECT_EQ(g.value(out[level - 1]), g0.value(base[level - 1])) << j;
  }
}
