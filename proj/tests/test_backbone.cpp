#include <gtest/gtest.h>

#include <random>
#include <set>
#include <thread>

#include "speechrt/backbone.hpp"
#include "speechrt/errors.hpp"

using namespace speechrt;

namespace {

BackboneConfig small_config(std::uint64_t seed = 1) {
  BackboneConfig cfg;
  cfg.width = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.mlp_hidden = 32;
  cfg.vocab = 32;
  cfg.levels = 3;
  cfg.text_vocab = 12;
  cfg.context_limit = 256;
  cfg.seed = seed;
  return cfg;
}

ReasonerOutput reasoner_for(const BackboneConfig& cfg, std::initializer_list<int> ids, std::uint64_t seed = 7) {
  StubConfig sc;
  sc.width = cfg.width;
  sc.text_vocab = cfg.text_vocab;
  sc.seed = seed;
  const ReasonerStub stub(sc);
  std::vector<TextToken> in;
  for (int id : ids) in.push_back(stub.vocab().token(id));
  return stub.reason(in);
}

ConditioningPrefix random_prefix(const BackboneConfig& cfg, std::mt19937_64& rng, std::size_t frames = 3) {
  ConditioningPrefix p;
  std::uniform_int_distribution<int> code(0, cfg.vocab - 2), tok(2, cfg.text_vocab - 1);
  const TextVocab vocab(cfg.text_vocab);
  for (std::size_t i = 0; i < frames; ++i) {
    AcousticFrame f(cfg.levels);
    for (auto& c : f.codes) c = code(rng);
    p.ref_audio.push_back(f);
  }
  for (std::size_t i = 0; i < (frames + 1) / 2; ++i) p.ref_text.push_back(vocab.token(tok(rng)));
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t c = 0; c < cfg.width; ++c) p.speaker.push_back(n(rng));
  return p;
}

Matrix random_rows(std::size_t rows, std::size_t width, std::mt19937_64& rng) { return random_normal(rows, width, 1.0, rng); }

// Rebuilds the rows a stream fed after its prefix from the schedule it reports.
Matrix fed_rows(const Backbone& bb, const ReasonerOutput& r, const InterleavedSequence& schedule) {
  Matrix rows(schedule.size(), bb.config().width);
  std::size_t text = 0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    std::vector<double> v;
    if (const auto* t = std::get_if<TextToken>(&schedule.items[i])) {
      v = text < r.length() ? bb.embed_item(TextRows{r.text_embeddings.row(text), r.hidden_states.row(text)})
                            : bb.embed_text_token(*t);
      ++text;
    } else {
      v = bb.embed_item(std::get<CoarseCode>(schedule.items[i]));
    }
    std::copy(v.begin(), v.end(), rows.row(i).begin());
  }
  return rows;
}

Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

}  // namespace

TEST(BackboneConfig, Validation) {
  auto cfg = small_config();
  cfg.heads = 3;
  EXPECT_THROW(Backbone{cfg}, ConfigError);
  cfg = small_config();
  cfg.vocab = 1;
  EXPECT_THROW(Backbone{cfg}, ConfigError);
  cfg = small_config();
  cfg.context_limit = 0;
  EXPECT_THROW(Backbone{cfg}, ConfigError);
}

TEST(BackboneEmbed, ZeroTableGivesModalityBias) {
  Backbone bb(small_config());
  bb.weights().code_embeddings[0] = Matrix(32, 16);
  const auto code = bb.embed_item(CoarseCode{0});
  EXPECT_EQ(code, bb.weights().code_bias.data);
  const std::vector<double> zeros(16, 0.0);
  EXPECT_EQ(bb.embed_item(TextRows{zeros, zeros}), bb.weights().text_bias.data);
}

TEST(BackboneEmbed, DistinctCodesGiveDistinctVectors) {
  const Backbone bb(BackboneConfig{});
  std::set<std::vector<double>> seen;
  for (int v = 0; v < 256; ++v) seen.insert(bb.embed_item(CoarseCode{v}));
  EXPECT_EQ(seen.size(), 256u);
}

TEST(BackboneEmbed, BothTextSignalsMatter) {
  const Backbone bb(small_config());
  std::vector<double> e(16, 0.3), h(16, -0.2), zeros(16, 0.0);
  const auto both = bb.embed_item(TextRows{e, h});
  EXPECT_NE(both, bb.embed_item(TextRows{zeros, h}));
  EXPECT_NE(both, bb.embed_item(TextRows{e, zeros}));
  EXPECT_THROW(bb.embed_item(CoarseCode{32}), CodeOutOfRange);
}

TEST(BackboneEmbed, ReferenceFrameSumsAllLevels) {
  const Backbone bb(small_config());
  const AcousticFrame f({3, 5, 7});
  const auto v = bb.embed_reference_frame(f);
  const auto& w = bb.weights();
  for (std::size_t c = 0; c < 16; ++c)
    EXPECT_DOUBLE_EQ(v[c], w.code_bias.data[c] + w.code_embeddings[0](3, c) + w.code_embeddings[1](5, c) +
                               w.code_embeddings[2](7, c));
}

TEST(BackbonePrefill, EmptyPrefixAndOverflow) {
  const Backbone bb(small_config());
  EXPECT_EQ(bb.prefill({}).length(), 0u);
  auto cfg = small_config();
  cfg.context_limit = 4;
  const Backbone tight(cfg);
  std::mt19937_64 rng(3);
  const auto prefix = random_prefix(cfg, rng, 4);
  EXPECT_THROW(tight.prefill(prefix), ContextOverflow);
}

TEST(BackboneStep, FullCacheOverflows) {
  auto cfg = small_config();
  cfg.context_limit = 3;
  const Backbone bb(cfg);
  auto cache = bb.new_cache();
  const std::vector<double> x(16, 0.1);
  for (int i = 0; i < 3; ++i) bb.step(cache, x);
  EXPECT_THROW(bb.step(cache, x), ContextOverflow);
}

TEST(BackboneStep, PureGivenCacheState) {
  const Backbone bb(small_config());
  std::mt19937_64 rng(4);
  const auto cache = bb.prefill(random_prefix(small_config(), rng));
  auto a = cache, b = cache;
  const std::vector<double> x(16, 0.7);
  const auto oa = bb.step(a, x), ob = bb.step(b, x);
  EXPECT_EQ(oa.logits, ob.logits);
  EXPECT_EQ(oa.hidden, ob.hidden);
  EXPECT_EQ(oa.logits.size(), 32u);
  EXPECT_EQ(oa.hidden.size(), 16u);
}

TEST(BackboneStep, PrefillPlusStepsMatchesFullForward) {
  for (auto mode : {ArithmeticMode::deterministic, ArithmeticMode::fast}) {
    auto cfg = small_config(9);
    cfg.mode = mode;
    const Backbone bb(cfg);
    std::mt19937_64 rng(10);
    const auto prefix = random_prefix(cfg, rng, 5);
    const Matrix steps = random_rows(9, 16, rng);
    auto cache = bb.prefill(prefix);
    std::vector<BackboneStepOutput> stepped;
    for (std::size_t r = 0; r < steps.rows; ++r) stepped.push_back(bb.step(cache, steps.row(r)));
    const auto full = bb.forward_full(concat(bb.embed_prefix(prefix), steps));
    const std::size_t P = prefix.length();
    for (std::size_t r = 0; r < steps.rows; ++r)
      for (std::size_t v = 0; v < 32; ++v) {
        if (mode == ArithmeticMode::deterministic)
          ASSERT_EQ(stepped[r].logits[v], full[P + r].logits[v]);
        else
          ASSERT_NEAR(stepped[r].logits[v], full[P + r].logits[v], 1e-6);
      }
  }
}

TEST(BackboneForward, PastOutputsIgnoreFutureInputs) {
  const Backbone bb(small_config(2));
  std::mt19937_64 rng(11);
  const Matrix x = random_rows(12, 16, rng);
  const auto base = bb.forward_full(x);
  for (std::size_t t = 0; t < 12; ++t) {
    Matrix y = x;
    for (std::size_t r = t; r < 12; ++r)
      for (std::size_t c = 0; c < 16; ++c) y(r, c) += 0.5;
    const auto out = bb.forward_full(y);
    for (std::size_t r = 0; r < t; ++r) ASSERT_EQ(out[r].hidden, base[r].hidden) << t << " " << r;
    EXPECT_NE(out[t].hidden, base[t].hidden);
  }
}

TEST(CoarseStream, GreedyIsDeterministicAndCapped) {
  const auto cfg = small_config(5);
  const Backbone bb(cfg);
  std::mt19937_64 rng(1);
  const auto prefix = random_prefix(cfg, rng);
  const auto r = reasoner_for(cfg, {3, 4, 5, 6});
  auto run = [&] {
    CoarseStream s(bb, prefix, r, {{}, 10, 10});
    std::vector<int> codes;
    while (auto step = s.next()) codes.push_back(step->code);
    EXPECT_TRUE(s.capped());
    return codes;
  };
  const auto a = run();
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a, run());
}

TEST(CoarseStream, EndCodeStopsAndMinFramesMasksIt) {
  auto cfg = small_config(5);
  Backbone bb(cfg);
  bb.weights().head_bias.data[static_cast<std::size_t>(cfg.end_code())] = 100.0;
  const auto r = reasoner_for(cfg, {3, 4});
  CoarseStream eager(bb, {}, r, {{}, 50, 0});
  EXPECT_FALSE(eager.next().has_value());
  EXPECT_FALSE(eager.capped());
  EXPECT_EQ(eager.frames(), 0u);

  CoarseStream held(bb, {}, r, {{}, 50, 6});
  std::size_t n = 0;
  while (held.next()) ++n;
  EXPECT_EQ(n, 6u);
  EXPECT_FALSE(held.capped());
}

TEST(CoarseStream, ScheduleHoldsTheRatioAndConsumesReasonerText) {
  const auto cfg = small_config(6);
  const Backbone bb(cfg);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto prefix = random_prefix(cfg, rng, 2);
    const auto r = reasoner_for(cfg, {3, 4, 5});
    CoarseStream s(bb, prefix, r, {{1.0, 0, seed}, 1 + seed % 17, 0});
    std::vector<int> codes;
    while (auto step = s.next()) codes.push_back(step->code);
    ASSERT_TRUE(validate_ratio(s.schedule())) << seed;
    if (codes.empty()) continue;
    const auto [text, back] = deinterleave(s.schedule());
    EXPECT_EQ(back, codes);
    for (std::size_t i = 0; i < text.size(); ++i)
      EXPECT_EQ(text[i], i < r.length() ? r.text_tokens[i] : TextVocab(cfg.text_vocab).pad());
  }
}

TEST(CoarseStream, HiddenStatesMatchFullForward) {
  const auto cfg = small_config(8);
  const Backbone bb(cfg);
  std::mt19937_64 rng(2);
  const auto prefix = random_prefix(cfg, rng);
  const auto r = reasoner_for(cfg, {5, 6, 7});
  CoarseStream s(bb, prefix, r, {{0.8, 0, 3}, 15, 15});
  std::vector<CoarseStep> steps;
  while (auto step = s.next()) steps.push_back(*step);
  const auto full = bb.forward_full(concat(bb.embed_prefix(prefix), fed_rows(bb, r, s.schedule())));
  std::size_t k = 0;
  for (std::size_t i = 0; i < s.schedule().size(); ++i)
    if (std::holds_alternative<CoarseCode>(s.schedule().items[i])) {
      // The code at schedule index i was predicted from the item just before it.
      EXPECT_EQ(steps[k].hidden, full[prefix.length() + i - 1].hidden) << k;
      ++k;
    }
  EXPECT_EQ(k, steps.size());
}

TEST(CoarseStream, RejectsEmptyReasonerOutput) {
  const Backbone bb(small_config());
  ReasonerOutput empty;
  EXPECT_THROW(CoarseStream(bb, {}, empty, {}), EmptyInput);
}

TEST(GenerateStream, ProducerRespectsChannelBound) {
  const auto cfg = small_config(4);
  const Backbone bb(cfg);
  const auto r = reasoner_for(cfg, {3, 4, 5});
  BoundedChannel<CoarseStep> ch(3);
  StreamSummary summary;
  std::thread producer([&] { summary = generate_stream(bb, {}, r, {{}, 40, 40}, ch); });
  std::vector<int> codes;
  while (auto step = ch.pop()) {
    codes.push_back(step->code);
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  producer.join();
  EXPECT_EQ(codes.size(), 40u);
  EXPECT_TRUE(summary.capped);
  EXPECT_LE(ch.high_water(), 3u);

  CoarseStream direct(bb, {}, r, {{}, 40, 40});
  std::vector<int> again;
  while (auto step = direct.next()) again.push_back(step->code);
  EXPECT_EQ(codes, again);
}

TEST(BackboneGraph, TeacherForcedLogitsMatchStreaming) {
  const auto cfg = small_config(12);
  const Backbone bb(cfg);
  std::mt19937_64 rng(5);
  const auto prefix = random_prefix(cfg, rng);
  const auto r = reasoner_for(cfg, {5, 9});
  CoarseStream s(bb, prefix, r, {{1.0, 0, 4}, 9, 9});
  std::vector<CoarseStep> steps;
  std::vector<int> codes;
  while (auto step = s.next()) {
    codes.push_back(step->code);
    steps.push_back(*step);
  }
  Graph g;
  const auto out = backbone_graph(g, bb, nullptr, prefix, r, codes);
  const Matrix& hidden = g.value(out.hidden);
  ASSERT_EQ(hidden.rows, codes.size());
  for (std::size_t t = 0; t < codes.size(); ++t)
    for (std::size_t c = 0; c < cfg.width; ++c) EXPECT_NEAR(hidden(t, c), steps[t].hidden[c], 1e-10);
}
