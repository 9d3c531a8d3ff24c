#include "speechrt/pipeline.hpp"

#include <chrono>
#include <exception>
#include <ratio>
#include <thread>

#include "speechrt/channel.hpp"
#include "speechrt/checkpoint.hpp"
#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

using Clock = std::chrono::steady_clock;
static_assert(Clock::is_steady);
static_assert(std::ratio_less_equal_v<Clock::period, std::micro>, "need a clock with at least 1 us resolution");

double secs(Clock::duration d) { return std::chrono::duration<double>(d).count(); }
double millis(Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

RvqCodec fit_codec(const RuntimeConfig& cfg) {
  const Matrix pool = codec_training_pool(cfg.codec.dim, cfg.reasoner.text_vocab, cfg.codec_pool_speakers,
                                          cfg.codec_pool_frames, cfg.codec_pool_seed);
  return train_codec(pool, cfg.codec);
}

void append(Waveform& audio, const std::optional<Waveform>& chunk) {
  if (chunk) audio.samples.insert(audio.samples.end(), chunk->samples.begin(), chunk->samples.end());
}

struct Timings {
  Clock::duration busy{};
  std::optional<Clock::duration> first;
};

void fill(ComponentTiming& c, const Timings& t, std::size_t frames, bool has_ttft) {
  c.total_s = secs(t.busy);
  c.avg_frame_ms = frames ? millis(t.busy) / static_cast<double>(frames) : 0.0;
  if (has_ttft) c.ttft_ms = t.first ? millis(*t.first) : 0.0;
}

}  // namespace

Pipeline::Pipeline(RuntimeConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      reasoner_(cfg_.reasoner),
      backbone_(cfg_.backbone),
      refiner_(cfg_.refiner),
      codec_(fit_codec(cfg_)) {}

Pipeline::Pipeline(RuntimeConfig cfg, const std::filesystem::path& weights)
    : cfg_((cfg.validate(), cfg)),
      reasoner_(cfg_.reasoner),
      backbone_(cfg_.backbone),
      refiner_(cfg_.refiner),
      codec_(random_codec(cfg_.codec)) {
  const TensorMap tensors = load_tensors(weights);
  backbone_.weights().visit("bb.", [&](const std::string& name, Matrix& m) { restore_tensor(tensors, name, m); });
  refiner_.weights().visit("rf.", [&](const std::string& name, Matrix& m) { restore_tensor(tensors, name, m); });
  for (auto& book : codec_.codebooks())
    restore_tensor(tensors, "codec.level." + std::to_string(book.level), book.entries);
}

void Pipeline::save(const std::filesystem::path& weights) const {
  TensorMap tensors;
  BackboneWeights bb = backbone_.weights();
  RefinerWeights rf = refiner_.weights();
  bb.visit("bb.", [&](const std::string& name, Matrix& m) { tensors.emplace(name, m); });
  rf.visit("rf.", [&](const std::string& name, Matrix& m) { tensors.emplace(name, m); });
  for (const auto& book : codec_.codebooks()) tensors.emplace("codec.level." + std::to_string(book.level), book.entries);
  save_tensors(weights, tensors);
}

ConditioningPrefix Pipeline::reference_prefix(const Waveform& reference,
                                              std::span<const TextToken> reference_text) const {
  if (reference.sample_rate != cfg_.codec.sample_rate)
    throw DimensionMismatch("reference audio at " + std::to_string(reference.sample_rate) + " Hz, codec runs at " +
                            std::to_string(cfg_.codec.sample_rate) + " Hz");
  const Matrix features = codec_.analyze(reference);
  if (features.rows == 0) throw TooShort("reference audio is shorter than one codec frame");
  ConditioningPrefix prefix;
  prefix.ref_text.assign(reference_text.begin(), reference_text.end());
  prefix.ref_audio = codec_.encode(features, codec_.levels());
  prefix.speaker = speaker_vector(features, cfg_.backbone.width);
  return prefix;
}

ConditioningPrefix Pipeline::synthetic_reference(std::uint64_t speaker_seed, std::size_t frames,
                                                 std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(2, reasoner_.vocab().size() - 1);
  ConditioningPrefix prefix;
  for (std::size_t i = 0; i < (frames + 1) / 2; ++i) prefix.ref_text.push_back(reasoner_.vocab().token(tok(rng)));
  const Matrix features = synthetic_features(SpeakerTimbre::from_seed(speaker_seed, codec_.dim()), prefix.ref_text,
                                             frames, mix_seed(seed, 1));
  prefix.ref_audio = codec_.encode(features, codec_.levels());
  prefix.speaker = speaker_vector(features, cfg_.backbone.width);
  return prefix;
}

GenerationResult instrument_generation(const Pipeline& pipeline, const Session& session) {
  const RuntimeConfig& cfg = pipeline.config();
  GenerationResult result;
  LatencyReport& report = result.report;
  report.mode = session.mode;
  result.audio.sample_rate = cfg.codec.sample_rate;
  Timings reasoner_t, backbone_t, decoder_t, codec_t;
  std::size_t frames = 0;

  auto publish = [&] {
    report.frames = frames;
    fill(report.at(Component::reasoner), reasoner_t, frames, true);
    fill(report.at(Component::backbone), backbone_t, frames, true);
    fill(report.at(Component::decoder), decoder_t, frames, true);
    fill(report.at(Component::codec_decoder), codec_t, frames, false);
    if (report.text_tokens)
      report.at(Component::reasoner).avg_token_ms = millis(reasoner_t.busy) / static_cast<double>(report.text_tokens);
    report.audio_len_s = result.audio.duration_s();
    report.overall_ttft_ms = 0.0;
    for (const auto& c : report.components)
      if (c.ttft_ms) report.overall_ttft_ms += *c.ttft_ms;
  };
  auto fail = [&](const std::string& what) -> PipelineFailure {
    publish();
    return PipelineFailure(what, emit_report(report, ReportFormat::json));
  };

  const auto t_in = Clock::now();
  try {
    const auto a = Clock::now();
    const Matrix* features = session.input_features ? &*session.input_features : nullptr;
    ReasonerOutput reasoned = pipeline.reasoner().reason(session.input, features);
    reasoner_t.busy = Clock::now() - a;
    reasoner_t.first = reasoner_t.busy;
    report.text_tokens = reasoned.length();

    StreamingCodecDecoder decoder(pipeline.codec(), cfg.decode_group);
    auto codec_push = [&](const AcousticFrame& frame) {
      const auto s = Clock::now();
      auto chunk = decoder.push(frame);
      const auto e = Clock::now();
      codec_t.busy += e - s;
      if (chunk && !codec_t.first) codec_t.first = e - t_in;
      append(result.audio, chunk);
      result.frames.push_back(frame);
    };

    if (session.mode == TimingMode::sequential) {
      auto s = Clock::now();
      CoarseStream stream(pipeline.backbone(), session.prefix, reasoned, session.stream);
      backbone_t.busy += Clock::now() - s;
      while (true) {
        s = Clock::now();
        auto step = stream.next();
        backbone_t.busy += Clock::now() - s;
        if (!backbone_t.first) backbone_t.first = backbone_t.busy;
        if (!step) break;
        ++frames;
        s = Clock::now();
        AcousticFrame frame = pipeline.refiner().refine_frame({step->code, std::move(step->hidden)}, session.refine_sampler);
        const auto d = Clock::now() - s;
        decoder_t.busy += d;
        if (!decoder_t.first) decoder_t.first = d;
        codec_push(frame);
      }
      result.capped = stream.capped();
      result.schedule = stream.schedule();
    } else {
      BoundedChannel<CoarseStep> coarse(cfg.channel_capacity);
      BoundedChannel<AcousticFrame> refined(cfg.channel_capacity);
      std::exception_ptr backbone_error, refiner_error;
      std::jthread backbone_worker([&] {
        try {
          auto s = Clock::now();
          CoarseStream stream(pipeline.backbone(), session.prefix, reasoned, session.stream);
          backbone_t.busy += Clock::now() - s;
          while (true) {
            s = Clock::now();
            auto step = stream.next();
            backbone_t.busy += Clock::now() - s;
            if (!backbone_t.first) backbone_t.first = backbone_t.busy;
            if (!step || !coarse.push(std::move(*step))) break;
          }
          result.capped = stream.capped();
          result.schedule = stream.schedule();
        } catch (...) {
          backbone_error = std::current_exception();
          refined.close();
        }
        coarse.close();
      });
      std::jthread refiner_worker([&] {
        try {
          while (auto step = coarse.pop()) {
            const auto s = Clock::now();
            AcousticFrame frame =
                pipeline.refiner().refine_frame({step->code, std::move(step->hidden)}, session.refine_sampler);
            const auto d = Clock::now() - s;
            decoder_t.busy += d;
            if (!decoder_t.first) decoder_t.first = d;
            if (!refined.push(std::move(frame))) break;
          }
        } catch (...) {
          refiner_error = std::current_exception();
          coarse.close();
        }
        refined.close();
      });
      try {
        while (auto frame = refined.pop()) {
          ++frames;
          codec_push(*frame);
        }
      } catch (...) {
        coarse.close();
        refined.close();
        throw;
      }
      backbone_worker.join();
      refiner_worker.join();
      if (backbone_error) std::rethrow_exception(backbone_error);
      if (refiner_error) std::rethrow_exception(refiner_error);
    }

    const auto s = Clock::now();
    auto tail = decoder.flush();
    const auto e = Clock::now();
    codec_t.busy += e - s;
    if (tail && !codec_t.first) codec_t.first = e - t_in;
    append(result.audio, tail);
    const auto t_out = Clock::now();

    report.first_audio_ms = codec_t.first ? millis(*codec_t.first) : 0.0;
    publish();
    // Sequential accounting sums the component totals in report order.
    report.overall_total_s = session.mode == TimingMode::sequential
                                 ? secs(reasoner_t.busy) + secs(backbone_t.busy) + secs(decoder_t.busy) +
                                       secs(codec_t.busy)
                                 : secs(t_out - t_in);
  } catch (const PipelineFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(e.what());
  }

  if (result.audio.samples.empty()) throw fail("no audio was generated");
  finalize_report(report);
  return result;
}

}  // namespace speechrt
