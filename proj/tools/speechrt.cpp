#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "speechrt/errors.hpp"
#include "speechrt/pipeline.hpp"
#include "speechrt/speaker.hpp"
#include "speechrt/training.hpp"
#include "speechrt/wav.hpp"

using namespace speechrt;

namespace {

struct Common {
  std::string config;
  std::string weights;

  RuntimeConfig runtime() const { return config.empty() ? RuntimeConfig{} : RuntimeConfig::from_file(config); }

  std::unique_ptr<Pipeline> pipeline() const {
    auto cfg = runtime();
    return weights.empty() ? std::make_unique<Pipeline>(cfg) : std::make_unique<Pipeline>(cfg, weights);
  }
};

// "12 7 33" or "12,7,33" as token ids; anything else is mapped byte by byte.
std::vector<TextToken> parse_text(const std::string& text, const TextVocab& vocab) {
  std::vector<TextToken> out;
  std::string spaced = text;
  for (char& c : spaced)
    if (c == ',') c = ' ';
  std::istringstream in(spaced);
  int id = 0;
  bool numeric = true;
  std::vector<int> ids;
  while (in >> id) ids.push_back(id);
  if (!in.eof() || ids.empty()) numeric = false;
  if (numeric) {
    for (int v : ids) out.push_back(vocab.token(v));
  } else {
    for (unsigned char c : text)
      if (c != ' ') out.push_back(vocab.token(2 + static_cast<int>(c) % (vocab.size() - 2)));
  }
  return out;
}

std::vector<TextToken> default_prompt(const TextVocab& vocab) {
  std::vector<TextToken> out;
  for (int i = 0; i < 40; ++i) out.push_back(vocab.token(2 + (i * 7) % (vocab.size() - 2)));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming speech generation runtime"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--weights", common.weights, "weight file written by `train`")->check(CLI::ExistingFile);

  std::string text, reference, ref_text, out_path, frames_out;
  std::uint64_t seed = 0, speaker_seed = 1;
  std::size_t frames_cap = 1000, min_frames = 500, ref_frames = 50;
  double temperature = 0.0;

  auto* bench = app.add_subcommand("bench", "instrumented end-to-end generation");
  std::string mode = "sequential", format = "table";
  bench->add_option("--mode", mode)->check(CLI::IsMember({"sequential", "pipelined"}));
  bench->add_option("--format", format)->check(CLI::IsMember({"table", "json"}));
  bench->add_option("--seed", seed, "sampler and reference seed");
  bench->add_option("--frames-cap", frames_cap);
  bench->add_option("--min-frames", min_frames, "frames before end-of-audio may be emitted");
  bench->add_option("--text", text, "token ids or plain text");
  bench->add_option("--temperature", temperature);

  auto* generate = app.add_subcommand("generate", "text (and optional reference audio) to WAV");
  generate->add_option("--text", text)->required();
  generate->add_option("--reference", reference, "reference WAV for voice cloning")->check(CLI::ExistingFile);
  generate->add_option("--ref-text", ref_text, "transcript of the reference as token ids or text");
  generate->add_option("--speaker-seed", speaker_seed, "synthetic reference speaker when no --reference");
  generate->add_option("--out", out_path)->required();
  generate->add_option("--codes-out", frames_out, "also write the generated frames");
  generate->add_option("--seed", seed);
  generate->add_option("--temperature", temperature);
  generate->add_option("--frames-cap", frames_cap);
  generate->add_option("--min-frames", min_frames);

  auto* train = app.add_subcommand("train", "train on synthetic pairs");
  int stage = 1;
  std::size_t steps = 200;
  std::string trace_path;
  train->add_option("--stage", stage)->check(CLI::IsMember({1, 2}));
  train->add_option("--steps", steps)->check(CLI::PositiveNumber);
  train->add_option("--trace", trace_path, "loss trace output (default stdout)");
  train->add_option("--out", out_path, "weight file to write")->required();

  auto* encode = app.add_subcommand("encode", "WAV to code frames");
  std::string in_path;
  std::size_t levels = 0;
  encode->add_option("input", in_path)->required()->check(CLI::ExistingFile);
  encode->add_option("output", out_path)->required();
  encode->add_option("--levels", levels, "quantizer levels to use (default all)");

  auto* decode = app.add_subcommand("decode", "code frames to WAV");
  decode->add_option("input", in_path)->required()->check(CLI::ExistingFile);
  decode->add_option("output", out_path)->required();

  auto* sim = app.add_subcommand("sim", "speaker similarity of two WAV files");
  std::string wav_a, wav_b;
  sim->add_option("a", wav_a)->required()->check(CLI::ExistingFile);
  sim->add_option("b", wav_b)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const double s = compute_sim(extract_speaker_embedding(read_wav(wav_a)), extract_speaker_embedding(read_wav(wav_b)));
      std::printf("%.6f\n", s);
      return 0;
    }

    auto pipeline = common.pipeline();
    const TextVocab& vocab = pipeline->reasoner().vocab();
    const RvqCodec& codec = pipeline->codec();

    if (*bench || *generate) {
      Session session;
      session.input = text.empty() ? default_prompt(vocab) : parse_text(text, vocab);
      session.stream.frame_cap = frames_cap;
      session.stream.min_frames = min_frames;
      session.stream.sampler = {temperature, 0, seed};
      session.refine_sampler = {temperature, 0, seed};
      session.mode = mode == "pipelined" ? TimingMode::pipelined : TimingMode::sequential;
      if (!reference.empty()) {
        const auto ref = read_wav(reference);
        session.prefix = pipeline->reference_prefix(ref, parse_text(ref_text, vocab));
      } else {
        session.prefix = pipeline->synthetic_reference(*bench ? seed + 1 : speaker_seed, ref_frames, seed);
      }
      const auto result = instrument_generation(*pipeline, session);
      if (*bench) {
        std::cout << emit_report(result.report, format == "json" ? ReportFormat::json : ReportFormat::table);
        if (auto problem = check_report(result.report); !problem.empty()) {
          std::cerr << "inconsistent report: " << problem << "\n";
          return 1;
        }
        return 0;
      }
      write_wav(out_path, result.audio);
      if (!frames_out.empty()) {
        std::ofstream codes(frames_out);
        write_frames(codes, result.frames);
      }
      std::fprintf(stderr, "%zu frames, %.2f s of audio%s\n", result.frames.size(), result.audio.duration_s(),
                   result.capped ? " (frame cap reached)" : "");
      return 0;
    }

    if (*train) {
      const auto data = pipeline->synthetic_data();
      Trainer trainer(pipeline->backbone(), pipeline->refiner(), data, pipeline->config().train);
      std::ofstream trace_file;
      if (!trace_path.empty()) trace_file.open(trace_path);
      std::ostream& trace = trace_path.empty() ? std::cout : trace_file;
      write_trace_header(trace);
      trainer.train(StageSchedule::for_stage(stage), steps, [&](const TraceRow& row) {
        write_trace_row(trace, row);
        trace.flush();
      });
      pipeline->save(out_path);
      return 0;
    }

    if (*encode) {
      const auto wave = read_wav(in_path);
      if (wave.sample_rate != codec.config().sample_rate)
        throw DimensionMismatch("input is " + std::to_string(wave.sample_rate) + " Hz, codec runs at " +
                                std::to_string(codec.config().sample_rate) + " Hz");
      const auto frames = codec.encode(codec.analyze(wave), levels ? levels : codec.levels());
      std::ofstream out(out_path);
      write_frames(out, frames);
      return 0;
    }

    if (*decode) {
      std::ifstream in(in_path);
      const auto frames = read_frames(in, codec.levels(), codec.vocab());
      write_wav(out_path, codec.synthesize(codec.decode(frames, codec.levels())));
      return 0;
    }
  } catch (const PipelineFailure& e) {
    std::cerr << e.what() << "\npartial timings:\n" << e.partial_report();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
