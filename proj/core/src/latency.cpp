#include "speechrt/latency.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

using nlohmann::json;

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

Component component_from(std::string_view name) {
  for (auto c : {Component::reasoner, Component::backbone, Component::decoder, Component::codec_decoder})
    if (component_name(c) == name) return c;
  throw FormatError("unknown component '" + std::string(name) + "'");
}

TimingMode mode_from(std::string_view name) {
  if (name == "sequential") return TimingMode::sequential;
  if (name == "pipelined") return TimingMode::pipelined;
  throw FormatError("unknown timing mode '" + std::string(name) + "'");
}

constexpr const char* kLabels[] = {"Reasoner", "Backbone", "Decoder", "Codec Decoder"};

}  // namespace

std::string_view component_name(Component c) noexcept {
  switch (c) {
    case Component::reasoner: return "reasoner";
    case Component::backbone: return "backbone";
    case Component::decoder: return "decoder";
    case Component::codec_decoder: return "codec_decoder";
  }
  return "";
}

std::string_view mode_name(TimingMode m) noexcept {
  return m == TimingMode::sequential ? "sequential" : "pipelined";
}

double compute_rtf(double generation_s, double audio_s) {
  if (!(audio_s > 0.0)) throw ZeroAudio("generated audio has no duration");
  return generation_s / audio_s;
}

void finalize_report(LatencyReport& r) {
  r.overall_ttft_ms = 0.0;
  for (const auto& c : r.components)
    if (c.ttft_ms) r.overall_ttft_ms += *c.ttft_ms;
  r.overall_avg_frame_ms = r.frames ? r.overall_total_s * 1000.0 / static_cast<double>(r.frames) : 0.0;
  r.rtf = compute_rtf(r.overall_total_s, r.audio_len_s);
}

std::string check_report(const LatencyReport& r) {
  double ttft = 0.0, busy = 0.0;
  for (std::size_t i = 0; i < r.components.size(); ++i) {
    const auto& c = r.components[i];
    if (c.component != static_cast<Component>(i)) return "components out of order";
    if (c.total_s < 0.0 || c.avg_frame_ms < 0.0) return "negative timing";
    if (c.ttft_ms.has_value() == (c.component == Component::codec_decoder))
      return "TTFT must be present exactly for the non-codec components";
    if (c.ttft_ms) {
      if (*c.ttft_ms < 0.0) return "negative TTFT";
      ttft += *c.ttft_ms;
    }
    busy += c.total_s;
  }
  if (ttft != r.overall_ttft_ms) return "overall TTFT is not the sum of component TTFTs";
  if (!(r.audio_len_s > 0.0)) return "audio length must be positive";
  if (std::abs(r.rtf - r.overall_total_s / r.audio_len_s) > 1e-9) return "rtf inconsistent with total and audio length";
  if (r.mode == TimingMode::sequential && std::abs(busy - r.overall_total_s) > 1e-9 * std::max(1.0, busy))
    return "sequential total is not the sum of component totals";
  return {};
}

std::string emit_report(const LatencyReport& r, ReportFormat format) {
  if (format == ReportFormat::json) {
    json j;
    j["mode"] = mode_name(r.mode);
    j["frames"] = r.frames;
    j["text_tokens"] = r.text_tokens;
    j["components"] = json::array();
    for (const auto& c : r.components) {
      json e{{"component", component_name(c.component)}, {"avg_frame_ms", c.avg_frame_ms}, {"total_s", c.total_s}};
      if (c.ttft_ms) e["ttft_ms"] = *c.ttft_ms;
      if (c.avg_token_ms) e["avg_token_ms"] = *c.avg_token_ms;
      j["components"].push_back(std::move(e));
    }
    j["overall"] = {{"ttft_ms", r.overall_ttft_ms}, {"avg_frame_ms", r.overall_avg_frame_ms}, {"total_s", r.overall_total_s}};
    j["audio_len_s"] = r.audio_len_s;
    j["rtf"] = r.rtf;
    j["first_audio_ms"] = r.first_audio_ms;
    return j.dump(2) + "\n";
  }

  std::ostringstream out;
  out << "| Component | TTFT (ms) | Avg Latency per Frame (ms) | Total Duration (s) |\n";
  out << "|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.components.size(); ++i) {
    const auto& c = r.components[i];
    out << "| " << kLabels[i] << " | " << (c.ttft_ms ? fixed2(*c.ttft_ms) : "--") << " | " << fixed2(c.avg_frame_ms)
        << " | " << fixed2(c.total_s) << " |\n";
  }
  out << "| Overall Generation Latency | " << fixed2(r.overall_ttft_ms) << " | " << fixed2(r.overall_avg_frame_ms)
      << " | " << fixed2(r.overall_total_s) << " |\n";
  out << "| Generated Audio Length | -- | -- | " << fixed2(r.audio_len_s) << " |\n";
  out << "| Generation RTF | | " << fixed2(r.rtf) << " | |\n";
  const auto& reasoner = r.at(Component::reasoner);
  if (reasoner.avg_token_ms)
    out << "\nReasoner avg latency per text token (ms): " << fixed2(*reasoner.avg_token_ms)
        << " (per-frame column divides by audio frames)\n";
  out << "mode: " << mode_name(r.mode) << ", frames: " << r.frames << ", first audio after (ms): "
      << fixed2(r.first_audio_ms) << "\n";
  return out.str();
}

LatencyReport parse_report(std::string_view text) {
  try {
    const json j = json::parse(text);
    LatencyReport r;
    r.mode = mode_from(j.at("mode").get<std::string>());
    r.frames = j.at("frames").get<std::size_t>();
    r.text_tokens = j.at("text_tokens").get<std::size_t>();
    const auto& comps = j.at("components");
    if (comps.size() != r.components.size()) throw FormatError("expected four components");
    for (std::size_t i = 0; i < comps.size(); ++i) {
      ComponentTiming c;
      c.component = component_from(comps[i].at("component").get<std::string>());
      if (c.component != static_cast<Component>(i)) throw FormatError("components out of order");
      c.avg_frame_ms = comps[i].at("avg_frame_ms").get<double>();
      c.total_s = comps[i].at("total_s").get<double>();
      if (comps[i].contains("ttft_ms")) c.ttft_ms = comps[i]["ttft_ms"].get<double>();
      if (comps[i].contains("avg_token_ms")) c.avg_token_ms = comps[i]["avg_token_ms"].get<double>();
      r.components[i] = c;
    }
    const auto& overall = j.at("overall");
    r.overall_ttft_ms = overall.at("ttft_ms").get<double>();
    r.overall_avg_frame_ms = overall.at("avg_frame_ms").get<double>();
    r.overall_total_s = overall.at("total_s").get<double>();
    r.audio_len_s = j.at("audio_len_s").get<double>();
    r.rtf = j.at("rtf").get<double>();
    r.first_audio_ms = j.at("first_audio_ms").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace speechrt
