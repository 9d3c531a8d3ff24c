#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace speechrt {

enum class Component { reasoner, backbone, decoder, codec_decoder };
enum class TimingMode { sequential, pipelined };
enum class ReportFormat { table, json };

std::string_view component_name(Component c) noexcept;
std::string_view mode_name(TimingMode m) noexcept;

struct ComponentTiming {
  Component component = Component::reasoner;
  std::optional<double> ttft_ms;  // absent for the codec decoder
  double avg_frame_ms = 0.0;      // busy time divided by emitted frames
  double total_s = 0.0;
  std::optional<double> avg_token_ms;  // reasoner only: time per response token

  friend bool operator==(const ComponentTiming&, const ComponentTiming&) = default;
};

struct LatencyReport {
  std::array<ComponentTiming, 4> components{{{Component::reasoner, {}, 0.0, 0.0, {}},
                                             {Component::backbone, {}, 0.0, 0.0, {}},
                                             {Component::decoder, {}, 0.0, 0.0, {}},
                                             {Component::codec_decoder, {}, 0.0, 0.0, {}}}};
  double overall_ttft_ms = 0.0;
  double overall_avg_frame_ms = 0.0;
  double overall_total_s = 0.0;
  double audio_len_s = 0.0;
  double rtf = 0.0;
  std::size_t frames = 0;
  std::size_t text_tokens = 0;
  TimingMode mode = TimingMode::sequential;
  // Wall-clock time from input receipt to the first decoded samples.
  double first_audio_ms = 0.0;

  ComponentTiming& at(Component c) { return components[static_cast<std::size_t>(c)]; }
  const ComponentTiming& at(Component c) const { return components[static_cast<std::size_t>(c)]; }

  friend bool operator==(const LatencyReport&, const LatencyReport&) = default;
};

// Exact quotient. Throws ZeroAudio when audio_s <= 0.
double compute_rtf(double generation_s, double audio_s);

// Fills the derived fields: overall TTFT as the sum of present component TTFTs,
// overall per-frame average, and rtf. `overall_total_s` is taken as given.
void finalize_report(LatencyReport& report);

// Empty when the report is consistent, otherwise a description of the first problem.
std::string check_report(const LatencyReport& report);

std::string emit_report(const LatencyReport& report, ReportFormat format);
// Inverse of emit_report(..., json). Throws FormatError.
LatencyReport parse_report(std::string_view json);

}  // namespace speechrt
