#pragma once

#include <stdexcept>
#include <string>

namespace speechrt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPEECHRT_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

SPEECHRT_DEFINE_ERROR(RatioError);
SPEECHRT_DEFINE_ERROR(EmptyInput);
SPEECHRT_DEFINE_ERROR(MalformedSequence);
SPEECHRT_DEFINE_ERROR(ContextOverflow);
SPEECHRT_DEFINE_ERROR(LevelOutOfRange);
SPEECHRT_DEFINE_ERROR(DimensionMismatch);
SPEECHRT_DEFINE_ERROR(CodeOutOfRange);
SPEECHRT_DEFINE_ERROR(TooShort);
SPEECHRT_DEFINE_ERROR(ShapeMismatch);
SPEECHRT_DEFINE_ERROR(NonFiniteGradient);
SPEECHRT_DEFINE_ERROR(DivergenceDetected);
SPEECHRT_DEFINE_ERROR(ZeroAudio);
SPEECHRT_DEFINE_ERROR(ZeroVector);
SPEECHRT_DEFINE_ERROR(ConfigError);
SPEECHRT_DEFINE_ERROR(FormatError);

#undef SPEECHRT_DEFINE_ERROR

// Carries whatever timings were collected before a stage failed.
class PipelineFailure : public Error {
 public:
  PipelineFailure(const std::string& what, std::string partial_report)
      : Error("PipelineFailure: " + what), partial_report_(std::move(partial_report)) {}
  const std::string& partial_report() const noexcept { return partial_report_; }

 private:
  std::string partial_report_;
};

}  // namespace speechrt
