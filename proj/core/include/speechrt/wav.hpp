#pragma once

#include <filesystem>

#include "speechrt/codec.hpp"

namespace speechrt {

// Mono 16-bit PCM. Samples are clamped to [-1, 1] before quantization.
void write_wav(const std::filesystem::path& path, const Waveform& wave);
// Reads 16-bit PCM or 32-bit float WAV; multi-channel input is averaged to mono.
// Throws FormatError.
Waveform read_wav(const std::filesystem::path& path);

// Headerless little-endian float32 samples.
void write_raw_f32(const std::filesystem::path& path, const Waveform& wave);

}  // namespace speechrt
