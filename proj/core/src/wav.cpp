#include "speechrt/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "speechrt/errors.hpp"

namespace speechrt {

namespace {

template <class T>
void put(std::ostream& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <class T>
T get(const std::vector<unsigned char>& buf, std::size_t at) {
  if (at + sizeof(T) > buf.size()) throw FormatError("truncated WAV");
  std::make_unsigned_t<T> bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::make_unsigned_t<T>>(buf[at + i]) << (8 * i);
  return static_cast<T>(bits);
}

}  // namespace

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, 1);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put<std::uint16_t>(out, 2);
  put<std::uint16_t>(out, 16);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
  for (double s : wave.samples)
    put<std::int16_t>(out, static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0)));
  if (!out) throw FormatError("write failed for " + path.string());
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t at = 12;
  while (at + 8 <= buf.size()) {
    const std::string id(reinterpret_cast<const char*>(buf.data() + at), 4);
    const auto size = get<std::uint32_t>(buf, at + 4);
    const std::size_t body = at + 8;
    if (id == "fmt ") {
      format = get<std::uint16_t>(buf, body);
      channels = get<std::uint16_t>(buf, body + 2);
      rate = get<std::uint32_t>(buf, body + 4);
      bits = get<std::uint16_t>(buf, body + 14);
      if (format == 0xFFFE && size >= 26) format = get<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt || channels == 0) throw FormatError("data chunk before fmt chunk");
      const bool pcm16 = format == 1 && bits == 16;
      const bool f32 = format == 3 && bits == 32;
      if (!pcm16 && !f32) throw FormatError("only 16-bit PCM and 32-bit float WAV are supported");
      const std::size_t width = bits / 8;
      const std::size_t frames = std::min<std::size_t>(size, buf.size() - body) / (width * channels);
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(frames);
      for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t p = body + (f * channels + c) * width;
          acc += pcm16 ? std::max(get<std::int16_t>(buf, p) / 32767.0, -1.0)
                       : static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(buf, p)));
        }
        w.samples[f] = acc / channels;
      }
      return w;
    }
    at = body + size + (size & 1);
  }
  throw FormatError(path.string() + " has no data chunk");
}

void write_raw_f32(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (double s : wave.samples) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
}

}  // namespace speechrt
