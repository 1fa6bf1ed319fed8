#include "emo/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "emo/binary.hpp"
#include "emo/error.hpp"

namespace emo {

namespace {

std::uint16_t read_u16(std::istream& is, const std::string& path) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw FormatError(path + ": truncated WAV");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

std::string read_tag(std::istream& is, const std::string& path) {
  char tag[4];
  if (!is.read(tag, 4)) throw FormatError(path + ": truncated WAV");
  return std::string(tag, 4);
}

}  // namespace

dsp::AudioSignal read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingData("cannot open audio file " + path);
  if (read_tag(is, path) != "RIFF") throw FormatError(path + ": not a RIFF file");
  binary::read_u32(is, path);
  if (read_tag(is, path) != "WAVE") throw FormatError(path + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::string tag = read_tag(is, path);
    const std::uint32_t size = binary::read_u32(is, path);
    if (tag == "fmt ") {
      format = read_u16(is, path);
      channels = read_u16(is, path);
      rate = binary::read_u32(is, path);
      binary::read_u32(is, path);  // byte rate
      read_u16(is, path);          // block align
      bits = read_u16(is, path);
      if (size > 16) is.ignore(size - 16);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw FormatError(path + ": data chunk before fmt chunk");
      if (channels == 0) throw FormatError(path + ": zero channels");
      const bool pcm16 = format == 1 && bits == 16;
      const bool f32 = format == 3 && bits == 32;
      if (!pcm16 && !f32)
        throw FormatError(path + ": only 16-bit PCM and 32-bit float WAV are supported");
      const std::size_t bytes_per = bits / 8;
      const std::size_t frames = size / (bytes_per * channels);
      dsp::AudioSignal sig;
      sig.sample_rate = static_cast<int>(rate);
      sig.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          if (pcm16) {
            acc += static_cast<std::int16_t>(read_u16(is, path)) / 32768.0;
          } else {
            acc += binary::read_f32(is, path);
          }
        }
        sig.samples[i] = acc / channels;
      }
      return sig;
    } else {
      is.ignore(size + (size & 1u));
      if (!is) throw FormatError(path + ": no data chunk");
    }
  }
}

void write_wav(const std::string& path, const dsp::AudioSignal& signal) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingData("cannot open " + path + " for writing");
  const auto n = static_cast<std::uint32_t>(signal.samples.size());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  binary::write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binary::write_u32(os, 16);
  write_u16(os, 1);
  write_u16(os, 1);
  binary::write_u32(os, static_cast<std::uint32_t>(signal.sample_rate));
  binary::write_u32(os, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  binary::write_u32(os, data_bytes);
  for (double s : signal.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(c * 32767.0));
    write_u16(os, static_cast<std::uint16_t>(q));
  }
  if (!os) throw FormatError("write failed for " + path);
}

}  // namespace emo
