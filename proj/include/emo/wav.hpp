#pragma once

#include <string>

#include "emo/dsp/features.hpp"

namespace emo {

// Mono RIFF/WAVE with 16-bit PCM or 32-bit float samples. Multi-channel input
// is averaged to mono. Samples are returned in [-1, 1).
dsp::AudioSignal read_wav(const std::string& path);
// Writes 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::string& path, const dsp::AudioSignal& signal);

}  // namespace emo
