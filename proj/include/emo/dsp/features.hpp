#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "emo/matrix.hpp"

namespace emo::dsp {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 16000;
};

enum class Padding { kReflect };

struct FramingSpec {
  double frame_shift_ms = 10.0;
  double frame_length_ms = 25.0;
  Padding padding = Padding::kReflect;

  static FramingSpec short_term() { return {10.0, 25.0, Padding::kReflect}; }
  static FramingSpec long_term() { return {10.0, 250.0, Padding::kReflect}; }
};

enum class StreamTag { kFbk25, kFbk250, kPitch, kDelta, kCombined, kWords };

const char* stream_tag_name(StreamTag tag);

struct FeatureMatrix {
  Matrix values;  // T x D
  double frame_shift_ms = 10.0;
  StreamTag tag = StreamTag::kCombined;

  std::size_t num_frames() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
  // Throws InvalidInput when T == 0, entries are non-finite, or an FBK stream
  // is not 40-d.
  void validate() const;
};

struct PitchFrame {
  double log_pitch = 0.0;
  double pov = 0.0;
};

struct PitchOptions {
  double min_f0 = 60.0;
  double max_f0 = 400.0;
  // Weight on |delta log lag| between consecutive frames in the Viterbi pass.
  double transition_weight = 0.2;
  // Per-frame cost added per unit log(lag / min_lag); breaks ties between a
  // period and its multiples in favour of the shortest.
  double lag_bias = 0.02;
  double mean_window_s = 1.5;
};

// Samples per frame shift; throws InvalidSpec unless it is a positive integer.
std::size_t shift_in_samples(int sample_rate, const FramingSpec& spec);
std::size_t length_in_samples(int sample_rate, const FramingSpec& spec);
std::size_t num_frames(std::size_t n_samples, std::size_t shift_samples);
// First sample index (possibly negative) of frame t.
std::ptrdiff_t frame_start(std::size_t t, std::size_t shift_samples,
                           std::size_t length_samples);
// Maps any integer index into [0, n) by mirror reflection about the ends
// (edge samples are not repeated).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

// T x L matrix of frames centred on t * shift, reflect-padded at both ends.
Matrix frame_signal(const AudioSignal& signal, const FramingSpec& spec);

std::size_t fft_size_for(std::size_t frame_length);
// n_mels x (fft_size/2 + 1) triangular weights, evenly spaced on the mel scale
// between low_hz and high_hz (high_hz <= 0 means Nyquist).
Matrix mel_filterbank(int n_mels, std::size_t fft_size, int sample_rate,
                      double low_hz = 20.0, double high_hz = 0.0);
double mel_scale(double hz);
double inverse_mel_scale(double mel);

constexpr double kLogFloor = 1e-10;
constexpr std::size_t kMaxFftSize = std::size_t{1} << 20;

FeatureMatrix log_mel_fbank(const Matrix& frames, int sample_rate, int n_mels = 40,
                            double frame_shift_ms = 10.0);

// Raw NCCF + Viterbi track: log Hz of the chosen period and the clamped NCCF
// at that period, one entry per 10 ms frame.
std::vector<PitchFrame> track_pitch(const AudioSignal& signal, const FramingSpec& spec,
                                    const PitchOptions& opts = {});
// Subtracts the POV-weighted mean over a sliding window centred on each frame.
std::vector<double> subtract_weighted_mean(const std::vector<PitchFrame>& track,
                                           std::size_t half_window);
// T x 1 mean-subtracted log pitch.
FeatureMatrix extract_pitch(const AudioSignal& signal, const FramingSpec& spec,
                            const PitchOptions& opts = {});

FeatureMatrix append_deltas(const FeatureMatrix& feats);

// Per dialogue and dimension: divide by the standard deviation over all frames
// of the dialogue, then subtract each utterance's own mean. dialogue_ids[i]
// names the dialogue of feats[i].
void normalize_features(std::vector<FeatureMatrix>& feats,
                        const std::vector<std::string>& dialogue_ids);

struct AudioStreams {
  FeatureMatrix audio25;  // FBK25 + pitch + deltas, 82-d
  FeatureMatrix fbk250;   // 40-d
};

AudioStreams compute_audio_streams(const AudioSignal& signal,
                                   const PitchOptions& pitch_opts = {});

// Little-endian container: "EMOF", u32 version, u32 T, u32 D, f32 shift, then
// T x D f32 row-major.
void write_feature_file(const std::string& path, const FeatureMatrix& feats);
FeatureMatrix read_feature_file(const std::string& path, StreamTag tag);

}  // namespace emo::dsp
