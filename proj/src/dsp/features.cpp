#include "emo/dsp/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "emo/binary.hpp"
#include "emo/error.hpp"
#include "emo/log.hpp"

namespace emo::dsp {

const char* stream_tag_name(StreamTag tag) {
  switch (tag) {
    case StreamTag::kFbk25: return "FBK25";
    case StreamTag::kFbk250: return "FBK250";
    case StreamTag::kPitch: return "PITCH";
    case StreamTag::kDelta: return "DELTA";
    case StreamTag::kCombined: return "COMBINED";
    case StreamTag::kWords: return "WORDS";
  }
  return "?";
}

void FeatureMatrix::validate() const {
  if (values.rows() == 0)
    throw InvalidInput(std::string(stream_tag_name(tag)) + " stream has no frames");
  if (!values.all_finite())
    throw InvalidInput(std::string(stream_tag_name(tag)) + " stream has non-finite values");
  if ((tag == StreamTag::kFbk25 || tag == StreamTag::kFbk250) && values.cols() != 40)
    throw InvalidInput("FBK stream must be 40-d, got " + std::to_string(values.cols()));
}

// ---------------------------------------------------------------------------
// Framing

std::size_t shift_in_samples(int sample_rate, const FramingSpec& spec) {
  if (sample_rate <= 0) throw InvalidSpec("sample rate must be positive");
  if (!(spec.frame_shift_ms > 0.0) || spec.frame_length_ms < spec.frame_shift_ms)
    throw InvalidSpec("need frame_length_ms >= frame_shift_ms > 0");
  const double shift = sample_rate * spec.frame_shift_ms / 1000.0;
  const double rounded = std::round(shift);
  if (rounded < 1.0 || std::abs(shift - rounded) > 1e-9)
    throw InvalidSpec("frame shift of " + std::to_string(spec.frame_shift_ms) +
                      " ms is not a whole number of samples at " +
                      std::to_string(sample_rate) + " Hz");
  return static_cast<std::size_t>(rounded);
}

std::size_t length_in_samples(int sample_rate, const FramingSpec& spec) {
  shift_in_samples(sample_rate, spec);
  return static_cast<std::size_t>(std::lround(sample_rate * spec.frame_length_ms / 1000.0));
}

std::size_t num_frames(std::size_t n_samples, std::size_t shift_samples) {
  return n_samples / shift_samples;
}

std::ptrdiff_t frame_start(std::size_t t, std::size_t shift_samples,
                           std::size_t length_samples) {
  return static_cast<std::ptrdiff_t>(t * shift_samples) -
         static_cast<std::ptrdiff_t>(length_samples / 2);
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t k = i % period;
  if (k < 0) k += period;
  if (k >= static_cast<std::ptrdiff_t>(n)) k = period - k;
  return static_cast<std::size_t>(k);
}

Matrix frame_signal(const AudioSignal& signal, const FramingSpec& spec) {
  const std::size_t shift = shift_in_samples(signal.sample_rate, spec);
  if (signal.samples.empty()) throw InvalidInput("cannot frame an empty signal");
  const std::size_t len = length_in_samples(signal.sample_rate, spec);
  const std::size_t n = signal.samples.size();
  const std::size_t t_count = num_frames(n, shift);
  if (t_count == 0)
    throw InvalidInput("signal of " + std::to_string(n) +
                       " samples is shorter than one frame shift");
  Matrix frames(t_count, len);
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::ptrdiff_t start = frame_start(t, shift, len);
    auto row = frames.row(t);
    for (std::size_t j = 0; j < len; ++j) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(j);
      row[j] = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n))
                   ? signal.samples[static_cast<std::size_t>(idx)]
                   : signal.samples[reflect_index(idx, n)];
    }
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Spectra

namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
  }
  ~RealFft() { fftw_destroy_plan(plan_); }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // |X_k|^2 for k = 0..n/2.
  void power_spectrum(std::vector<double>& buf, std::vector<double>& power) const {
    std::vector<fftw_complex> out(n_ / 2 + 1);
    fftw_execute_dft_r2c(plan_, buf.data(), out.data());
    power.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k)
      power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

const RealFft& fft_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

}  // namespace

std::size_t fft_size_for(std::size_t frame_length) {
  if (frame_length == 0) throw InvalidSpec("zero frame length");
  if (frame_length > kMaxFftSize)
    throw InvalidSpec("frame length " + std::to_string(frame_length) +
                      " exceeds the largest supported FFT size");
  std::size_t n = 1;
  while (n < frame_length) n <<= 1;
  return n;
}

double mel_scale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double inverse_mel_scale(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

Matrix mel_filterbank(int n_mels, std::size_t fft_size, int sample_rate, double low_hz,
                      double high_hz) {
  if (n_mels < 1) throw InvalidSpec("need at least one mel filter");
  const double nyquist = 0.5 * sample_rate;
  if (high_hz <= 0.0) high_hz = nyquist;
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist))
    throw InvalidSpec("mel range must satisfy 0 <= low < high <= Nyquist");
  const double mel_lo = mel_scale(low_hz);
  const double mel_hi = mel_scale(high_hz);
  const double step = (mel_hi - mel_lo) / (n_mels + 1);
  const std::size_t n_bins = fft_size / 2 + 1;
  Matrix weights(static_cast<std::size_t>(n_mels), n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = mel_lo + step * m;
    const double center = left + step;
    const double right = center + step;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double mel = mel_scale(static_cast<double>(k) * sample_rate /
                                   static_cast<double>(fft_size));
      double w = 0.0;
      if (mel > left && mel <= center)
        w = (mel - left) / (center - left);
      else if (mel > center && mel < right)
        w = (right - mel) / (right - center);
      weights(static_cast<std::size_t>(m), k) = w;
    }
  }
  return weights;
}

FeatureMatrix log_mel_fbank(const Matrix& frames, int sample_rate, int n_mels,
                            double frame_shift_ms) {
  if (frames.rows() == 0) throw InvalidInput("no frames to analyse");
  const std::size_t len = frames.cols();
  const std::size_t nfft = fft_size_for(len);
  const RealFft& fft = fft_for(nfft);
  const Matrix fbank = mel_filterbank(n_mels, nfft, sample_rate);
  const std::vector<double> window = hamming(len);

  FeatureMatrix out{Matrix(frames.rows(), static_cast<std::size_t>(n_mels)),
                    frame_shift_ms, StreamTag::kCombined};
  std::vector<double> buf(nfft);
  std::vector<double> power;
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    auto frame = frames.row(t);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t j = 0; j < len; ++j) buf[j] = frame[j] * window[j];
    fft.power_spectrum(buf, power);
    for (int m = 0; m < n_mels; ++m) {
      auto w = fbank.row(static_cast<std::size_t>(m));
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += w[k] * power[k];
      out.values(t, static_cast<std::size_t>(m)) = std::log(std::max(e, kLogFloor));
    }
  }
  if (n_mels == 40) {
    const double len_ms = 1000.0 * static_cast<double>(len) / sample_rate;
    out.tag = len_ms > 100.0 ? StreamTag::kFbk250 : StreamTag::kFbk25;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pitch

std::vector<PitchFrame> track_pitch(const AudioSignal& signal, const FramingSpec& spec,
                                    const PitchOptions& opts) {
  const std::size_t shift = shift_in_samples(signal.sample_rate, spec);
  const std::size_t len = length_in_samples(signal.sample_rate, spec);
  const std::size_t n = signal.samples.size();
  if (n < len)
    throw InvalidInput("signal of " + std::to_string(n) +
                       " samples is shorter than one pitch frame (" +
                       std::to_string(len) + ")");
  if (!(opts.min_f0 > 0.0 && opts.max_f0 > opts.min_f0))
    throw InvalidSpec("pitch search range must satisfy 0 < min_f0 < max_f0");

  const double sr = signal.sample_rate;
  const auto min_lag = static_cast<std::size_t>(std::max(1.0, std::floor(sr / opts.max_f0)));
  const auto max_lag = static_cast<std::size_t>(std::ceil(sr / opts.min_f0));
  const std::size_t n_lags = max_lag - min_lag + 1;
  const std::size_t t_count = num_frames(n, shift);

  std::vector<double> log_lag(n_lags);
  for (std::size_t i = 0; i < n_lags; ++i)
    log_lag[i] = std::log(static_cast<double>(min_lag + i));

  // nccf[t * n_lags + i] for lag min_lag + i.
  std::vector<double> nccf(t_count * n_lags, 0.0);
  std::vector<double> seg(len + max_lag);
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::ptrdiff_t start = frame_start(t, shift, len);
    double mean = 0.0;
    for (std::size_t j = 0; j < seg.size(); ++j) {
      seg[j] = signal.samples[reflect_index(start + static_cast<std::ptrdiff_t>(j), n)];
      mean += seg[j];
    }
    mean /= static_cast<double>(seg.size());
    for (double& v : seg) v -= mean;

    double e1 = 0.0;
    for (std::size_t j = 0; j < len; ++j) e1 += seg[j] * seg[j];
    for (std::size_t i = 0; i < n_lags; ++i) {
      const std::size_t lag = min_lag + i;
      double cross = 0.0, e2 = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        cross += seg[j] * seg[j + lag];
        e2 += seg[j + lag] * seg[j + lag];
      }
      const double denom = e1 * e2;
      nccf[t * n_lags + i] = denom > 0.0 ? cross / std::sqrt(denom) : 0.0;
    }
  }

  // Viterbi over lag candidates.
  std::vector<double> cost(n_lags), next(n_lags);
  std::vector<std::size_t> back(t_count * n_lags, 0);
  auto local = [&](std::size_t t, std::size_t i) {
    return 1.0 - nccf[t * n_lags + i] + opts.lag_bias * (log_lag[i] - log_lag[0]);
  };
  for (std::size_t i = 0; i < n_lags; ++i) cost[i] = local(0, i);
  for (std::size_t t = 1; t < t_count; ++t) {
    for (std::size_t j = 0; j < n_lags; ++j) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n_lags; ++i) {
        const double c = cost[i] + opts.transition_weight * std::abs(log_lag[j] - log_lag[i]);
        if (c < best) {
          best = c;
          arg = i;
        }
      }
      next[j] = best + local(t, j);
      back[t * n_lags + j] = arg;
    }
    std::swap(cost, next);
  }
  std::vector<std::size_t> path(t_count);
  path[t_count - 1] = static_cast<std::size_t>(
      std::min_element(cost.begin(), cost.end()) - cost.begin());
  for (std::size_t t = t_count - 1; t > 0; --t) path[t - 1] = back[t * n_lags + path[t]];

  std::vector<PitchFrame> track(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::size_t i = path[t];
    const double* row = &nccf[t * n_lags];
    double lag = static_cast<double>(min_lag + i);
    if (i > 0 && i + 1 < n_lags) {
      const double a = row[i - 1], b = row[i], c = row[i + 1];
      const double curvature = a - 2.0 * b + c;
      if (curvature < 0.0) lag += std::clamp(0.5 * (a - c) / curvature, -0.5, 0.5);
    }
    track[t].log_pitch = std::log(sr / lag);
    track[t].pov = std::clamp(row[i], 0.0, 1.0);
  }
  return track;
}

std::vector<double> subtract_weighted_mean(const std::vector<PitchFrame>& track,
                                           std::size_t half_window) {
  const std::size_t t_count = track.size();
  std::vector<double> out(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::size_t lo = t > half_window ? t - half_window : 0;
    const std::size_t hi = std::min(t_count - 1, t + half_window);
    double wsum = 0.0, wx = 0.0, plain = 0.0;
    for (std::size_t s = lo; s <= hi; ++s) {
      wsum += track[s].pov;
      wx += track[s].pov * track[s].log_pitch;
      plain += track[s].log_pitch;
    }
    const double mean =
        wsum > 1e-8 ? wx / wsum : plain / static_cast<double>(hi - lo + 1);
    out[t] = track[t].log_pitch - mean;
  }
  return out;
}

FeatureMatrix extract_pitch(const AudioSignal& signal, const FramingSpec& spec,
                            const PitchOptions& opts) {
  const auto track = track_pitch(signal, spec, opts);
  const auto half = static_cast<std::size_t>(
      std::lround(0.5 * opts.mean_window_s * 1000.0 / spec.frame_shift_ms));
  const auto values = subtract_weighted_mean(track, half);
  FeatureMatrix out{Matrix(values.size(), 1, values), spec.frame_shift_ms,
                    StreamTag::kPitch};
  return out;
}

// ---------------------------------------------------------------------------
// Deltas and normalisation

FeatureMatrix append_deltas(const FeatureMatrix& feats) {
  const Matrix& x = feats.values;
  const std::size_t t_count = x.rows(), d = x.cols();
  if (t_count == 0) throw InvalidInput("cannot take deltas of an empty stream");
  constexpr int kWindow = 2;
  constexpr double kNorm = 2.0 * (1 * 1 + 2 * 2);
  const auto last = static_cast<std::ptrdiff_t>(t_count) - 1;
  Matrix out(t_count, 2 * d);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t c = 0; c < d; ++c) out(t, c) = x(t, c);
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int k = 1; k <= kWindow; ++k) {
        const auto ti = static_cast<std::ptrdiff_t>(t);
        const auto fwd = static_cast<std::size_t>(std::min(ti + k, last));
        const auto bwd = static_cast<std::size_t>(std::max<std::ptrdiff_t>(ti - k, 0));
        acc += k * (x(fwd, c) - x(bwd, c));
      }
      out(t, d + c) = acc / kNorm;
    }
  }
  return {std::move(out), feats.frame_shift_ms, StreamTag::kDelta};
}

void normalize_features(std::vector<FeatureMatrix>& feats,
                        const std::vector<std::string>& dialogue_ids) {
  if (feats.size() != dialogue_ids.size())
    throw InvalidInput("every utterance needs exactly one dialogue id");
  std::map<std::string, std::vector<std::size_t>> by_dialogue;
  for (std::size_t i = 0; i < feats.size(); ++i) by_dialogue[dialogue_ids[i]].push_back(i);

  for (const auto& [dialogue, members] : by_dialogue) {
    const std::size_t d = feats[members.front()].dim();
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    double count = 0.0;
    for (std::size_t i : members) {
      const Matrix& m = feats[i].values;
      if (m.cols() != d)
        throw ShapeError("dialogue " + dialogue + " mixes feature dimensions");
      for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t c = 0; c < d; ++c) sum[c] += m(t, c);
      count += static_cast<double>(m.rows());
    }
    std::vector<double> mean(d);
    for (std::size_t c = 0; c < d; ++c) mean[c] = sum[c] / count;
    for (std::size_t i : members) {
      const Matrix& m = feats[i].values;
      for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t c = 0; c < d; ++c) {
          const double dev = m(t, c) - mean[c];
          sq[c] += dev * dev;
        }
    }
    std::vector<double> scale(d, 1.0);
    for (std::size_t c = 0; c < d; ++c) {
      const double sd = std::sqrt(sq[c] / count);
      if (sd > 1e-12 * std::max(1.0, std::abs(mean[c]))) {
        scale[c] = 1.0 / sd;
      } else {
        log_warning("dialogue " + dialogue + ": dimension " + std::to_string(c) +
                    " is constant, passing through unscaled");
      }
    }
    for (std::size_t i : members) {
      Matrix& m = feats[i].values;
      std::vector<double> umean(d, 0.0);
      for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t c = 0; c < d; ++c) {
          m(t, c) *= scale[c];
          umean[c] += m(t, c);
        }
      for (std::size_t c = 0; c < d; ++c) umean[c] /= static_cast<double>(m.rows());
      for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t c = 0; c < d; ++c) m(t, c) -= umean[c];
    }
  }
}

AudioStreams compute_audio_streams(const AudioSignal& signal,
                                   const PitchOptions& pitch_opts) {
  const FramingSpec short_spec = FramingSpec::short_term();
  const FramingSpec long_spec = FramingSpec::long_term();
  FeatureMatrix fbk25 =
      log_mel_fbank(frame_signal(signal, short_spec), signal.sample_rate, 40);
  FeatureMatrix fbk250 =
      log_mel_fbank(frame_signal(signal, long_spec), signal.sample_rate, 40);
  FeatureMatrix pitch = extract_pitch(signal, short_spec, pitch_opts);
  if (fbk25.num_frames() != pitch.num_frames() || fbk25.num_frames() != fbk250.num_frames())
    throw ShapeError("audio streams disagree on frame count");
  const Matrix* parts[] = {&fbk25.values, &pitch.values};
  FeatureMatrix base{hconcat(parts), short_spec.frame_shift_ms, StreamTag::kCombined};
  FeatureMatrix audio25 = append_deltas(base);
  audio25.tag = StreamTag::kCombined;
  return {std::move(audio25), std::move(fbk250)};
}

// ---------------------------------------------------------------------------
// Feature files

namespace {
constexpr char kFeatureMagic[5] = "EMOF";
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

void write_feature_file(const std::string& path, const FeatureMatrix& feats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingData("cannot open " + path + " for writing");
  binary::write_magic(os, kFeatureMagic);
  binary::write_u32(os, kFeatureVersion);
  binary::write_u32(os, static_cast<std::uint32_t>(feats.values.rows()));
  binary::write_u32(os, static_cast<std::uint32_t>(feats.values.cols()));
  binary::write_f32(os, static_cast<float>(feats.frame_shift_ms));
  for (double v : feats.values.values()) binary::write_f32(os, static_cast<float>(v));
  if (!os) throw FormatError("write failed for " + path);
}

FeatureMatrix read_feature_file(const std::string& path, StreamTag tag) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingData("cannot open feature file " + path);
  binary::expect_magic(is, kFeatureMagic, path);
  const std::uint32_t version = binary::read_u32(is, path);
  if (version != kFeatureVersion)
    throw FormatError(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t rows = binary::read_u32(is, path);
  const std::uint32_t cols = binary::read_u32(is, path);
  const float shift = binary::read_f32(is, path);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = binary::read_f32(is, path);
  return {std::move(m), shift, tag};
}

}  // namespace emo::dsp
