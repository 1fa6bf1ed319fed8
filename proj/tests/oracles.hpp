#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. None of them call into the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "emo/matrix.hpp"

namespace oracle {

// Textbook pipeline written out longhand: symmetric Hamming window, O(N^2)
// DFT of the zero-padded frame, triangular filters on the 1127 ln(1 + f/700)
// mel scale from 20 Hz to Nyquist, natural log with a 1e-10 floor.
inline std::vector<double> log_fbank(std::span<const double> frame, int sr, int n_mels) {
  const std::size_t len = frame.size();
  std::size_t nfft = 1;
  while (nfft < len) nfft *= 2;
  const double pi = std::numbers::pi;

  std::vector<double> x(nfft, 0.0);
  for (std::size_t j = 0; j < len; ++j) {
    const double w = len == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * pi * j / (len - 1.0));
    x[j] = frame[j] * w;
  }
  std::vector<double> power(nfft / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < nfft; ++j)
      acc += x[j] * std::polar(1.0, -2.0 * pi * static_cast<double>(k * j % nfft) / nfft);
    power[k] = std::norm(acc);
  }

  auto mel = [](double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); };
  const double lo = mel(20.0), hi = mel(sr / 2.0);
  std::vector<double> out(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    const double a = lo + (hi - lo) * m / (n_mels + 1);
    const double b = lo + (hi - lo) * (m + 1) / (n_mels + 1);
    const double c = lo + (hi - lo) * (m + 2) / (n_mels + 1);
    double e = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) {
      const double f = mel(static_cast<double>(k) * sr / nfft);
      double w = 0.0;
      if (f > a && f <= b) w = (f - a) / (b - a);
      else if (f > b && f < c) w = (c - f) / (c - b);
      e += w * power[k];
    }
    out[m] = std::log(std::max(e, 1e-10));
  }
  return out;
}

// Cross-entropy over scale * cos(theta_k) computed from scratch.
inline double normalised_ce(const emo::Matrix& w, const emo::Matrix& x, std::size_t label,
                            double scale) {
  std::vector<double> logits(w.rows());
  for (std::size_t k = 0; k < w.rows(); ++k) {
    double n2 = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) {
      n2 += w(k, c) * w(k, c);
      dot += w(k, c) * x(0, c);
    }
    logits[k] = scale * dot / std::sqrt(n2);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return -(logits[label] - mx - std::log(z));
}

// WA and UA by counting each class separately.
inline std::pair<double, double> wa_ua(const std::vector<int>& pred, const std::vector<int>& truth,
                                       int k_count) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  double recall_sum = 0.0;
  int present = 0;
  for (int k = 0; k < k_count; ++k) {
    std::size_t n = 0, ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != k) continue;
      ++n;
      ok += pred[i] == k;
    }
    if (n == 0) continue;
    recall_sum += static_cast<double>(ok) / static_cast<double>(n);
    ++present;
  }
  return {static_cast<double>(hits) / static_cast<double>(truth.size()), recall_sum / present};
}

}  // namespace oracle
