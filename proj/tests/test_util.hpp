#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "emo/dsp/features.hpp"
#include "emo/matrix.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("emo_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline emo::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  emo::Matrix m(rows, cols);
  for (double& v : m.values()) v = u(rng);
  return m;
}

inline emo::dsp::AudioSignal sine(double hz, double seconds, int sample_rate = 16000,
                                  double amplitude = 0.5) {
  emo::dsp::AudioSignal s;
  s.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(seconds * sample_rate);
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    s.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) /
                                        sample_rate);
  return s;
}

}  // namespace testutil
