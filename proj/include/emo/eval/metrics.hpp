#pragma once

#include <cstddef>
#include <vector>

namespace emo::eval {

struct MetricReport {
  double wa = 0.0;  // trace / total
  double ua = 0.0;  // mean recall over classes with support
  std::size_t num_classes = 0;
  // confusion[true * K + predicted]
  std::vector<std::size_t> confusion;
  std::vector<std::size_t> support;
  std::vector<double> recall;  // NaN for classes without support

  std::size_t count(std::size_t truth, std::size_t predicted) const {
    return confusion[truth * num_classes + predicted];
  }
};

// Classes with zero support are left out of UA with a warning.
MetricReport compute_metrics(const std::vector<int>& predictions,
                             const std::vector<int>& labels, std::size_t num_classes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace emo::eval
