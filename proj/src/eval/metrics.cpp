#include "emo/eval/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "emo/error.hpp"
#include "emo/log.hpp"

namespace emo::eval {

MetricReport compute_metrics(const std::vector<int>& predictions,
                             const std::vector<int>& labels, std::size_t num_classes) {
  if (predictions.size() != labels.size())
    throw InvalidInput("metrics: " + std::to_string(predictions.size()) +
                       " predictions for " + std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw InvalidInput("metrics: no samples");
  const auto k_count = static_cast<int>(num_classes);
  MetricReport r;
  r.num_classes = num_classes;
  r.confusion.assign(num_classes * num_classes, 0);
  r.support.assign(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= k_count || p < 0 || p >= k_count)
      throw InvalidInput("metrics: class index out of range at position " + std::to_string(i));
    ++r.confusion[static_cast<std::size_t>(y) * num_classes + static_cast<std::size_t>(p)];
    ++r.support[static_cast<std::size_t>(y)];
    if (y == p) ++correct;
  }
  r.wa = static_cast<double>(correct) / static_cast<double>(labels.size());
  r.recall.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (r.support[k] == 0) {
      log_warning("metrics: class " + std::to_string(k) +
                  " has no test samples and is left out of UA");
      continue;
    }
    r.recall[k] = static_cast<double>(r.count(k, k)) / static_cast<double>(r.support[k]);
    recall_sum += r.recall[k];
    ++present;
  }
  r.ua = recall_sum / static_cast<double>(present);
  return r;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(sq / static_cast<double>(values.size()));
  return m;
}

}  // namespace emo::eval
