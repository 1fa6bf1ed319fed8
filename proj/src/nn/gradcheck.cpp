#include "emo/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "emo/error.hpp"

namespace emo::nn {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error
     << " tol=" << tolerance << " entries=" << entries_checked;
  if (entries_refined > 0) os << " refined=" << entries_refined;
  if (!worst_target.empty())
    os << " worst=" << worst_target << "[" << worst_index << "] analytic=" << worst_analytic
       << " numeric=" << worst_numeric;
  return os.str();
}

GradCheckReport check_gradients(const std::function<double()>& objective,
                                const std::vector<GradTarget>& targets,
                                const GradCheckOptions& opts) {
  GradCheckReport report;
  report.tolerance = opts.tolerance;
  for (const auto& target : targets) {
    if (target.value == nullptr || target.analytic == nullptr)
      throw InvalidInput("gradient target '" + target.name + "' is unbound");
    if (target.value->size() != target.analytic->size())
      throw ShapeError("gradient target '" + target.name + "' shape mismatch");
    const std::size_t n = target.value->size();
    const std::size_t stride =
        opts.max_entries_per_target == 0 || n <= opts.max_entries_per_target
            ? 1
            : (n + opts.max_entries_per_target - 1) / opts.max_entries_per_target;
    for (std::size_t i = 0; i < n; i += stride) {
      double& v = target.value->data()[i];
      const double saved = v;
      auto at = [&](double offset) {
        v = saved + offset;
        const double f = objective();
        v = saved;
        return f;
      };
      auto estimate = [&](double h) {
        return opts.five_point
                   ? (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
                   : (at(h) - at(-h)) / (2.0 * h);
      };
      double h = opts.step;
      double numeric = estimate(h);
      const double f0 = opts.kink_retries > 0 ? objective() : 0.0;
      for (int retry = 0; retry < opts.kink_retries; ++retry) {
        const double half = estimate(0.5 * h);
        const double scale = std::max({std::abs(numeric), std::abs(half), opts.floor});
        // Differences below the rounding noise of the quotients are not kinks.
        const double noise = 10.0 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(f0), 1.0) / (0.5 * h);
        if (std::abs(numeric - half) <= std::max(0.1 * opts.tolerance * scale, noise)) break;
        if (retry == 0) ++report.entries_refined;
        h *= 0.01;
        numeric = estimate(h);
      }
      const double analytic = target.analytic->data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (!(rel <= report.max_rel_error)) {
        report.max_rel_error = rel;
        report.worst_target = target.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

}  // namespace emo::nn
