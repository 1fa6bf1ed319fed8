#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emo/matrix.hpp"

namespace emo::nn {

// A tensor whose analytic gradient is to be verified. `value` is perturbed in
// place and restored.
struct GradTarget {
  std::string name;
  Matrix* value = nullptr;
  const Matrix* analytic = nullptr;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_target;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  std::size_t entries_refined = 0;  // entries that needed a smaller step
  double tolerance = 0.0;
  bool passed = false;

  std::string summary() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Check at most this many entries per tensor (evenly strided); 0 = all.
  std::size_t max_entries_per_target = 0;
  // Five-point stencil (fourth-order truncation error) instead of the
  // two-point central difference.
  bool five_point = false;
  // Near a kink (ReLU, max) the estimates at h and h/2 disagree. The step is
  // then divided by 100 up to this many times until they agree.
  int kink_retries = 0;
};

// Compares each analytic gradient entry with the central difference
// (f(v + h) - f(v - h)) / 2h, or the five-point stencil, of `objective`, which must recompute the scalar
// from the current values without touching the analytic buffers.
GradCheckReport check_gradients(const std::function<double()>& objective,
                                const std::vector<GradTarget>& targets,
                                const GradCheckOptions& opts = {});

}  // namespace emo::nn
