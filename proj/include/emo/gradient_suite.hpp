#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emo/nn/gradcheck.hpp"

namespace emo {

struct NamedGradReport {
  std::string name;
  nn::GradCheckReport report;
};

// Finite-difference checks of every layer on small random problems, then of
// the whole two-branch model. Layers are held to `layer_tolerance`, the full
// model to `model_tolerance`.
std::vector<NamedGradReport> run_gradient_suite(std::uint64_t seed,
                                                double layer_tolerance = 1e-5,
                                                double model_tolerance = 1e-4);

}  // namespace emo
