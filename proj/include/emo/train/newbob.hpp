#pragma once

#include <optional>

namespace emo::train {

enum class NewbobPhase { kHold, kDecay };

// Learning-rate schedule driven by the validation accuracy of each epoch. The
// rate is held while the accuracy keeps improving by at least `threshold`,
// then halved every epoch; a second stall during the decay phase halts.
struct NewbobState {
  double lr = 5e-5;
  NewbobPhase phase = NewbobPhase::kHold;
  std::optional<double> prev_metric;
  double threshold = 0.005;
  bool halt = false;
};

NewbobState newbob_init(double initial_lr, double threshold = 0.005);

// Returns the state for the next epoch. The first call only records the
// metric. InvalidInput when accuracy lies outside [0, 1].
NewbobState newbob_step(const NewbobState& state, double validation_accuracy);

}  // namespace emo::train
