#include "emo/train/newbob.hpp"

#include <cmath>
#include <string>

#include "emo/config.hpp"
#include "emo/error.hpp"

namespace emo::train {

NewbobState newbob_init(double initial_lr, double threshold) {
  if (!(initial_lr > 0.0)) throw InvalidConfig("newbob: initial lr must be positive");
  if (!std::isfinite(threshold)) throw InvalidConfig("newbob: threshold must be finite");
  NewbobState s;
  s.lr = initial_lr;
  s.threshold = threshold;
  return s;
}

NewbobState newbob_step(const NewbobState& state, double validation_accuracy) {
  if (!(validation_accuracy >= 0.0 && validation_accuracy <= 1.0))
    throw InvalidInput("newbob: accuracy " + format_double(validation_accuracy) +
                       " is outside [0, 1]");
  NewbobState next = state;
  next.prev_metric = validation_accuracy;
  if (state.halt || !state.prev_metric) return next;

  const bool stalled = validation_accuracy - *state.prev_metric < state.threshold;
  if (state.phase == NewbobPhase::kHold) {
    if (stalled) {
      next.phase = NewbobPhase::kDecay;
      next.lr = state.lr * 0.5;
    }
  } else {
    next.lr = state.lr * 0.5;
    if (stalled) next.halt = true;
  }
  return next;
}

}  // namespace emo::train
