#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "emo/config.hpp"
#include "emo/eval/metrics.hpp"
#include "emo/model/model.hpp"
#include "emo/nn/params.hpp"

namespace emo::train {

using Split = std::vector<const model::Sample*>;

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 60;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  double initial_lr = 5e-5;
  double improve_threshold = 0.005;
  double validation_fraction = 0.1;
  double clip_norm = 0.0;  // global gradient L2 cap per batch; 0 disables

  void validate() const;
  void write(KeyValueConfig& kv) const;
  static TrainConfig read(const KeyValueConfig& kv);
};

// Plain gradient descent with a fixed momentum term:
// v <- momentum * v - lr * g, p <- p + v.
// Rescales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_gradients(nn::ParamSet& params, double max_norm);

class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}
  void step(nn::ParamSet& params, double lr);
  std::size_t steps() const { return steps_; }

 private:
  double momentum_;
  std::size_t steps_ = 0;
  std::map<std::string, Matrix> velocity_;
};

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

// One pass over a shuffled copy of `split` in mini-batches.
EpochStats train_epoch(model::TwoBranchModel& model, const Split& split, const TrainConfig& cfg,
                       double lr, SgdMomentum& optimizer, nn::Rng& rng);

struct SplitPredictions {
  std::vector<int> predicted;
  std::vector<int> labels;
  eval::MetricReport metrics;
};
SplitPredictions evaluate_split(model::TwoBranchModel& model, const Split& split);

struct HistoryRow {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_wa = 0.0;
  double val_ua = 0.0;
};

struct FitResult {
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  double best_val_wa = 0.0;
  bool halted = false;
};

struct FitOptions {
  // Replaces the validation WA handed to the scheduler (scripted metric tests).
  std::function<double(int epoch, double val_wa)> metric_override;
};

// Trains under the newbob schedule and leaves the best-validation parameters
// in `model`. Splits sharing an utterance id throw InvalidInput.
FitResult fit(model::TwoBranchModel& model, const Split& train, const Split& validation,
              const TrainConfig& cfg, const FitOptions& options = {});

// epoch,lr,train_loss,val_WA,val_UA
std::string history_csv(const std::vector<HistoryRow>& history);

// Deterministic Fisher-Yates shuffle.
template <typename T>
void shuffle_in_place(std::vector<T>& items, nn::Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace emo::train
