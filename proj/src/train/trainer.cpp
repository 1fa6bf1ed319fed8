#include "emo/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "emo/error.hpp"
#include "emo/log.hpp"
#include "emo/train/newbob.hpp"

namespace emo::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidConfig("train.batch_size must be at least 1");
  if (max_epochs < 1) throw InvalidConfig("train.max_epochs must be at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("train.momentum must be in [0, 1)");
  if (!(initial_lr > 0.0)) throw InvalidConfig("train.lr must be positive");
  if (!std::isfinite(improve_threshold)) throw InvalidConfig("train.improve_threshold must be finite");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw InvalidConfig("train.validation_fraction must be in (0, 1)");
  if (!(clip_norm >= 0.0)) throw InvalidConfig("train.clip_norm must be non-negative");
}

void TrainConfig::write(KeyValueConfig& kv) const {
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.max_epochs", std::to_string(max_epochs));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.momentum", format_double(momentum));
  kv.set("train.lr", format_double(initial_lr));
  kv.set("train.improve_threshold", format_double(improve_threshold));
  kv.set("train.validation_fraction", format_double(validation_fraction));
  kv.set("train.clip_norm", format_double(clip_norm));
}

TrainConfig TrainConfig::read(const KeyValueConfig& kv) {
  TrainConfig c;
  c.batch_size = static_cast<int>(kv.get_int("train.batch_size", c.batch_size));
  c.max_epochs = static_cast<int>(kv.get_int("train.max_epochs", c.max_epochs));
  const long seed = kv.get_int("train.seed", static_cast<long>(c.seed));
  if (seed < 0) throw InvalidConfig("train.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.momentum = kv.get_double("train.momentum", c.momentum);
  c.initial_lr = kv.get_double("train.lr", c.initial_lr);
  c.improve_threshold = kv.get_double("train.improve_threshold", c.improve_threshold);
  c.validation_fraction = kv.get_double("train.validation_fraction", c.validation_fraction);
  c.clip_norm = kv.get_double("train.clip_norm", c.clip_norm);
  c.validate();
  return c;
}

double clip_gradients(nn::ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, p] : params.items())
    for (double g : p.grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& [name, p] : params.items())
      for (double& g : p.grad.values()) g *= k;
  }
  return norm;
}

void SgdMomentum::step(nn::ParamSet& params, double lr) {
  ++steps_;
  for (auto& [name, p] : params.items()) {
    auto it = velocity_.find(name);
    if (it == velocity_.end())
      it = velocity_.emplace(name, Matrix(p.value.rows(), p.value.cols(), 0.0)).first;
    double* v = it->second.data();
    double* w = p.value.data();
    const double* g = p.grad.data();
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = momentum_ * v[i] - lr * g[i];
      w[i] += v[i];
    }
  }
}

EpochStats train_epoch(model::TwoBranchModel& model, const Split& split, const TrainConfig& cfg,
                       double lr, SgdMomentum& optimizer, nn::Rng& rng) {
  if (split.empty()) throw InvalidInput("train_epoch: empty training split");
  Split order = split;
  shuffle_in_place(order, rng);

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(order.size(), start + batch);
    const double scale = 1.0 / static_cast<double>(end - start);
    model.params().zero_grads();
    model.set_training_step(optimizer.steps());
    for (std::size_t i = start; i < end; ++i) {
      const model::LossParts l = model.forward_backward(*order[i], true, &rng, scale);
      loss_sum += l.total();
      if (l.predicted == order[i]->label) ++correct;
    }
    if (cfg.clip_norm > 0.0) clip_gradients(model.params(), cfg.clip_norm);
    optimizer.step(model.params(), lr);
  }
  EpochStats st;
  st.mean_loss = loss_sum / static_cast<double>(order.size());
  st.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
  return st;
}

SplitPredictions evaluate_split(model::TwoBranchModel& model, const Split& split) {
  if (split.empty()) throw InvalidInput("evaluate: empty split");
  SplitPredictions out;
  out.predicted.reserve(split.size());
  out.labels.reserve(split.size());
  for (const model::Sample* s : split) {
    out.predicted.push_back(model.predict(*s).label);
    out.labels.push_back(s->label);
  }
  out.metrics = eval::compute_metrics(
      out.predicted, out.labels, static_cast<std::size_t>(model.config().fusion.n_classes));
  return out;
}

FitResult fit(model::TwoBranchModel& model, const Split& train, const Split& validation,
              const TrainConfig& cfg, const FitOptions& options) {
  cfg.validate();
  if (train.empty()) throw InvalidInput("fit: empty training split");
  if (validation.empty()) throw InvalidInput("fit: empty validation split");
  std::set<std::string> train_ids;
  for (const auto* s : train) train_ids.insert(s->utt_id);
  for (const auto* s : validation)
    if (train_ids.count(s->utt_id))
      throw InvalidInput("fit: utterance '" + s->utt_id + "' is in both training and validation");

  nn::Rng rng(cfg.seed);
  SgdMomentum optimizer(cfg.momentum);
  NewbobState sched = newbob_init(cfg.initial_lr, cfg.improve_threshold);
  nn::ParamSet best = model.params();
  FitResult result;
  result.best_val_wa = -1.0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const EpochStats st = train_epoch(model, train, cfg, sched.lr, optimizer, rng);
    const SplitPredictions val = evaluate_split(model, validation);
    HistoryRow row{epoch, sched.lr, st.mean_loss, val.metrics.wa, val.metrics.ua};
    result.history.push_back(row);
    log_info("epoch " + std::to_string(epoch) + " lr " + format_double(row.lr) + " loss " +
             format_double(row.train_loss) + " val_wa " + format_double(row.val_wa));
    if (row.val_wa >= result.best_val_wa) {
      result.best_val_wa = row.val_wa;
      result.best_epoch = epoch;
      best.copy_values_from(model.params());
    }
    const double metric =
        options.metric_override ? options.metric_override(epoch, row.val_wa) : row.val_wa;
    sched = newbob_step(sched, metric);
    if (sched.halt) {
      result.halted = true;
      break;
    }
  }
  model.params().copy_values_from(best);
  return result;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,val_WA,val_UA\n";
  for (const auto& r : history)
    os << r.epoch << ',' << format_double(r.lr) << ',' << format_double(r.train_loss) << ','
       << format_double(r.val_wa) << ',' << format_double(r.val_ua) << '\n';
  return os.str();
}

}  // namespace emo::train
