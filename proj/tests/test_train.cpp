#include <doctest.h>

#include <cmath>

#include "emo/error.hpp"
#include "emo/nn/params.hpp"
#include "emo/train/newbob.hpp"
#include "emo/train/trainer.hpp"
#include "model_fixtures.hpp"

using namespace emo;
using namespace emo::train;

namespace {

// Four classes told apart by the sign pattern of the first two audio
// dimensions.
std::vector<model::Sample> separable_set(const model::ModelConfig& c, int n, std::uint64_t seed,
                                         const std::string& prefix) {
  std::mt19937_64 rng(seed);
  std::vector<model::Sample> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 4;
    model::Sample s = testutil::random_sample(c, 5, label, rng, prefix + std::to_string(i));
    for (std::size_t t = 0; t < 5; ++t) {
      s.audio25(t, 0) += (label & 1) ? 2.0 : -2.0;
      s.audio25(t, 1) += (label & 2) ? 2.0 : -2.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

Split pointers(const std::vector<model::Sample>& v) {
  Split s;
  for (const auto& x : v) s.push_back(&x);
  return s;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.batch_size = 4;
  c.max_epochs = 8;
  c.initial_lr = 0.05;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("newbob walks the hand-derived trace") {
  NewbobState s = newbob_init(5e-5);
  s = newbob_step(s, 0.40);
  CHECK(s.lr == 5e-5);
  CHECK_FALSE(s.halt);
  const double improvements[] = {0.05, 0.05, 0.001, 0.02, 0.001};
  const double expected[] = {5e-5, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6};
  double metric = 0.40;
  for (int i = 0; i < 5; ++i) {
    CHECK_FALSE(s.halt);
    metric += improvements[i];
    s = newbob_step(s, metric);
    CHECK(s.lr == expected[i]);
  }
  CHECK(s.halt);
  CHECK(s.phase == NewbobPhase::kDecay);
}

TEST_CASE("newbob: steady improvement holds forever, the first call never halts") {
  NewbobState s = newbob_init(0.1);
  s = newbob_step(s, 0.0);
  CHECK_FALSE(s.halt);
  for (int i = 1; i <= 50; ++i) {
    s = newbob_step(s, 0.01 * i);
    CHECK(s.lr == 0.1);
    CHECK_FALSE(s.halt);
  }
  NewbobState flat = newbob_step(newbob_init(0.1), 0.3);
  CHECK_FALSE(flat.halt);
  CHECK(flat.lr == 0.1);
}

TEST_CASE("newbob: negative thresholds tolerate small dips") {
  NewbobState s = newbob_init(1.0, -0.05);
  s = newbob_step(s, 0.8);
  s = newbob_step(s, 0.77);
  CHECK(s.phase == NewbobPhase::kHold);
  s = newbob_step(s, 0.70);
  CHECK(s.phase == NewbobPhase::kDecay);
  CHECK(s.lr == 0.5);
}

TEST_CASE("newbob rejects bad inputs") {
  CHECK_THROWS_AS(newbob_init(0.0), InvalidConfig);
  CHECK_THROWS_AS(newbob_init(1.0, std::nan("")), InvalidConfig);
  CHECK_THROWS_AS(newbob_step(newbob_init(1.0), 1.5), InvalidInput);
  CHECK_THROWS_AS(newbob_step(newbob_init(1.0), -0.1), InvalidInput);
}

TEST_CASE("fit follows the scripted metric to a halt") {
  const auto c = testutil::tiny_config("audio25");
  const auto train = separable_set(c, 16, 1, "t");
  const auto val = separable_set(c, 4, 2, "v");
  model::TwoBranchModel m(c);
  m.init(1);
  TrainConfig cfg = quick_config();
  cfg.initial_lr = 5e-5;
  cfg.max_epochs = 20;
  const double script[] = {0.40, 0.45, 0.50, 0.501, 0.521, 0.522};
  FitOptions opts;
  opts.metric_override = [&](int epoch, double) { return script[epoch - 1]; };
  const FitResult r = fit(m, pointers(train), pointers(val), cfg, opts);
  CHECK(r.halted);
  REQUIRE(r.history.size() == 6);
  const double lrs[] = {5e-5, 5e-5, 5e-5, 5e-5, 2.5e-5, 1.25e-5};
  for (int i = 0; i < 6; ++i) CHECK(r.history[i].lr == lrs[i]);
}

TEST_CASE("fit keeps the best validation epoch") {
  const auto c = testutil::tiny_config("audio25");
  const auto train = separable_set(c, 24, 1, "t");
  const auto val = separable_set(c, 8, 2, "v");
  model::TwoBranchModel m(c);
  m.init(2);
  const FitResult r = fit(m, pointers(train), pointers(val), quick_config());
  double best = 0.0;
  for (const auto& row : r.history) best = std::max(best, row.val_wa);
  CHECK(r.best_val_wa == best);
  CHECK(r.history[r.best_epoch - 1].val_wa == best);
  CHECK(evaluate_split(m, pointers(val)).metrics.wa == best);
}

TEST_CASE("max_epochs = 1 runs exactly one epoch") {
  const auto c = testutil::tiny_config("audio25");
  const auto train = separable_set(c, 8, 1, "t");
  const auto val = separable_set(c, 4, 2, "v");
  model::TwoBranchModel m(c);
  m.init(2);
  TrainConfig cfg = quick_config();
  cfg.max_epochs = 1;
  const FitResult r = fit(m, pointers(train), pointers(val), cfg);
  CHECK(r.history.size() == 1);
  CHECK(r.best_epoch == 1);
  CHECK_FALSE(r.halted);
}

TEST_CASE("overlapping or empty splits are rejected") {
  const auto c = testutil::tiny_config("audio25");
  const auto train = separable_set(c, 8, 1, "t");
  model::TwoBranchModel m(c);
  m.init(2);
  Split val = {&train[0]};
  CHECK_THROWS_AS(fit(m, pointers(train), val, quick_config()), InvalidInput);
  CHECK_THROWS_AS(fit(m, {}, val, quick_config()), InvalidInput);
  CHECK_THROWS_AS(fit(m, pointers(train), {}, quick_config()), InvalidInput);
  SgdMomentum opt(0.9);
  nn::Rng rng(1);
  CHECK_THROWS_AS(train_epoch(m, {}, quick_config(), 0.1, opt, rng), InvalidInput);
}

TEST_CASE("lr = 0 leaves every parameter bit-identical") {
  const auto c = testutil::tiny_config();
  const auto train = separable_set(c, 8, 1, "t");
  model::TwoBranchModel m(c);
  m.init(5);
  const std::string before = nn::checkpoint_bytes(m.params());
  const nn::ParamSet snapshot = m.params();
  SgdMomentum opt(0.9);
  nn::Rng rng(5);
  train_epoch(m, pointers(train), quick_config(), 0.0, opt, rng);
  CHECK(nn::checkpoint_bytes(m.params()) == before);
  for (const auto& [name, p] : snapshot.items()) CHECK(m.params().at(name).value == p.value);
}

TEST_CASE("same seed, same epoch statistics and weights") {
  auto c = testutil::tiny_config();
  c.dropout = 0.3;
  const auto train = separable_set(c, 12, 1, "t");
  std::string bytes[2];
  double losses[2];
  for (int run = 0; run < 2; ++run) {
    model::TwoBranchModel m(c);
    m.init(7);
    SgdMomentum opt(0.9);
    nn::Rng rng(7);
    losses[run] = train_epoch(m, pointers(train), quick_config(), 0.05, opt, rng).mean_loss;
    bytes[run] = nn::checkpoint_bytes(m.params());
  }
  CHECK(losses[0] == losses[1]);
  CHECK(bytes[0] == bytes[1]);
}

TEST_CASE("separable data trains past 95% in 30 epochs") {
  auto c = testutil::tiny_config("audio25");
  c.fusion.margin.margin = 1;
  const auto train = separable_set(c, 40, 11, "t");
  model::TwoBranchModel m(c);
  m.init(11);
  SgdMomentum opt(0.9);
  nn::Rng rng(11);
  EpochStats last;
  for (int e = 0; e < 30; ++e) last = train_epoch(m, pointers(train), quick_config(), 0.02, opt, rng);
  CHECK(last.accuracy > 0.95);
}

TEST_CASE("momentum matches the closed-form recursion") {
  nn::ParamSet ps;
  ps.add("p.w", 1, 1).value(0, 0) = 1.0;
  SgdMomentum opt(0.9);
  double w = 1.0, v = 0.0;
  for (int i = 0; i < 20; ++i) {
    // Gradient of 0.5 * w^2.
    ps.at("p.w").grad(0, 0) = ps.at("p.w").value(0, 0);
    opt.step(ps, 0.1);
    v = 0.9 * v - 0.1 * w;
    w += v;
    CHECK(ps.at("p.w").value(0, 0) == w);
  }
  CHECK(opt.steps() == 20);
  CHECK(std::abs(w) < 1.0);
}

TEST_CASE("gradient clipping caps the joint norm") {
  nn::ParamSet ps;
  ps.add("a.w", 1, 2).grad = Matrix(1, 2, std::vector<double>{3.0, 0.0});
  ps.add("b.w", 1, 1).grad = Matrix(1, 1, 4.0);
  CHECK(clip_gradients(ps, 10.0) == 5.0);
  CHECK(ps.at("a.w").grad(0, 0) == 3.0);
  CHECK(clip_gradients(ps, 1.0) == 5.0);
  CHECK(ps.at("a.w").grad(0, 0) == doctest::Approx(0.6));
  CHECK(ps.at("b.w").grad(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("train config keys and validation") {
  TrainConfig c;
  c.clip_norm = 2.0;
  c.improve_threshold = -0.01;
  KeyValueConfig kv;
  c.write(kv);
  const TrainConfig r = TrainConfig::read(kv);
  CHECK(r.clip_norm == 2.0);
  CHECK(r.improve_threshold == -0.01);
  CHECK(r.initial_lr == 5e-5);
  CHECK(r.momentum == 0.9);
  for (const char* bad : {"train.batch_size = 0", "train.lr = 0", "train.momentum = 1",
                          "train.validation_fraction = 1", "train.clip_norm = -1",
                          "train.seed = -3", "train.max_epochs = 0"}) {
    KeyValueConfig k = kv;
    k.merge(KeyValueConfig::parse(bad));
    CHECK_THROWS_AS(TrainConfig::read(k), InvalidConfig);
  }
}

TEST_CASE("history csv") {
  const std::string csv = history_csv({{1, 0.5, 1.25, 0.75, 0.5}});
  CHECK(csv == "epoch,lr,train_loss,val_WA,val_UA\n1,0.5,1.25,0.75,0.5\n");
}

}  // TEST_SUITE
