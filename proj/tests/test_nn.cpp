#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "emo/error.hpp"
#include "emo/gradient_suite.hpp"
#include "emo/nn/gradcheck.hpp"
#include "emo/nn/layers.hpp"
#include "emo/nn/margin_softmax.hpp"
#include "emo/nn/params.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace emo;
using namespace emo::nn;

namespace {

AttentionConfig small_attention(std::size_t hidden = 6) {
  AttentionConfig c;
  c.attn_hidden = hidden;
  return c;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("affine identity and zero input") {
  ParamSet ps;
  Affine a(ps, "fc", 3, 3);
  auto& w = ps.at("fc.w").value;
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  const Matrix x(2, 3, std::vector<double>{1, -2, 3, 0.5, 0, -1});
  CHECK(a.forward(x) == x);
  ps.at("fc.b").value = Matrix(1, 3, std::vector<double>{4, 5, 6});
  CHECK(a.forward(Matrix(1, 3, 0.0)) == ps.at("fc.b").value);
  CHECK_THROWS_AS(a.forward(Matrix(1, 4)), ShapeError);
}

TEST_CASE("affine gradients pass at 1e-6 with central differences") {
  std::mt19937_64 rng(4);
  ParamSet ps;
  Affine a(ps, "fc", 4, 3);
  ps.init_glorot(rng);
  ps.at("fc.b").value = testutil::random_matrix(1, 3, rng);
  Matrix x = testutil::random_matrix(5, 4, rng);
  const Matrix r = testutil::random_matrix(5, 3, rng);
  auto objective = [&] {
    const Matrix y = a.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * r.data()[i];
    return s;
  };
  ps.zero_grads();
  a.forward(x);
  const Matrix dx = a.backward(r);
  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.tolerance = 1e-6;
  const auto rep = check_gradients(objective, {{"x", &x, &dx},
                                               {"w", &ps.at("fc.w").value, &ps.at("fc.w").grad},
                                               {"b", &ps.at("fc.b").value, &ps.at("fc.b").grad}},
                                   opts);
  CHECK(rep.passed);
  CHECK(rep.entries_checked == 20 + 12 + 3);
}

TEST_CASE("a corrupted backward pass fails the check") {
  std::mt19937_64 rng(8);
  ParamSet ps;
  Affine a(ps, "fc", 3, 2);
  ps.init_glorot(rng);
  Matrix x = testutil::random_matrix(4, 3, rng);
  auto objective = [&] {
    const Matrix y = a.forward(x);
    double s = 0.0;
    for (double v : y.values()) s += v * v;
    return 0.5 * s;
  };
  ps.zero_grads();
  const Matrix y = a.forward(x);
  a.backward(y);
  Matrix corrupted = ps.at("fc.w").grad;
  corrupted(1, 0) *= 1.01;
  const auto rep = check_gradients(objective, {{"w", &ps.at("fc.w").value, &corrupted}});
  CHECK_FALSE(rep.passed);
  CHECK(rep.worst_target == "w");
  CHECK(rep.worst_index == 2);
  CHECK(rep.max_rel_error > 1e-3);
}

TEST_CASE("residual block with zero weights is the identity, also for T = 1") {
  ParamSet ps;
  TdnnResidualBlock block(ps, "blk", 3, {-2, -1, 0, 1, 2}, 0.0);
  std::mt19937_64 rng(2);
  for (std::size_t t : {1u, 6u}) {
    const Matrix x = testutil::random_matrix(t, 3, rng);
    CHECK(block.forward(x, false, nullptr) == x);
  }
  CHECK_THROWS_AS(block.forward(Matrix(2, 4), false, nullptr), ShapeError);
  CHECK_THROWS_AS(block.forward(Matrix(0, 3), false, nullptr), InvalidInput);
}

TEST_CASE("splice replicates the edge frames") {
  const Matrix x(3, 1, std::vector<double>{10, 20, 30});
  const Matrix s = TdnnResidualBlock::splice(x, {-2, 0, 1});
  CHECK(s == Matrix(3, 3, std::vector<double>{10, 10, 20, 10, 20, 30, 10, 30, 30}));
  const Matrix one = TdnnResidualBlock::splice(Matrix(1, 1, 7.0), {-1, 0, 1});
  CHECK(one == Matrix(1, 3, 7.0));
}

TEST_CASE("attention rows sum to one and masked slots get no weight") {
  std::mt19937_64 rng(12);
  ParamSet ps;
  SelfAttentivePool pool(ps, "att", 4, small_attention());
  ps.init_glorot(rng);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t_count = 1 + trial % 9;
    const Matrix h = testutil::random_matrix(t_count, 4, rng, -3.0, 3.0);
    Mask mask(t_count, 1);
    for (std::size_t t = 0; t < t_count; ++t) mask[t] = (rng() % 3) != 0;
    mask[rng() % t_count] = 1;
    const PoolOutput out = pool.forward(h, mask);
    REQUIRE(out.weights.rows() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
      double sum = 0.0;
      for (std::size_t t = 0; t < t_count; ++t) {
        sum += out.weights(k, t);
        if (!mask[t]) CHECK(out.weights(k, t) < 1e-12);
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("masked slot contents do not change the pooled output") {
  std::mt19937_64 rng(13);
  ParamSet ps;
  SelfAttentivePool pool(ps, "att", 4, small_attention());
  ps.init_glorot(rng);
  const Matrix h = testutil::random_matrix(7, 4, rng);
  const Mask mask = {1, 0, 1, 1, 0, 0, 1};
  const PoolOutput ref = pool.forward(h, mask);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix g = h;
    for (std::size_t t : {1u, 4u, 5u})
      for (double& v : g.row(t)) v = std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
    const PoolOutput out = pool.forward(g, mask);
    CHECK(max_abs_diff(out.embedding, ref.embedding) <= 1e-12);
    CHECK(max_abs_diff(out.weights, ref.weights) <= 1e-12);
  }
  CHECK_THROWS_AS(pool.forward(h, Mask(7, 0)), InvalidInput);
  CHECK_THROWS_AS(pool.forward(h, Mask(6, 1)), ShapeError);
  CHECK_THROWS_AS(pool.forward(Matrix(0, 4), {}), InvalidInput);
}

TEST_CASE("single frame and equal scores") {
  std::mt19937_64 rng(14);
  ParamSet ps;
  SelfAttentivePool pool(ps, "att", 3, small_attention());
  ps.init_glorot(rng);
  const Matrix h1(1, 3, std::vector<double>{0.3, -0.2, 1.5});
  const PoolOutput one = pool.forward(h1, {});
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(one.weights(k, 0) == 1.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(one.embedding(0, 3 * k + c) == h1(0, c));
  }
  ps.at("att.att2.w").value.set_zero();
  const PoolOutput flat = pool.forward(testutil::random_matrix(4, 3, rng), {});
  for (double v : flat.weights.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("penalty zeros, the 0.25 example and its gradient") {
  AttentionConfig cfg;
  cfg.penalty_weight = 1.0;
  Matrix a(5, 4, 0.25);
  for (int k = 0; k < 3; ++k) {
    for (int t = 0; t < 4; ++t) a(k, t) = 0.0;
    a(k, k) = 1.0;
  }
  CHECK(attention_penalty(a, {}, cfg).value == 0.0);

  // Smooth heads against the present count only.
  Matrix masked = a;
  masked(1, 1) = 0.0;
  masked(1, 2) = 1.0;
  for (int k = 3; k < 5; ++k) {
    masked(k, 0) = masked(k, 2) = 0.5;
    masked(k, 1) = masked(k, 3) = 0.0;
  }
  CHECK(attention_penalty(masked, {1, 0, 1, 0}, cfg).value == 0.0);

  AttentionConfig one_head;
  one_head.n_heads = 1;
  one_head.spiky_heads = 1;
  one_head.smooth_heads = 0;
  one_head.penalty_weight = 1.0;
  CHECK(attention_penalty(Matrix(1, 2, 0.5), {}, one_head).value == 0.25);

  std::mt19937_64 rng(5);
  Matrix w = testutil::random_matrix(5, 6, rng, 0.0, 1.0);
  const Mask mask = {1, 1, 0, 1, 1, 1};
  const PenaltyResult pr = attention_penalty(w, mask, cfg);
  GradCheckOptions opts;
  opts.step = 1e-6;
  opts.tolerance = 1e-6;
  const auto rep = check_gradients([&] { return attention_penalty(w, mask, cfg).value; },
                                   {{"A", &w, &pr.grad}}, opts);
  CHECK(rep.passed);
}

TEST_CASE("attention config validation") {
  AttentionConfig c;
  c.spiky_heads = 2;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = AttentionConfig{};
  c.attn_hidden = 0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = AttentionConfig{};
  c.penalty_weight = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
}

TEST_CASE("margin 1 equals plain cross-entropy to 1e-12") {
  std::mt19937_64 rng(31);
  for (double scale : {1.0, 30.0}) {
    ParamSet ps;
    MarginConfig cfg;
    cfg.margin = 1;
    cfg.scale = scale;
    MarginSoftmax out(ps, "out", 6, 4, cfg);
    for (int i = 0; i < 200; ++i) {
      ps.at("out.w").value = testutil::random_matrix(4, 6, rng);
      const Matrix x = testutil::random_matrix(1, 6, rng, -0.3, 0.3);
      const std::size_t y = rng() % 4;
      const double got = out.forward(x, y);
      CHECK(std::abs(got - oracle::normalised_ce(ps.at("out.w").value, x, y, scale)) < 1e-12);
      CHECK(std::abs(got - softmax_cross_entropy(out.logits(x), y)) < 1e-12);
    }
  }
}

TEST_CASE("margin 2 never lowers the loss over 1000 draws") {
  std::mt19937_64 rng(32);
  ParamSet p1, p2;
  MarginConfig c1, c2;
  c1.margin = 1;
  c2.margin = 2;
  MarginSoftmax m1(p1, "out", 8, 4, c1);
  MarginSoftmax m2(p2, "out", 8, 4, c2);
  int strictly_greater = 0;
  for (int i = 0; i < 1000; ++i) {
    const Matrix w = testutil::random_matrix(4, 8, rng);
    const Matrix x = testutil::random_matrix(1, 8, rng, -0.2, 0.2);
    const std::size_t y = rng() % 4;
    p1.at("out.w").value = w;
    p2.at("out.w").value = w;
    const double l1 = m1.forward(x, y), l2 = m2.forward(x, y);
    CHECK(l2 >= l1);
    if (l2 > l1) ++strictly_greater;
  }
  CHECK(strictly_greater > 900);
}

TEST_CASE("psi is continuous, decreasing and bounded by cos") {
  for (int m = 1; m <= 4; ++m) {
    double prev = 2.0;
    for (int i = 0; i <= 2000; ++i) {
      const double theta = std::numbers::pi * i / 2000.0;
      const double c = std::cos(theta);
      const AngularValue v = angular_margin(c, m);
      CHECK(v.psi <= c + 1e-12);
      CHECK(v.psi <= prev + 1e-12);
      if (i > 0) CHECK(prev - v.psi < 0.02 * m);
      prev = v.psi;
    }
  }
  CHECK(angular_margin(std::cos(0.3), 2).psi == doctest::Approx(std::cos(0.6)));
  CHECK(angular_margin(std::cos(2.0), 2).psi == doctest::Approx(-std::cos(4.0) - 2.0));
}

TEST_CASE("loss is invariant to positive rescaling of class rows") {
  std::mt19937_64 rng(33);
  ParamSet ps;
  MarginSoftmax out(ps, "out", 5, 4, MarginConfig{});
  for (int i = 0; i < 100; ++i) {
    Matrix w = testutil::random_matrix(4, 5, rng);
    const Matrix x = testutil::random_matrix(1, 5, rng, -0.1, 0.1);
    ps.at("out.w").value = w;
    const double before = out.forward(x, 2);
    for (std::size_t k = 0; k < 4; ++k)
      for (double& v : w.row(k)) v *= 0.01 + 10.0 * static_cast<double>(k);
    ps.at("out.w").value = w;
    CHECK(std::abs(out.forward(x, 2) - before) < 1e-9);
  }
}

TEST_CASE("margin config validation and lambda schedule") {
  MarginConfig c;
  c.margin = 0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  ParamSet ps;
  CHECK_THROWS_AS(MarginSoftmax(ps, "o", 2, 2, c), InvalidConfig);
  c = MarginConfig{};
  c.scale = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = MarginConfig{};
  c.lambda_gamma = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);

  c = MarginConfig{};
  CHECK(c.lambda_at(0) == 0.0);
  CHECK(c.lambda_at(1000) == 0.0);
  c.lambda_base = 1000.0;
  c.lambda_gamma = 0.1;
  c.lambda_power = 1.0;
  c.lambda_min = 5.0;
  CHECK(c.lambda_at(0) == 1000.0);
  CHECK(c.lambda_at(10) == doctest::Approx(500.0));
  CHECK(c.lambda_at(1000000) == 5.0);
}

TEST_CASE("a huge lambda turns the margin loss into the plain one") {
  std::mt19937_64 rng(34);
  ParamSet p1, p2;
  MarginConfig c1;
  c1.margin = 1;
  MarginSoftmax plain(p1, "out", 6, 4, c1);
  MarginSoftmax blended(p2, "out", 6, 4, MarginConfig{});
  blended.set_lambda(1e12);
  const Matrix w = testutil::random_matrix(4, 6, rng);
  p1.at("out.w").value = w;
  p2.at("out.w").value = w;
  const Matrix x = testutil::random_matrix(1, 6, rng, -0.2, 0.2);
  CHECK(std::abs(plain.forward(x, 1) - blended.forward(x, 1)) < 1e-9);
}

TEST_CASE("margin softmax input errors") {
  ParamSet ps;
  MarginSoftmax out(ps, "out", 3, 4, MarginConfig{});
  CHECK_THROWS_AS(out.forward(Matrix(1, 2), 0), ShapeError);
  CHECK_THROWS_AS(out.forward(Matrix(1, 3, 1.0), 4), InvalidInput);
}

TEST_CASE("dropout: identity in evaluation, unbiased in training") {
  Dropout d(0.5);
  const Matrix x(200, 50, 2.0);
  CHECK(d.forward(x, false, nullptr) == x);
  CHECK_THROWS_AS(d.forward(x, true, nullptr), InvalidConfig);
  Rng rng(77);
  const Matrix y = d.forward(x, true, &rng);
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : y.values()) {
    mean += v;
    if (v == 0.0) ++zeros;
    else CHECK(v == 4.0);
  }
  mean /= static_cast<double>(y.size());
  // 10000 Bernoulli(0.5) draws scaled by 4: sd of the mean is 0.02.
  CHECK(std::abs(mean - 2.0) < 0.1);
  CHECK(zeros > 4500);
  CHECK(zeros < 5500);
  const Matrix g = d.backward(Matrix(200, 50, 1.0));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g.data()[i] == (y.data()[i] == 0.0 ? 0.0 : 2.0));
}

TEST_CASE("checkpoint round-trip and mismatches") {
  testutil::TempDir dir("ckpt");
  Rng rng(3);
  ParamSet a;
  a.add("x.w", 3, 4);
  a.add("x.b", 1, 4);
  a.init_glorot(rng);
  a.at("x.b").value(0, 2) = 0.125;
  save_checkpoint(dir.file("a.emow"), a);
  ParamSet b;
  b.add("x.w", 3, 4);
  b.add("x.b", 1, 4);
  load_checkpoint(dir.file("a.emow"), b);
  for (const auto& [name, p] : a.items())
    for (std::size_t i = 0; i < p.value.size(); ++i)
      CHECK(b.at(name).value.data()[i] == static_cast<float>(p.value.data()[i]));
  CHECK(checkpoint_bytes(b) == checkpoint_bytes(a));
  {
    std::ifstream is(dir.file("a.emow"), std::ios::binary);
    const std::string disk((std::istreambuf_iterator<char>(is)), {});
    CHECK(disk == checkpoint_bytes(a));
    CHECK(disk.substr(0, 4) == "EMOW");
  }

  ParamSet wrong_shape;
  wrong_shape.add("x.w", 4, 3);
  wrong_shape.add("x.b", 1, 4);
  CHECK_THROWS_AS(load_checkpoint(dir.file("a.emow"), wrong_shape), FormatError);
  ParamSet wrong_name;
  wrong_name.add("y.w", 3, 4);
  wrong_name.add("x.b", 1, 4);
  CHECK_THROWS_AS(load_checkpoint(dir.file("a.emow"), wrong_name), FormatError);
  ParamSet fewer;
  fewer.add("x.w", 3, 4);
  CHECK_THROWS_AS(load_checkpoint(dir.file("a.emow"), fewer), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir.file("none.emow"), b), MissingData);
  CHECK_THROWS_AS(a.add("x.w", 1, 1), InvalidConfig);
}

TEST_CASE("glorot init is seeded and leaves biases at zero") {
  ParamSet a, b;
  for (ParamSet* p : {&a, &b}) {
    p->add("l.w", 10, 20);
    p->add("l.b", 1, 20);
  }
  Rng r1(5), r2(5);
  a.init_glorot(r1);
  b.init_glorot(r2);
  CHECK(a.at("l.w").value == b.at("l.w").value);
  const double limit = std::sqrt(6.0 / 30.0);
  for (double v : a.at("l.w").value.values()) CHECK(std::abs(v) <= limit);
  for (double v : a.at("l.b").value.values()) CHECK(v == 0.0);
}

TEST_CASE("gradient suite passes every layer and the full model within two minutes") {
  const auto start = std::chrono::steady_clock::now();
  const auto reports = run_gradient_suite(1);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 120.0);
  REQUIRE(reports.size() > 5);
  bool saw_model = false;
  for (const auto& r : reports) {
    INFO(r.name << ": " << r.report.summary());
    CHECK(r.report.passed);
    CHECK(r.report.entries_checked > 0);
    if (r.report.tolerance == 1e-4) saw_model = true;
    else CHECK(r.report.tolerance == 1e-5);
  }
  CHECK(saw_model);
}

}  // TEST_SUITE
