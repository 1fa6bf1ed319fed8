#include "emo/gradient_suite.hpp"

#include <random>

#include "emo/kernels.hpp"
#include "emo/model/model.hpp"
#include "emo/nn/layers.hpp"
#include "emo/nn/margin_softmax.hpp"

namespace emo {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, nn::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

double dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

nn::GradCheckOptions options(double tol, double step = 1e-4) {
  nn::GradCheckOptions o;
  o.step = step;
  o.five_point = true;
  o.kink_retries = 3;
  o.floor = 1e-5;
  o.tolerance = tol;
  return o;
}

std::vector<nn::GradTarget> param_targets(nn::ParamSet& params, std::vector<Matrix>& snapshots) {
  snapshots.clear();
  snapshots.reserve(params.size());
  std::vector<nn::GradTarget> targets;
  for (auto& [name, p] : params.items()) snapshots.push_back(p.grad);
  std::size_t i = 0;
  for (auto& [name, p] : params.items()) targets.push_back({name, &p.value, &snapshots[i++]});
  return targets;
}

NamedGradReport check_affine(nn::Rng& rng, double tol) {
  nn::ParamSet params;
  nn::Affine layer(params, "affine", 7, 5);
  params.init_glorot(rng);
  params.at("affine.b").value = random_matrix(1, 5, rng, 0.1);
  Matrix x = random_matrix(4, 7, rng);
  const Matrix probe = random_matrix(4, 5, rng);
  auto objective = [&] { return dot(layer.forward(x), probe); };
  params.zero_grads();
  layer.forward(x);
  const Matrix dx = layer.backward(probe);
  std::vector<Matrix> snaps;
  auto targets = param_targets(params, snaps);
  targets.push_back({"input", &x, &dx});
  return {"affine", nn::check_gradients(objective, targets, options(tol))};
}

NamedGradReport check_relu(nn::Rng& rng, double tol) {
  Matrix x = random_matrix(5, 6, rng);
  const Matrix probe = random_matrix(5, 6, rng);
  auto objective = [&] { return dot(nn::relu(x), probe); };
  const Matrix dx = nn::relu_backward(x, probe);
  return {"relu", nn::check_gradients(objective, {{"input", &x, &dx}}, options(tol))};
}

NamedGradReport check_tdnn(nn::Rng& rng, double tol) {
  nn::ParamSet params;
  nn::TdnnResidualBlock block(params, "block", 4, {-2, 0, 1}, 0.0);
  params.init_glorot(rng);
  Matrix x = random_matrix(6, 4, rng);
  const Matrix probe = random_matrix(6, 4, rng);
  auto objective = [&] { return dot(block.forward(x, false, nullptr), probe); };
  params.zero_grads();
  block.forward(x, false, nullptr);
  const Matrix dx = block.backward(probe);
  std::vector<Matrix> snaps;
  auto targets = param_targets(params, snaps);
  targets.push_back({"input", &x, &dx});
  return {"tdnn_residual_block", nn::check_gradients(objective, targets, options(tol))};
}

NamedGradReport check_pool(nn::Rng& rng, double tol, bool with_penalty) {
  nn::AttentionConfig cfg;
  cfg.attn_hidden = 4;
  cfg.penalty_weight = 0.3;
  nn::ParamSet params;
  nn::SelfAttentivePool pool(params, "pool", 3, cfg);
  params.init_glorot(rng);
  Matrix h = random_matrix(6, 3, rng);
  const nn::Mask mask = {1, 1, 0, 1, 1, 1};
  const Matrix probe = random_matrix(1, pool.output_dim(), rng);
  auto objective = [&] {
    const nn::PoolOutput out = pool.forward(h, mask);
    double f = dot(out.embedding, probe);
    if (with_penalty) f += nn::attention_penalty(out.weights, mask, cfg).value;
    return f;
  };
  params.zero_grads();
  const nn::PoolOutput out = pool.forward(h, mask);
  const nn::PenaltyResult pen = nn::attention_penalty(out.weights, mask, cfg);
  const Matrix dh = pool.backward(probe, with_penalty ? &pen.grad : nullptr);
  std::vector<Matrix> snaps;
  auto targets = param_targets(params, snaps);
  targets.push_back({"input", &h, &dh});
  return {with_penalty ? "attention_pool+penalty" : "attention_pool",
          nn::check_gradients(objective, targets, options(tol))};
}

NamedGradReport check_margin(nn::Rng& rng, double tol, int margin) {
  nn::ParamSet params;
  nn::MarginConfig cfg;
  cfg.margin = margin;
  cfg.scale = 1.5;
  nn::MarginSoftmax layer(params, "out", 6, 4, cfg);
  params.init_glorot(rng);
  Matrix x = random_matrix(1, 6, rng);
  const std::size_t label = static_cast<std::size_t>(rng() % 4);
  auto objective = [&] { return layer.forward(x, label); };
  params.zero_grads();
  layer.forward(x, label);
  const Matrix dx = layer.backward(1.0);
  std::vector<Matrix> snaps;
  auto targets = param_targets(params, snaps);
  targets.push_back({"input", &x, &dx});
  return {"margin_softmax_m" + std::to_string(margin),
          nn::check_gradients(objective, targets, options(tol))};
}

NamedGradReport check_model(nn::Rng& rng, double tol) {
  model::ModelConfig cfg;
  cfg.tsb.use_fbk250 = true;
  cfg.tsb.audio25_dim = 5;
  cfg.tsb.fbk250_dim = 3;
  cfg.tsb.word_dim = 4;
  cfg.tsb.encoder_dim = 6;
  cfg.tsb.n_blocks = 2;
  cfg.tsb.offsets = {-1, 0, 2};
  cfg.tsb.attention.attn_hidden = 4;
  cfg.tab.span = {2, 1};
  cfg.tab.sentence_dim = 8;
  cfg.tab.proj_dim = 5;
  cfg.tab.attention.attn_hidden = 3;
  cfg.fusion.hidden_dim = 7;
  cfg.fusion.margin.margin = 2;
  cfg.dropout = 0.0;
  model::TwoBranchModel m(cfg);
  m.init(rng());

  model::Sample s;
  s.utt_id = "gradcheck";
  s.audio25 = random_matrix(7, 5, rng);
  s.fbk250 = random_matrix(7, 3, rng);
  s.words = random_matrix(7, 4, rng);
  s.context.span = cfg.tab.span;
  s.context.vectors = random_matrix(4, 8, rng);
  s.context.mask = {1, 0, 1, 1};
  for (std::size_t c = 0; c < 8; ++c) s.context.vectors(1, c) = 0.0;
  s.context.slot_ids = {"a", "", "c", "d"};
  s.label = 2;

  auto objective = [&] { return m.forward_backward(s, false, nullptr, 0.0).total(); };
  m.params().zero_grads();
  m.forward_backward(s, false, nullptr, 1.0);
  std::vector<Matrix> snaps;
  auto targets = param_targets(m.params(), snaps);
  const Matrix d_in = m.last_tsb_input_grad();
  const Matrix d_audio = column_slice(d_in, 0, 5);
  const Matrix d_fbk = column_slice(d_in, 5, 3);
  const Matrix d_words = column_slice(d_in, 8, 4);
  const Matrix d_ctx = m.last_context_grad();
  targets.push_back({"input.audio25", &s.audio25, &d_audio});
  targets.push_back({"input.fbk250", &s.fbk250, &d_fbk});
  targets.push_back({"input.words", &s.words, &d_words});
  targets.push_back({"input.context", &s.context.vectors, &d_ctx});
  // The default logit scale makes the loss large enough that rounding in the
  // quotient dominates below this step.
  return {"full_model", nn::check_gradients(objective, targets, options(tol, 1e-3))};
}

}  // namespace

std::vector<NamedGradReport> run_gradient_suite(std::uint64_t seed, double layer_tolerance,
                                                double model_tolerance) {
  nn::Rng rng(seed);
  std::vector<NamedGradReport> out;
  out.push_back(check_affine(rng, layer_tolerance));
  out.push_back(check_relu(rng, layer_tolerance));
  out.push_back(check_tdnn(rng, layer_tolerance));
  out.push_back(check_pool(rng, layer_tolerance, false));
  out.push_back(check_pool(rng, layer_tolerance, true));
  for (int m = 1; m <= 4; ++m) out.push_back(check_margin(rng, layer_tolerance, m));
  out.push_back(check_model(rng, model_tolerance));
  return out;
}

}  // namespace emo
