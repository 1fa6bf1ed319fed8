#pragma once

#include <cstdint>
#include <vector>

#include "emo/matrix.hpp"
#include "emo/nn/params.hpp"

// Layers with hand-written backward passes. Each object binds to tensors in a
// ParamSet, caches what its backward pass needs during forward, and adds its
// parameter gradients into Param::grad. One forward must precede each
// backward; objects are not reentrant.
namespace emo::nn {

using Mask = std::vector<std::uint8_t>;

Matrix relu(const Matrix& x);
// dy masked by (pre > 0).
Matrix relu_backward(const Matrix& pre, const Matrix& dy);

class Affine {
 public:
  Affine() = default;
  // Registers "<name>.w" (in x out) and "<name>.b" (1 x out).
  Affine(ParamSet& params, const std::string& name, std::size_t in, std::size_t out);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

  std::size_t in_dim() const { return w_->value.rows(); }
  std::size_t out_dim() const { return w_->value.cols(); }

 private:
  Param* w_ = nullptr;
  Param* b_ = nullptr;
  Matrix x_;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) during training so
// evaluation is the identity.
class Dropout {
 public:
  explicit Dropout(double rate = 0.0) : rate_(rate) {}
  Matrix forward(const Matrix& x, bool training, Rng* rng);
  Matrix backward(const Matrix& dy) const;
  double rate() const { return rate_; }
  void set_rate(double rate) { rate_ = rate; }

 private:
  double rate_;
  bool active_ = false;
  Matrix scale_;
};

// y = dropout(ReLU(splice(x) W + b) + x). splice() stacks the frames at the
// given offsets, replicating the first/last frame beyond the edges.
class TdnnResidualBlock {
 public:
  TdnnResidualBlock() = default;
  TdnnResidualBlock(ParamSet& params, const std::string& name, std::size_t dim,
                    std::vector<int> offsets, double dropout);

  Matrix forward(const Matrix& x, bool training, Rng* rng);
  Matrix backward(const Matrix& dy);

  static Matrix splice(const Matrix& x, const std::vector<int>& offsets);
  static Matrix unsplice(const Matrix& ds, const std::vector<int>& offsets,
                         std::size_t frames, std::size_t dim);

 private:
  Param* w_ = nullptr;
  Param* b_ = nullptr;
  std::vector<int> offsets_;
  Dropout dropout_;
  Matrix spliced_;
  Matrix pre_;
};

struct AttentionConfig {
  int n_heads = 5;
  int spiky_heads = 3;
  int smooth_heads = 2;
  double penalty_weight = 0.05;
  std::size_t attn_hidden = 64;

  // Throws InvalidConfig unless spiky + smooth == n_heads and all positive.
  void validate() const;
};

struct PoolOutput {
  Matrix embedding;  // 1 x (n_heads * d), head-major
  Matrix weights;    // n_heads x T
};

// Structured multi-head self-attention pooling:
//   A = softmax_rows(W2^T tanh(W1^T H^T)), masked positions excluded,
//   e = concat_h (A_h H).
class SelfAttentivePool {
 public:
  SelfAttentivePool() = default;
  SelfAttentivePool(ParamSet& params, const std::string& name, std::size_t dim,
                    const AttentionConfig& cfg);

  // An empty mask means every position is present.
  PoolOutput forward(const Matrix& h, const Mask& mask);
  // d_embedding: 1 x (n_heads * d). d_weights (optional, n_heads x T) is an
  // extra gradient on the attention matrix, e.g. from the penalty.
  Matrix backward(const Matrix& d_embedding, const Matrix* d_weights = nullptr);

  std::size_t output_dim() const;
  const AttentionConfig& config() const { return cfg_; }

 private:
  Param* w1_ = nullptr;  // d x hidden
  Param* w2_ = nullptr;  // hidden x n_heads
  AttentionConfig cfg_;
  Matrix h_, u_, a_;
  Mask mask_;
};

struct PenaltyResult {
  double value = 0.0;
  Matrix grad;  // d value / d A
};

// mu * ( sum over the first spiky_heads rows of (1 - max_t A)^2
//      + sum over the remaining rows of sum_t (A - 1/T_present)^2 ),
// with sums restricted to present positions.
PenaltyResult attention_penalty(const Matrix& weights, const Mask& mask,
                                const AttentionConfig& cfg);

}  // namespace emo::nn
