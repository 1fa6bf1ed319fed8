#include "emo/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emo/error.hpp"
#include "emo/kernels.hpp"

namespace emo::nn {

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& pre, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(pre.data()[i] > 0.0)) dx.data()[i] = 0.0;
  return dx;
}

// --------------------------------------------------------------------------

Affine::Affine(ParamSet& params, const std::string& name, std::size_t in, std::size_t out)
    : w_(&params.add(name + ".w", in, out)), b_(&params.add(name + ".b", 1, out)) {}

Matrix Affine::forward(const Matrix& x) {
  if (x.cols() != w_->value.rows())
    throw ShapeError("affine expects " + std::to_string(w_->value.rows()) +
                     " input columns, got " + x.shape_string());
  x_ = x;
  Matrix y = kernels::matmul(x, w_->value);
  kernels::add_row_broadcast(y, b_->value);
  return y;
}

Matrix Affine::backward(const Matrix& dy) {
  if (dy.rows() != x_.rows() || dy.cols() != w_->value.cols())
    throw ShapeError("affine backward got " + dy.shape_string());
  kernels::add_matmul_tn(w_->grad, x_, dy);
  kernels::add_column_sums(b_->grad, dy);
  return kernels::matmul_nt(dy, w_->value);
}

// --------------------------------------------------------------------------

Matrix Dropout::forward(const Matrix& x, bool training, Rng* rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  if (rng == nullptr) throw InvalidConfig("training-mode dropout needs a random source");
  const double keep = 1.0 - rate_;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  scale_ = Matrix(x.rows(), x.cols());
  Matrix y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double s = u(*rng) < keep ? 1.0 / keep : 0.0;
    scale_.data()[i] = s;
    y.data()[i] *= s;
  }
  return y;
}

Matrix Dropout::backward(const Matrix& dy) const {
  if (!active_) return dy;
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= scale_.data()[i];
  return dx;
}

// --------------------------------------------------------------------------

TdnnResidualBlock::TdnnResidualBlock(ParamSet& params, const std::string& name,
                                     std::size_t dim, std::vector<int> offsets,
                                     double dropout)
    : offsets_(std::move(offsets)), dropout_(dropout) {
  if (offsets_.empty()) throw InvalidConfig("TDNN block needs at least one offset");
  w_ = &params.add(name + ".w", offsets_.size() * dim, dim);
  b_ = &params.add(name + ".b", 1, dim);
}

Matrix TdnnResidualBlock::splice(const Matrix& x, const std::vector<int>& offsets) {
  const std::size_t t_count = x.rows(), d = x.cols();
  const auto last = static_cast<std::ptrdiff_t>(t_count) - 1;
  Matrix s(t_count, offsets.size() * d);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const auto src = static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + offsets[k], 0, last));
      auto in = x.row(src);
      std::copy(in.begin(), in.end(), s.row(t).begin() + static_cast<std::ptrdiff_t>(k * d));
    }
  }
  return s;
}

Matrix TdnnResidualBlock::unsplice(const Matrix& ds, const std::vector<int>& offsets,
                                   std::size_t frames, std::size_t dim) {
  const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
  Matrix dx(frames, dim);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const auto dst = static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + offsets[k], 0, last));
      auto g = ds.row(t);
      auto out = dx.row(dst);
      for (std::size_t c = 0; c < dim; ++c) out[c] += g[k * dim + c];
    }
  }
  return dx;
}

Matrix TdnnResidualBlock::forward(const Matrix& x, bool training, Rng* rng) {
  const std::size_t d = w_->value.cols();
  if (x.cols() != d)
    throw ShapeError("residual block of width " + std::to_string(d) + " got input " +
                     x.shape_string());
  if (x.rows() == 0) throw InvalidInput("residual block got an empty sequence");
  spliced_ = splice(x, offsets_);
  pre_ = kernels::matmul(spliced_, w_->value);
  kernels::add_row_broadcast(pre_, b_->value);
  Matrix y = relu(pre_);
  y += x;
  return dropout_.forward(y, training, rng);
}

Matrix TdnnResidualBlock::backward(const Matrix& dy) {
  const std::size_t d = w_->value.cols();
  Matrix dsum = dropout_.backward(dy);
  Matrix dpre = relu_backward(pre_, dsum);
  kernels::add_matmul_tn(w_->grad, spliced_, dpre);
  kernels::add_column_sums(b_->grad, dpre);
  Matrix dspliced = kernels::matmul_nt(dpre, w_->value);
  Matrix dx = unsplice(dspliced, offsets_, dsum.rows(), d);
  dx += dsum;
  return dx;
}

// --------------------------------------------------------------------------

void AttentionConfig::validate() const {
  if (n_heads < 1 || spiky_heads < 0 || smooth_heads < 0 ||
      spiky_heads + smooth_heads != n_heads)
    throw InvalidConfig("attention heads: spiky + smooth must equal n_heads");
  if (!(penalty_weight >= 0.0)) throw InvalidConfig("penalty weight must be non-negative");
  if (attn_hidden == 0) throw InvalidConfig("attention hidden size must be positive");
}

SelfAttentivePool::SelfAttentivePool(ParamSet& params, const std::string& name,
                                     std::size_t dim, const AttentionConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  w1_ = &params.add(name + ".att1.w", dim, cfg.attn_hidden);
  w2_ = &params.add(name + ".att2.w", cfg.attn_hidden, static_cast<std::size_t>(cfg.n_heads));
}

std::size_t SelfAttentivePool::output_dim() const {
  return static_cast<std::size_t>(cfg_.n_heads) * w1_->value.rows();
}

PoolOutput SelfAttentivePool::forward(const Matrix& h, const Mask& mask) {
  const std::size_t t_count = h.rows();
  const auto heads = static_cast<std::size_t>(cfg_.n_heads);
  if (h.cols() != w1_->value.rows())
    throw ShapeError("attention pooling expects width " + std::to_string(w1_->value.rows()) +
                     ", got " + h.shape_string());
  if (t_count == 0) throw InvalidInput("attention pooling over an empty sequence");
  if (!mask.empty() && mask.size() != t_count)
    throw ShapeError("attention mask has " + std::to_string(mask.size()) + " bits for " +
                     std::to_string(t_count) + " positions");
  mask_ = mask.empty() ? Mask(t_count, 1) : mask;
  if (std::none_of(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; }))
    throw InvalidInput("attention pooling with every position masked");

  h_ = h;
  u_ = kernels::matmul(h, w1_->value);
  for (double& v : u_.values()) v = std::tanh(v);
  const Matrix scores = kernels::matmul(u_, w2_->value);  // T x heads

  a_ = Matrix(heads, t_count);
  for (std::size_t k = 0; k < heads; ++k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < t_count; ++t)
      if (mask_[t]) mx = std::max(mx, scores(t, k));
    double z = 0.0;
    for (std::size_t t = 0; t < t_count; ++t) {
      const double e = mask_[t] ? std::exp(scores(t, k) - mx) : 0.0;
      a_(k, t) = e;
      z += e;
    }
    for (std::size_t t = 0; t < t_count; ++t) a_(k, t) /= z;
  }
  Matrix pooled = kernels::matmul(a_, h);  // heads x d
  PoolOutput out;
  const std::size_t width = pooled.size();
  out.embedding = Matrix(1, width, std::move(pooled.values()));
  out.weights = a_;
  return out;
}

Matrix SelfAttentivePool::backward(const Matrix& d_embedding, const Matrix* d_weights) {
  const std::size_t t_count = h_.rows(), d = h_.cols();
  const auto heads = static_cast<std::size_t>(cfg_.n_heads);
  if (d_embedding.size() != heads * d)
    throw ShapeError("attention pooling backward got " + d_embedding.shape_string());
  const Matrix de(heads, d, d_embedding.values());

  Matrix da = kernels::matmul_nt(de, h_);  // heads x T
  if (d_weights != nullptr) da += *d_weights;
  Matrix dh = kernels::matmul_tn(a_, de);  // T x d

  Matrix dscores(t_count, heads);
  for (std::size_t k = 0; k < heads; ++k) {
    double dot = 0.0;
    for (std::size_t t = 0; t < t_count; ++t) dot += a_(k, t) * da(k, t);
    for (std::size_t t = 0; t < t_count; ++t)
      dscores(t, k) = mask_[t] ? a_(k, t) * (da(k, t) - dot) : 0.0;
  }
  kernels::add_matmul_tn(w2_->grad, u_, dscores);
  Matrix dz = kernels::matmul_nt(dscores, w2_->value);  // T x hidden
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const double u = u_.data()[i];
    dz.data()[i] *= 1.0 - u * u;
  }
  kernels::add_matmul_tn(w1_->grad, h_, dz);
  dh += kernels::matmul_nt(dz, w1_->value);
  return dh;
}

// --------------------------------------------------------------------------

PenaltyResult attention_penalty(const Matrix& weights, const Mask& mask,
                                const AttentionConfig& cfg) {
  const std::size_t heads = weights.rows(), t_count = weights.cols();
  if (heads != static_cast<std::size_t>(cfg.n_heads))
    throw ShapeError("penalty expects " + std::to_string(cfg.n_heads) + " attention rows");
  const Mask present = mask.empty() ? Mask(t_count, 1) : mask;
  if (present.size() != t_count) throw ShapeError("penalty mask length mismatch");
  std::size_t n_present = 0;
  for (auto m : present) n_present += m ? 1 : 0;

  PenaltyResult r;
  r.grad = Matrix(heads, t_count);
  if (n_present == 0) return r;
  const double mu = cfg.penalty_weight;
  const double uniform = 1.0 / static_cast<double>(n_present);
  for (std::size_t k = 0; k < heads; ++k) {
    if (static_cast<int>(k) < cfg.spiky_heads) {
      std::size_t arg = t_count;
      for (std::size_t t = 0; t < t_count; ++t)
        if (present[t] && (arg == t_count || weights(k, t) > weights(k, arg))) arg = t;
      const double deficit = 1.0 - weights(k, arg);
      r.value += mu * deficit * deficit;
      r.grad(k, arg) = -2.0 * mu * deficit;
    } else {
      for (std::size_t t = 0; t < t_count; ++t) {
        if (!present[t]) continue;
        const double diff = weights(k, t) - uniform;
        r.value += mu * diff * diff;
        r.grad(k, t) = 2.0 * mu * diff;
      }
    }
  }
  return r;
}

}  // namespace emo::nn
