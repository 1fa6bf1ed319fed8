#include "emo/nn/margin_softmax.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emo/error.hpp"

namespace emo::nn {

namespace {
constexpr double kTinyNorm = 1e-12;
}

void MarginConfig::validate() const {
  if (margin < 1) throw InvalidConfig("margin must be an integer >= 1, got " +
                                      std::to_string(margin));
  if (!(scale > 0.0)) throw InvalidConfig("logit scale must be positive");
  if (!(lambda_base >= 0.0) || !(lambda_gamma >= 0.0) || !(lambda_power >= 0.0) ||
      !(lambda_min >= 0.0))
    throw InvalidConfig("margin lambda schedule values must be non-negative");
}

double MarginConfig::lambda_at(std::size_t step) const {
  if (lambda_base <= 0.0) return 0.0;
  const double l =
      lambda_base * std::pow(1.0 + lambda_gamma * static_cast<double>(step), -lambda_power);
  return std::max(l, lambda_min);
}

AngularValue angular_margin(double cos_theta, int margin) {
  const double c = std::clamp(cos_theta, -1.0, 1.0);
  if (margin == 1) return {c, 1.0};
  const double theta = std::acos(c);
  int k = static_cast<int>(std::floor(theta * margin / std::numbers::pi));
  k = std::clamp(k, 0, margin - 1);
  // Chebyshev: T_m(c) = cos(m theta) and T_m'(c) = m U_{m-1}(c).
  double t_prev = 1.0, t_cur = c;         // T_0, T_1
  double u_prev = 1.0, u_cur = 2.0 * c;   // U_0, U_1
  for (int n = 1; n < margin; ++n) {
    const double t_next = 2.0 * c * t_cur - t_prev;
    t_prev = t_cur;
    t_cur = t_next;
  }
  for (int n = 1; n < margin - 1; ++n) {
    const double u_next = 2.0 * c * u_cur - u_prev;
    u_prev = u_cur;
    u_cur = u_next;
  }
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  return {sign * t_cur - 2.0 * k, sign * margin * u_cur};
}

std::vector<double> softmax(const Matrix& logits) {
  std::vector<double> p(logits.values());
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

double softmax_cross_entropy(const Matrix& logits, std::size_t label) {
  const auto& v = logits.values();
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  return -(v[label] - mx - std::log(z));
}

MarginSoftmax::MarginSoftmax(ParamSet& params, const std::string& name, std::size_t in,
                             std::size_t n_classes, const MarginConfig& cfg)
    : w_(&params.add(name + ".w", n_classes, in)), cfg_(cfg) {
  cfg_.validate();
  lambda_ = cfg_.lambda_at(0);
}

double MarginSoftmax::forward(const Matrix& x, std::size_t label) {
  const std::size_t k_count = w_->value.rows(), d = w_->value.cols();
  if (x.rows() != 1 || x.cols() != d)
    throw ShapeError("margin softmax expects 1x" + std::to_string(d) + ", got " +
                     x.shape_string());
  if (label >= k_count)
    throw InvalidInput("label " + std::to_string(label) + " out of range for " +
                       std::to_string(k_count) + " classes");
  x_ = x;
  label_ = label;
  unit_w_ = w_->value;
  norms_.assign(k_count, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    auto row = unit_w_.row(k);
    double n2 = 0.0;
    for (double v : row) n2 += v * v;
    norms_[k] = std::sqrt(n2);
    const double inv = norms_[k] > kTinyNorm ? 1.0 / norms_[k] : 0.0;
    for (double& v : row) v *= inv;
  }
  double xn2 = 0.0;
  for (double v : x.values()) xn2 += v * v;
  x_norm_ = std::sqrt(xn2);

  Matrix f(1, k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    double dot = 0.0;
    auto w = unit_w_.row(k);
    for (std::size_t c = 0; c < d; ++c) dot += w[c] * x(0, c);
    f(0, k) = cfg_.scale * dot;
    if (k == label_) {
      cos_y_ = x_norm_ > kTinyNorm ? dot / x_norm_ : 0.0;
      if (x_norm_ > kTinyNorm && cfg_.margin > 1) {
        psi_ = angular_margin(cos_y_, cfg_.margin);
        if (lambda_ > 0.0) {
          psi_.psi = (lambda_ * cos_y_ + psi_.psi) / (1.0 + lambda_);
          psi_.dpsi_dc = (lambda_ + psi_.dpsi_dc) / (1.0 + lambda_);
        }
        f(0, k) = cfg_.scale * x_norm_ * psi_.psi;
      } else {
        psi_ = {cos_y_, 1.0};
      }
    }
  }
  probs_ = softmax(f);
  return softmax_cross_entropy(f, label_);
}

Matrix MarginSoftmax::backward(double scale) {
  const std::size_t k_count = w_->value.rows(), d = w_->value.cols();
  const double s = cfg_.scale;
  Matrix dx(1, d);
  const bool use_margin = x_norm_ > kTinyNorm && cfg_.margin > 1;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double g = scale * (probs_[k] - (k == label_ ? 1.0 : 0.0));
    auto w = unit_w_.row(k);
    // dL/d(unit w_k), then project through the normalisation.
    std::vector<double> dw(d);
    if (k == label_ && use_margin) {
      for (std::size_t c = 0; c < d; ++c) {
        const double xc = x_(0, c);
        dx(0, c) += g * s * (psi_.psi * xc / x_norm_ + psi_.dpsi_dc * (w[c] - cos_y_ * xc / x_norm_));
        dw[c] = g * s * psi_.dpsi_dc * xc;
      }
    } else {
      for (std::size_t c = 0; c < d; ++c) {
        dx(0, c) += g * s * w[c];
        dw[c] = g * s * x_(0, c);
      }
    }
    if (norms_[k] <= kTinyNorm) continue;
    double proj = 0.0;
    for (std::size_t c = 0; c < d; ++c) proj += dw[c] * w[c];
    auto grad = w_->grad.row(k);
    for (std::size_t c = 0; c < d; ++c) grad[c] += (dw[c] - proj * w[c]) / norms_[k];
  }
  return dx;
}

Matrix MarginSoftmax::logits(const Matrix& x) const {
  const std::size_t k_count = w_->value.rows(), d = w_->value.cols();
  if (x.cols() != d) throw ShapeError("margin softmax logits got " + x.shape_string());
  Matrix f(1, k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    auto row = w_->value.row(k);
    double n2 = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      n2 += row[c] * row[c];
      dot += row[c] * x(0, c);
    }
    const double n = std::sqrt(n2);
    f(0, k) = n > kTinyNorm ? cfg_.scale * dot / n : 0.0;
  }
  return f;
}

}  // namespace emo::nn
