#pragma once

#include <cstddef>

#include "emo/matrix.hpp"
#include "emo/nn/params.hpp"

namespace emo::nn {

struct MarginConfig {
  int margin = 2;
  double scale = 30.0;
  // Annealed blend between the plain and the margin target logit:
  // lambda(step) = max(lambda_min, lambda_base * (1 + lambda_gamma * step)^-lambda_power).
  // lambda_base = 0 disables the blend.
  double lambda_base = 0.0;
  double lambda_gamma = 0.0;
  double lambda_power = 1.0;
  double lambda_min = 0.0;

  double lambda_at(std::size_t step) const;

  void validate() const;
};

// psi(theta) = (-1)^k cos(m theta) - 2k on [k pi/m, (k+1) pi/m]; evaluated from
// c = cos(theta). Returns the value and d psi / d c.
struct AngularValue {
  double psi = 0.0;
  double dpsi_dc = 0.0;
};
AngularValue angular_margin(double cos_theta, int margin);

// Output layer with L2-normalised class weights and an angular margin on the
// target class. Logits are scale * ||x|| * cos(theta_k), the target class using
// psi(theta_y) instead of cos(theta_y). With margin 1 this is ordinary softmax
// cross-entropy over the normalised-weight logits.
class MarginSoftmax {
 public:
  MarginSoftmax() = default;
  // Registers "<name>.w" (n_classes x in).
  MarginSoftmax(ParamSet& params, const std::string& name, std::size_t in,
                std::size_t n_classes, const MarginConfig& cfg);

  // x: 1 x in. Returns the cross-entropy over margin-adjusted logits.
  double forward(const Matrix& x, std::size_t label);
  // Gradient of the last forward's loss scaled by `scale`; returns dL/dx.
  Matrix backward(double scale = 1.0);

  // Plain normalised-weight logits (no margin), 1 x n_classes.
  Matrix logits(const Matrix& x) const;
  std::size_t n_classes() const { return w_->value.rows(); }
  const MarginConfig& config() const { return cfg_; }
  // Target logit becomes (lambda cos + psi) / (1 + lambda).
  void set_lambda(double lambda) { lambda_ = lambda; }
  double lambda() const { return lambda_; }

 private:
  Param* w_ = nullptr;
  MarginConfig cfg_;
  double lambda_ = 0.0;
  // forward cache
  Matrix x_;
  Matrix unit_w_;
  std::vector<double> norms_;
  std::vector<double> probs_;
  std::size_t label_ = 0;
  double x_norm_ = 0.0;
  double cos_y_ = 0.0;
  AngularValue psi_;
};

// Reference softmax cross-entropy of a logit row against a label.
double softmax_cross_entropy(const Matrix& logits, std::size_t label);
std::vector<double> softmax(const Matrix& logits);

}  // namespace emo::nn
