#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "emo/matrix.hpp"

namespace emo::nn {

using Rng = std::mt19937_64;

struct Param {
  Matrix value;
  Matrix grad;  // same shape as value
};

// All trainable tensors of a model keyed by layer-qualified name. Iteration
// order is the sorted name order, which fixes initialisation, update and
// serialisation order.
class ParamSet {
 public:
  Param& add(const std::string& name, std::size_t rows, std::size_t cols);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;

  void zero_grads();
  // Glorot-uniform for matrices whose name ends in ".w", zero for biases.
  void init_glorot(Rng& rng);
  void set_zero();

  // Copies values (not gradients) from a set with identical names and shapes.
  void copy_values_from(const ParamSet& other);

  std::map<std::string, Param>& items() { return params_; }
  const std::map<std::string, Param>& items() const { return params_; }

 private:
  std::map<std::string, Param> params_;
};

// "EMOW", u32 version, u32 count, then per tensor: u32 name length, name
// bytes, u32 rank, u32 dims[rank], f32 values. Little-endian throughout.
void save_checkpoint(const std::string& path, const ParamSet& params);
// Loads values into an existing set; names and shapes must match exactly.
void load_checkpoint(const std::string& path, ParamSet& params);
// Serialised bytes, as written by save_checkpoint.
std::string checkpoint_bytes(const ParamSet& params);

}  // namespace emo::nn
