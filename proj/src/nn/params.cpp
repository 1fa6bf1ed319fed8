#include "emo/nn/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "emo/binary.hpp"
#include "emo/error.hpp"

namespace emo::nn {

namespace {
constexpr char kCheckpointMagic[5] = "EMOW";
constexpr std::uint32_t kCheckpointVersion = 1;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_params(std::ostream& os, const ParamSet& params) {
  binary::write_magic(os, kCheckpointMagic);
  binary::write_u32(os, kCheckpointVersion);
  binary::write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params.items()) {
    binary::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binary::write_u32(os, 2);
    binary::write_u32(os, static_cast<std::uint32_t>(p.value.rows()));
    binary::write_u32(os, static_cast<std::uint32_t>(p.value.cols()));
    for (double v : p.value.values()) binary::write_f32(os, static_cast<float>(v));
  }
}
}  // namespace

Param& ParamSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw InvalidConfig("parameter '" + name + "' registered twice");
  it->second.value = Matrix(rows, cols);
  it->second.grad = Matrix(rows, cols);
  return it->second;
}

Param& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidConfig("no parameter named '" + name + "'");
  return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidConfig("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grads() {
  for (auto& [name, p] : params_) p.grad.set_zero();
}

void ParamSet::init_glorot(Rng& rng) {
  for (auto& [name, p] : params_) {
    if (ends_with(name, ".w")) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : p.value.values()) v = dist(rng);
    } else {
      p.value.set_zero();
    }
  }
}

void ParamSet::set_zero() {
  for (auto& [name, p] : params_) p.value.set_zero();
}

void ParamSet::copy_values_from(const ParamSet& other) {
  if (other.params_.size() != params_.size())
    throw ShapeError("parameter sets differ in size");
  for (auto& [name, p] : params_) {
    const Param& src = other.at(name);
    if (src.value.rows() != p.value.rows() || src.value.cols() != p.value.cols())
      throw ShapeError("parameter '" + name + "' shape mismatch");
    p.value = src.value;
  }
}

std::string checkpoint_bytes(const ParamSet& params) {
  std::ostringstream os(std::ios::binary);
  write_params(os, params);
  return os.str();
}

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingData("cannot open " + path + " for writing");
  write_params(os, params);
  if (!os) throw FormatError("write failed for " + path);
}

void load_checkpoint(const std::string& path, ParamSet& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingData("cannot open checkpoint " + path);
  binary::expect_magic(is, kCheckpointMagic, path);
  const auto version = binary::read_u32(is, path);
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = binary::read_u32(is, path);
  if (count != params.size())
    throw FormatError(path + ": checkpoint holds " + std::to_string(count) +
                      " tensors, model expects " + std::to_string(params.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = binary::read_u32(is, path);
    if (len > 4096) throw FormatError(path + ": implausible tensor name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError(path + ": truncated tensor name");
    if (!params.contains(name))
      throw FormatError(path + ": unexpected tensor '" + name + "'");
    Param& p = params.at(name);
    const auto rank = binary::read_u32(is, path);
    if (rank != 2) throw FormatError(path + ": tensor '" + name + "' has rank " +
                                     std::to_string(rank));
    const auto rows = binary::read_u32(is, path);
    const auto cols = binary::read_u32(is, path);
    if (rows != p.value.rows() || cols != p.value.cols())
      throw FormatError(path + ": tensor '" + name + "' has shape [" +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        "], model expects " + p.value.shape_string());
    for (double& v : p.value.values()) v = binary::read_f32(is, path);
  }
}

}  // namespace emo::nn
