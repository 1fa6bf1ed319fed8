#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "emo/config.hpp"
#include "emo/matrix.hpp"
#include "emo/nn/layers.hpp"
#include "emo/nn/margin_softmax.hpp"
#include "emo/nn/params.hpp"
#include "emo/text/embeddings.hpp"

namespace emo::model {

// Time synchronous branch: per-frame concatenation of the enabled streams,
// an input projection, residual TDNN blocks and multi-head pooling.
struct TsbConfig {
  bool use_audio25 = true;
  bool use_fbk250 = false;
  bool use_glove = true;
  std::size_t audio25_dim = 82;
  std::size_t fbk250_dim = 40;
  std::size_t word_dim = 50;
  std::size_t encoder_dim = 256;
  int n_blocks = 4;
  std::vector<int> offsets = {-2, -1, 0, 1, 2};
  nn::AttentionConfig attention;

  bool enabled() const { return use_audio25 || use_fbk250 || use_glove; }
  std::size_t input_dim() const;
};

// Time asynchronous branch: shared projection of every context slot followed
// by masked multi-head pooling.
struct TabConfig {
  bool enabled = true;
  text::ContextSpan span{3, 3};
  std::size_t sentence_dim = 768;
  std::size_t proj_dim = 128;
  nn::AttentionConfig attention;
};

struct FusionConfig {
  std::size_t hidden_dim = 256;
  int n_classes = 4;
  nn::MarginConfig margin;
};

constexpr int kMaxContext = 8;

struct ModelConfig {
  TsbConfig tsb;
  TabConfig tab;
  FusionConfig fusion;
  double dropout = 0.5;

  void validate() const;
  void write(KeyValueConfig& kv) const;
  static ModelConfig read(const KeyValueConfig& kv);
};

// Applies a comma list of {audio25, fbk250, glove, bert} to the branch flags.
void apply_feature_list(ModelConfig& cfg, const std::string& features);
std::string feature_list(const ModelConfig& cfg);

struct Sample {
  std::string utt_id;
  Matrix audio25;  // T x 82
  Matrix fbk250;   // T x 40
  Matrix words;    // T x 50
  text::ContextWindow context;
  int label = -1;
};

struct Prediction {
  std::vector<double> posteriors;
  int label = 0;  // argmax, lowest index on ties
};

struct LossParts {
  double cross_entropy = 0.0;
  double penalty = 0.0;
  int predicted = -1;  // argmax of the plain logits in this forward pass
  double total() const { return cross_entropy + penalty; }
};

class TwoBranchModel {
 public:
  explicit TwoBranchModel(const ModelConfig& cfg);
  TwoBranchModel(const TwoBranchModel&) = delete;
  TwoBranchModel& operator=(const TwoBranchModel&) = delete;

  void init(std::uint64_t seed);
  const ModelConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  // Concatenated TSB input; ShapeError on stream length mismatch, InvalidInput
  // for an empty utterance.
  Matrix tsb_input(const Sample& s) const;

  // Loss of one sample. When `grad_scale` is non-zero the backward pass runs
  // and adds grad_scale * dLoss/dParams into the parameter gradients.
  LossParts forward_backward(const Sample& s, bool training, nn::Rng* rng,
                             double grad_scale);

  // Gradient of the loss with respect to the TSB input and the context
  // vectors from the most recent forward_backward (for gradient checks).
  const Matrix& last_tsb_input_grad() const { return d_tsb_input_; }
  const Matrix& last_context_grad() const { return d_context_; }

  Prediction predict(const Sample& s);

  // Moves the margin blend to its value after `step` optimiser updates.
  void set_training_step(std::size_t step) {
    output_.set_lambda(cfg_.fusion.margin.lambda_at(step));
  }

  // When set, the id of every sample passed through the model is recorded.
  void set_access_log(std::set<std::string>* log) { access_log_ = log; }

  // Branch embeddings in evaluation mode; exposed for tests.
  Matrix tsb_embedding(const Sample& s);
  Matrix tab_embedding(const text::ContextWindow& w);
  const Matrix& last_tsb_attention() const { return tsb_attention_; }
  const Matrix& last_tab_attention() const { return tab_attention_; }

 private:
  struct Forward {
    Matrix fused;
    Matrix hidden_pre;
    Matrix hidden;
    bool tab_active = false;
    std::size_t tsb_dim = 0;
    std::size_t tab_dim = 0;
  };

  Matrix run_tsb(const Matrix& input, bool training, nn::Rng* rng);
  Matrix run_tab(const text::ContextWindow& w, bool training, nn::Rng* rng);
  Forward forward(const Sample& s, bool training, nn::Rng* rng);

  ModelConfig cfg_;
  nn::ParamSet params_;

  nn::Affine tsb_in_;
  Matrix tsb_in_pre_;
  std::vector<nn::TdnnResidualBlock> blocks_;
  nn::SelfAttentivePool tsb_pool_;
  nn::Dropout tsb_drop_;

  nn::Affine tab_proj_;
  Matrix tab_proj_pre_;
  nn::SelfAttentivePool tab_pool_;
  nn::Dropout tab_drop_;
  nn::Mask tab_mask_;

  nn::Affine fuse_;
  nn::MarginSoftmax output_;

  Matrix tsb_attention_, tab_attention_;
  Matrix d_tsb_input_, d_context_;
  std::set<std::string>* access_log_ = nullptr;
};

// Mean over the batch of cross-entropy plus attention penalties; accumulates
// gradients (already divided by the batch size) when backward is true.
LossParts model_loss(TwoBranchModel& model, const std::vector<const Sample*>& batch,
                     bool training, nn::Rng* rng, bool backward);

}  // namespace emo::model
