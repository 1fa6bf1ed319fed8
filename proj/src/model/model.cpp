#include "emo/model/model.hpp"

#include <algorithm>

#include "emo/error.hpp"

namespace emo::model {

std::size_t TsbConfig::input_dim() const {
  return (use_audio25 ? audio25_dim : 0) + (use_fbk250 ? fbk250_dim : 0) +
         (use_glove ? word_dim : 0);
}

void ModelConfig::validate() const {
  if (!tsb.enabled() && !tab.enabled)
    throw InvalidConfig("both branches are disabled; enable at least one feature");
  if (fusion.n_classes != 4 && fusion.n_classes != 5)
    throw InvalidConfig("n_classes must be 4 or 5, got " + std::to_string(fusion.n_classes));
  if (tab.span.before < 0 || tab.span.after < 0 || tab.span.before > kMaxContext ||
      tab.span.after > kMaxContext)
    throw InvalidConfig("context span components must lie in [0, " +
                        std::to_string(kMaxContext) + "]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidConfig("dropout must lie in [0, 1)");
  if (tsb.enabled()) {
    if (tsb.encoder_dim == 0 || tsb.n_blocks < 0 || tsb.offsets.empty())
      throw InvalidConfig("TSB encoder needs a positive width and at least one offset");
    tsb.attention.validate();
  }
  if (tab.enabled) {
    if (tab.proj_dim == 0 || tab.sentence_dim == 0)
      throw InvalidConfig("TAB projection and sentence dimensions must be positive");
    tab.attention.validate();
  }
  if (fusion.hidden_dim == 0) throw InvalidConfig("fusion hidden size must be positive");
  fusion.margin.validate();
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void write_attention(KeyValueConfig& kv, const std::string& prefix,
                     const nn::AttentionConfig& a) {
  kv.set(prefix + ".heads", std::to_string(a.n_heads));
  kv.set(prefix + ".spiky_heads", std::to_string(a.spiky_heads));
  kv.set(prefix + ".smooth_heads", std::to_string(a.smooth_heads));
  kv.set(prefix + ".attn_hidden", std::to_string(a.attn_hidden));
}

nn::AttentionConfig read_attention(const KeyValueConfig& kv, const std::string& prefix,
                                   double mu) {
  nn::AttentionConfig a;
  a.n_heads = static_cast<int>(kv.get_int(prefix + ".heads", a.n_heads));
  a.spiky_heads = static_cast<int>(kv.get_int(prefix + ".spiky_heads", a.spiky_heads));
  a.smooth_heads = static_cast<int>(kv.get_int(prefix + ".smooth_heads", a.smooth_heads));
  a.attn_hidden = static_cast<std::size_t>(
      kv.get_int(prefix + ".attn_hidden", static_cast<long>(a.attn_hidden)));
  a.penalty_weight = mu;
  return a;
}

}  // namespace

void ModelConfig::write(KeyValueConfig& kv) const {
  kv.set("model.features", feature_list(*this));
  kv.set("model.tsb.encoder_dim", std::to_string(tsb.encoder_dim));
  kv.set("model.tsb.blocks", std::to_string(tsb.n_blocks));
  kv.set("model.tsb.offsets", join_ints(tsb.offsets));
  kv.set("model.tsb.audio25_dim", std::to_string(tsb.audio25_dim));
  kv.set("model.tsb.fbk250_dim", std::to_string(tsb.fbk250_dim));
  kv.set("model.tsb.word_dim", std::to_string(tsb.word_dim));
  write_attention(kv, "model.tsb", tsb.attention);
  kv.set("model.tab.context",
         std::to_string(tab.span.before) + "," + std::to_string(tab.span.after));
  kv.set("model.tab.sentence_dim", std::to_string(tab.sentence_dim));
  kv.set("model.tab.proj_dim", std::to_string(tab.proj_dim));
  write_attention(kv, "model.tab", tab.attention);
  kv.set("model.penalty_weight", format_double(tsb.attention.penalty_weight));
  kv.set("model.fusion.hidden_dim", std::to_string(fusion.hidden_dim));
  kv.set("model.classes", std::to_string(fusion.n_classes));
  kv.set("model.margin", std::to_string(fusion.margin.margin));
  kv.set("model.logit_scale", format_double(fusion.margin.scale));
  kv.set("model.margin_lambda.base", format_double(fusion.margin.lambda_base));
  kv.set("model.margin_lambda.gamma", format_double(fusion.margin.lambda_gamma));
  kv.set("model.margin_lambda.power", format_double(fusion.margin.lambda_power));
  kv.set("model.margin_lambda.min", format_double(fusion.margin.lambda_min));
  kv.set("model.dropout", format_double(dropout));
}

ModelConfig ModelConfig::read(const KeyValueConfig& kv) {
  ModelConfig c;
  apply_feature_list(c, kv.get_string("model.features", feature_list(c)));
  c.tsb.encoder_dim = static_cast<std::size_t>(
      kv.get_int("model.tsb.encoder_dim", static_cast<long>(c.tsb.encoder_dim)));
  c.tsb.n_blocks = static_cast<int>(kv.get_int("model.tsb.blocks", c.tsb.n_blocks));
  c.tsb.offsets = kv.get_int_list("model.tsb.offsets", c.tsb.offsets);
  c.tsb.audio25_dim = static_cast<std::size_t>(
      kv.get_int("model.tsb.audio25_dim", static_cast<long>(c.tsb.audio25_dim)));
  c.tsb.fbk250_dim = static_cast<std::size_t>(
      kv.get_int("model.tsb.fbk250_dim", static_cast<long>(c.tsb.fbk250_dim)));
  c.tsb.word_dim = static_cast<std::size_t>(
      kv.get_int("model.tsb.word_dim", static_cast<long>(c.tsb.word_dim)));
  const double mu = kv.get_double("model.penalty_weight", c.tsb.attention.penalty_weight);
  c.tsb.attention = read_attention(kv, "model.tsb", mu);
  if (kv.has("model.tab.context"))
    c.tab.span = text::parse_context_span(kv.get_string("model.tab.context", ""));
  c.tab.sentence_dim = static_cast<std::size_t>(
      kv.get_int("model.tab.sentence_dim", static_cast<long>(c.tab.sentence_dim)));
  c.tab.proj_dim = static_cast<std::size_t>(
      kv.get_int("model.tab.proj_dim", static_cast<long>(c.tab.proj_dim)));
  c.tab.attention = read_attention(kv, "model.tab", mu);
  c.fusion.hidden_dim = static_cast<std::size_t>(
      kv.get_int("model.fusion.hidden_dim", static_cast<long>(c.fusion.hidden_dim)));
  c.fusion.n_classes = static_cast<int>(kv.get_int("model.classes", c.fusion.n_classes));
  c.fusion.margin.margin = static_cast<int>(kv.get_int("model.margin", c.fusion.margin.margin));
  c.fusion.margin.scale = kv.get_double("model.logit_scale", c.fusion.margin.scale);
  auto& m = c.fusion.margin;
  m.lambda_base = kv.get_double("model.margin_lambda.base", m.lambda_base);
  m.lambda_gamma = kv.get_double("model.margin_lambda.gamma", m.lambda_gamma);
  m.lambda_power = kv.get_double("model.margin_lambda.power", m.lambda_power);
  m.lambda_min = kv.get_double("model.margin_lambda.min", m.lambda_min);
  c.dropout = kv.get_double("model.dropout", c.dropout);
  return c;
}

void apply_feature_list(ModelConfig& cfg, const std::string& features) {
  cfg.tsb.use_audio25 = cfg.tsb.use_fbk250 = cfg.tsb.use_glove = false;
  cfg.tab.enabled = false;
  for (const auto& f : split(features, ',')) {
    if (f == "audio25") cfg.tsb.use_audio25 = true;
    else if (f == "fbk250") cfg.tsb.use_fbk250 = true;
    else if (f == "glove") cfg.tsb.use_glove = true;
    else if (f == "bert") cfg.tab.enabled = true;
    else if (!f.empty())
      throw UsageError("unknown feature '" + f + "' (expected audio25, fbk250, glove, bert)");
  }
}

std::string feature_list(const ModelConfig& cfg) {
  std::vector<std::string> parts;
  if (cfg.tsb.use_audio25) parts.push_back("audio25");
  if (cfg.tsb.use_fbk250) parts.push_back("fbk250");
  if (cfg.tsb.use_glove) parts.push_back("glove");
  if (cfg.tab.enabled) parts.push_back("bert");
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s;
}

// ---------------------------------------------------------------------------

TwoBranchModel::TwoBranchModel(const ModelConfig& cfg)
    : cfg_(cfg), tsb_drop_(cfg.dropout), tab_drop_(cfg.dropout) {
  cfg_.validate();
  std::size_t fused_dim = 0;
  if (cfg_.tsb.enabled()) {
    const std::size_t d = cfg_.tsb.encoder_dim;
    tsb_in_ = nn::Affine(params_, "tsb.input", cfg_.tsb.input_dim(), d);
    for (int i = 0; i < cfg_.tsb.n_blocks; ++i)
      blocks_.emplace_back(params_, "tsb.block" + std::to_string(i), d, cfg_.tsb.offsets,
                           cfg_.dropout);
    tsb_pool_ = nn::SelfAttentivePool(params_, "tsb.pool", d, cfg_.tsb.attention);
    fused_dim += tsb_pool_.output_dim();
  }
  if (cfg_.tab.enabled) {
    tab_proj_ = nn::Affine(params_, "tab.proj", cfg_.tab.sentence_dim, cfg_.tab.proj_dim);
    tab_pool_ = nn::SelfAttentivePool(params_, "tab.pool", cfg_.tab.proj_dim,
                                      cfg_.tab.attention);
    fused_dim += tab_pool_.output_dim();
  }
  fuse_ = nn::Affine(params_, "fusion.hidden", fused_dim, cfg_.fusion.hidden_dim);
  output_ = nn::MarginSoftmax(params_, "fusion.output", cfg_.fusion.hidden_dim,
                              static_cast<std::size_t>(cfg_.fusion.n_classes),
                              cfg_.fusion.margin);
}

void TwoBranchModel::init(std::uint64_t seed) {
  nn::Rng rng(seed);
  params_.init_glorot(rng);
  params_.zero_grads();
}

Matrix TwoBranchModel::tsb_input(const Sample& s) const {
  std::vector<const Matrix*> parts;
  auto add = [&](bool on, const Matrix& m, std::size_t dim, const char* name) {
    if (!on) return;
    if (m.cols() != dim)
      throw ShapeError(std::string(name) + " stream is " + std::to_string(m.cols()) +
                       "-d, model expects " + std::to_string(dim));
    parts.push_back(&m);
  };
  add(cfg_.tsb.use_audio25, s.audio25, cfg_.tsb.audio25_dim, "audio25");
  add(cfg_.tsb.use_fbk250, s.fbk250, cfg_.tsb.fbk250_dim, "fbk250");
  add(cfg_.tsb.use_glove, s.words, cfg_.tsb.word_dim, "word");
  if (parts.empty()) throw InvalidConfig("TSB has no enabled input stream");
  const std::size_t t_count = parts.front()->rows();
  for (const Matrix* p : parts)
    if (p->rows() != t_count)
      throw ShapeError("utterance " + s.utt_id + ": streams disagree on frame count (" +
                       std::to_string(p->rows()) + " vs " + std::to_string(t_count) + ")");
  if (t_count == 0) throw InvalidInput("utterance " + s.utt_id + " has no frames");
  return hconcat(parts);
}

Matrix TwoBranchModel::run_tsb(const Matrix& input, bool training, nn::Rng* rng) {
  tsb_in_pre_ = tsb_in_.forward(input);
  Matrix h = nn::relu(tsb_in_pre_);
  for (auto& block : blocks_) h = block.forward(h, training, rng);
  nn::PoolOutput pooled = tsb_pool_.forward(h, {});
  tsb_attention_ = std::move(pooled.weights);
  return tsb_drop_.forward(pooled.embedding, training, rng);
}

Matrix TwoBranchModel::run_tab(const text::ContextWindow& w, bool training, nn::Rng* rng) {
  if (w.vectors.rows() != w.span.width() || w.mask.size() != w.span.width())
    throw ShapeError("context window length does not match its span");
  if (w.vectors.cols() != cfg_.tab.sentence_dim)
    throw ShapeError("context vectors are " + std::to_string(w.vectors.cols()) +
                     "-d, model expects " + std::to_string(cfg_.tab.sentence_dim));
  tab_mask_ = w.mask;
  tab_proj_pre_ = tab_proj_.forward(w.vectors);
  nn::PoolOutput pooled = tab_pool_.forward(nn::relu(tab_proj_pre_), tab_mask_);
  tab_attention_ = std::move(pooled.weights);
  return tab_drop_.forward(pooled.embedding, training, rng);
}

Matrix TwoBranchModel::tsb_embedding(const Sample& s) {
  if (!cfg_.tsb.enabled()) throw InvalidConfig("TSB is disabled");
  return run_tsb(tsb_input(s), false, nullptr);
}

Matrix TwoBranchModel::tab_embedding(const text::ContextWindow& w) {
  if (!cfg_.tab.enabled) throw InvalidConfig("TAB is disabled");
  return run_tab(w, false, nullptr);
}

TwoBranchModel::Forward TwoBranchModel::forward(const Sample& s, bool training, nn::Rng* rng) {
  if (access_log_ != nullptr) access_log_->insert(s.utt_id);
  Forward f;
  std::vector<Matrix> parts;
  if (cfg_.tsb.enabled()) {
    parts.push_back(run_tsb(tsb_input(s), training, rng));
    f.tsb_dim = parts.back().cols();
  }
  if (cfg_.tab.enabled) {
    // A window with no present slot (e.g. no recognised text anywhere in it)
    // contributes a zero embedding instead of failing the whole sample.
    f.tab_active = s.context.any_present();
    if (f.tab_active) {
      parts.push_back(run_tab(s.context, training, rng));
    } else {
      parts.emplace_back(1, tab_pool_.output_dim());
      tab_attention_ = Matrix();
    }
    f.tab_dim = parts.back().cols();
  }
  std::vector<const Matrix*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  f.fused = hconcat(ptrs);
  f.hidden_pre = fuse_.forward(f.fused);
  f.hidden = nn::relu(f.hidden_pre);
  return f;
}

LossParts TwoBranchModel::forward_backward(const Sample& s, bool training, nn::Rng* rng,
                                           double grad_scale) {
  if (s.label < 0 || s.label >= cfg_.fusion.n_classes)
    throw InvalidInput("utterance " + s.utt_id + ": label " + std::to_string(s.label) +
                       " out of range");
  Forward f = forward(s, training, rng);
  LossParts loss;
  loss.cross_entropy = output_.forward(f.hidden, static_cast<std::size_t>(s.label));
  {
    const Matrix logits = output_.logits(f.hidden);
    const auto& v = logits.values();
    loss.predicted = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  }
  nn::PenaltyResult tsb_pen, tab_pen;
  if (cfg_.tsb.enabled()) {
    tsb_pen = nn::attention_penalty(tsb_attention_, {}, cfg_.tsb.attention);
    loss.penalty += tsb_pen.value;
  }
  if (f.tab_active) {
    tab_pen = nn::attention_penalty(tab_attention_, tab_mask_, cfg_.tab.attention);
    loss.penalty += tab_pen.value;
  }
  if (grad_scale == 0.0) return loss;

  const Matrix d_hidden = output_.backward(grad_scale);
  const Matrix d_fused = fuse_.backward(nn::relu_backward(f.hidden_pre, d_hidden));
  std::size_t offset = 0;
  if (cfg_.tsb.enabled()) {
    Matrix d_emb = tsb_drop_.backward(column_slice(d_fused, offset, f.tsb_dim));
    offset += f.tsb_dim;
    tsb_pen.grad *= grad_scale;
    Matrix dh = tsb_pool_.backward(d_emb, &tsb_pen.grad);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = it->backward(dh);
    d_tsb_input_ = tsb_in_.backward(nn::relu_backward(tsb_in_pre_, dh));
  }
  if (cfg_.tab.enabled) {
    if (f.tab_active) {
      Matrix d_emb = tab_drop_.backward(column_slice(d_fused, offset, f.tab_dim));
      tab_pen.grad *= grad_scale;
      Matrix dp = tab_pool_.backward(d_emb, &tab_pen.grad);
      d_context_ = tab_proj_.backward(nn::relu_backward(tab_proj_pre_, dp));
    } else {
      d_context_ = Matrix(s.context.vectors.rows(), s.context.vectors.cols());
    }
  }
  return loss;
}

Prediction TwoBranchModel::predict(const Sample& s) {
  Forward f = forward(s, false, nullptr);
  Prediction p;
  p.posteriors = nn::softmax(output_.logits(f.hidden));
  p.label = static_cast<int>(std::max_element(p.posteriors.begin(), p.posteriors.end()) -
                             p.posteriors.begin());
  return p;
}

LossParts model_loss(TwoBranchModel& model, const std::vector<const Sample*>& batch,
                     bool training, nn::Rng* rng, bool backward) {
  if (batch.empty()) throw InvalidInput("empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossParts total;
  for (const Sample* s : batch) {
    const LossParts l = model.forward_backward(*s, training, rng, backward ? inv : 0.0);
    total.cross_entropy += l.cross_entropy * inv;
    total.penalty += l.penalty * inv;
  }
  return total;
}

}  // namespace emo::model
