// Runs every primary acceptance check and prints one PASS/FAIL line each.
// Usage: emo_acceptance [work_dir]   (a temporary directory by default)

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emo/dsp/features.hpp"
#include "emo/eval/cv.hpp"
#include "emo/gradient_suite.hpp"
#include "emo/log.hpp"
#include "emo/nn/layers.hpp"
#include "emo/nn/margin_softmax.hpp"
#include "emo/nn/params.hpp"
#include "emo/synth/corpus.hpp"
#include "emo/train/newbob.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace emo;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[" << what << "] ";
    }
  }
};

int failures = 0;

void report(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "threw: " << e.what();
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail.str() << std::endl;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

void gradient_suite(Outcome& o) {
  const auto t0 = Clock::now();
  const auto results = run_gradient_suite(1);
  const double secs = seconds_since(t0);
  double worst_layer = 0.0, model = 0.0;
  for (const auto& r : results) {
    o.require(r.report.passed, r.name);
    if (r.name == "full_model") model = std::max(model, r.report.max_rel_error);
    else worst_layer = std::max(worst_layer, r.report.max_rel_error);
  }
  o.require(worst_layer < 1e-5, "layer tolerance");
  o.require(model > 0.0 && model < 1e-4, "model tolerance");
  o.require(secs < 120.0, "runtime");
  o.detail << results.size() << " checks, worst layer rel err " << worst_layer
           << ", full model " << model << ", " << secs << " s";
}

void attention(Outcome& o) {
  std::mt19937_64 rng(12);
  nn::ParamSet ps;
  nn::AttentionConfig cfg;
  cfg.attn_hidden = 6;
  nn::SelfAttentivePool pool(ps, "att", 4, cfg);
  ps.init_glorot(rng);
  double row_err = 0.0, masked_diff = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t_count = 1 + trial % 11;
    const Matrix h = random_matrix(t_count, 4, rng, -3.0, 3.0);
    nn::Mask mask(t_count, 1);
    for (std::size_t t = 0; t < t_count; ++t) mask[t] = (rng() % 3) != 0;
    mask[rng() % t_count] = 1;
    const auto out = pool.forward(h, mask);
    for (std::size_t k = 0; k < out.weights.rows(); ++k) {
      double sum = 0.0;
      for (std::size_t t = 0; t < t_count; ++t) sum += out.weights(k, t);
      row_err = std::max(row_err, std::abs(sum - 1.0));
    }
    Matrix g = h;
    for (std::size_t t = 0; t < t_count; ++t)
      if (!mask[t])
        for (double& v : g.row(t)) v = std::uniform_real_distribution<double>(-1e3, 1e3)(rng);
    const auto again = pool.forward(g, mask);
    masked_diff = std::max({masked_diff, max_abs_diff(again.embedding, out.embedding),
                            max_abs_diff(again.weights, out.weights)});
  }
  nn::AttentionConfig pen;
  pen.penalty_weight = 1.0;
  Matrix a(5, 4, 0.25);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t t = 0; t < 4; ++t) a(k, t) = 0.0;
    a(k, (k + 1) % 4) = 1.0;
  }
  const double penalty = nn::attention_penalty(a, {}, pen).value;
  Matrix off = a;
  off(0, 1) = 0.9;
  off(0, 2) = 0.1;
  const double perturbed = nn::attention_penalty(off, {}, pen).value;
  o.require(row_err <= 1e-6, "row sums");
  o.require(masked_diff <= 1e-12, "masked invariance");
  o.require(penalty == 0.0, "penalty zero");
  o.require(perturbed > 0.0, "penalty sensitivity");
  o.detail << "max |row sum - 1| " << row_err << ", masked-slot change " << masked_diff
           << ", penalty at one-hot/uniform " << penalty << " (perturbed " << perturbed << ")";
}

void dsp_oracles(Outcome& o) {
  std::mt19937_64 rng(11);
  double fbk = 0.0;
  for (std::size_t len : {400u, 4000u}) {
    const Matrix frames = random_matrix(4, len, rng, -1.0, 1.0);
    const auto got = dsp::log_mel_fbank(frames, 16000, 40);
    for (std::size_t t = 0; t < frames.rows(); ++t) {
      const auto want = oracle::log_fbank(frames.row(t), 16000, 40);
      for (int m = 0; m < 40; ++m)
        fbk = std::max(fbk, std::abs(std::expm1(got.values(t, static_cast<std::size_t>(m)) - want[m])));
    }
  }
  dsp::AudioSignal tone;
  for (int i = 0; i < 32000; ++i)
    tone.samples.push_back(0.5 * std::sin(2.0 * std::numbers::pi * 200.0 * i / 16000.0));
  const auto track = dsp::track_pitch(tone, dsp::FramingSpec::short_term());
  double pitch = 0.0;
  for (std::size_t t = 10; t + 10 < track.size(); ++t)
    pitch = std::max(pitch, std::abs(track[t].log_pitch - std::log(200.0)) / std::log(200.0));
  dsp::FeatureMatrix flat{Matrix(30, 41, -1.75), 10.0, dsp::StreamTag::kCombined};
  const auto d = dsp::append_deltas(flat);
  double delta = 0.0;
  for (std::size_t t = 0; t < d.num_frames(); ++t)
    for (std::size_t c = 41; c < 82; ++c) delta = std::max(delta, std::abs(d.values(t, c)));
  bool frames_equal = true;
  for (int n : {15999, 16000, 16161, 40037}) {
    dsp::AudioSignal s{std::vector<double>(static_cast<std::size_t>(n), 0.1), 16000};
    for (std::size_t i = 0; i < s.samples.size(); ++i) s.samples[i] = std::sin(0.01 * i);
    const auto st = dsp::compute_audio_streams(s);
    frames_equal = frames_equal && st.audio25.num_frames() == st.fbk250.num_frames() &&
                   dsp::frame_signal(s, dsp::FramingSpec::short_term()).rows() ==
                       dsp::frame_signal(s, dsp::FramingSpec::long_term()).rows();
  }
  o.require(fbk < 1e-6, "fbank");
  o.require(pitch < 0.05, "pitch");
  o.require(delta == 0.0, "deltas");
  o.require(frames_equal, "frame counts");
  o.detail << "fbank rel err " << fbk << ", 200 Hz log-pitch rel err " << pitch
           << ", constant deltas " << delta << ", 25/250 ms frame counts "
           << (frames_equal ? "equal" : "differ");
}

void loss_identities(Outcome& o) {
  std::mt19937_64 rng(31);
  nn::ParamSet p1, p2;
  nn::MarginConfig c1, c2;
  c1.margin = 1;
  c2.margin = 2;
  nn::MarginSoftmax m1(p1, "out", 8, 4, c1);
  nn::MarginSoftmax m2(p2, "out", 8, 4, c2);
  double ce_err = 0.0;
  int violations = 0;
  const int draws = 2000;
  for (int i = 0; i < draws; ++i) {
    const Matrix w = random_matrix(4, 8, rng, -1.0, 1.0);
    const Matrix x = random_matrix(1, 8, rng, -0.3, 0.3);
    const std::size_t y = rng() % 4;
    p1.at("out.w").value = w;
    p2.at("out.w").value = w;
    const double l1 = m1.forward(x, y), l2 = m2.forward(x, y);
    ce_err = std::max(ce_err, std::abs(l1 - oracle::normalised_ce(w, x, y, c1.scale)));
    violations += l2 < l1;
  }
  o.require(ce_err <= 1e-12, "m=1 identity");
  o.require(violations == 0, "m=2 ordering");
  o.detail << "max |m=1 - CE| " << ce_err << ", m=2 < m=1 in " << violations << " of " << draws
           << " draws";
}

void metric_oracle(Outcome& o) {
  std::mt19937_64 rng(1234);
  int mismatches = 0;
  WarningCapture quiet;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 4);
    const std::size_t n = 1 + rng() % 80;
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % static_cast<unsigned>(k));
      pred[i] = static_cast<int>(rng() % static_cast<unsigned>(k));
    }
    const auto r = eval::compute_metrics(pred, truth, static_cast<std::size_t>(k));
    const auto [wa, ua] = oracle::wa_ua(pred, truth, k);
    mismatches += r.wa != wa || r.ua != ua;
  }
  double balanced = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> truth, pred;
    for (int c = 0; c < 4; ++c)
      for (int i = 0; i < 9; ++i) {
        truth.push_back(c);
        pred.push_back(static_cast<int>(rng() % 4));
      }
    const auto r = eval::compute_metrics(pred, truth, 4);
    balanced = std::max(balanced, std::abs(r.wa - r.ua));
  }
  o.require(mismatches == 0, "brute force");
  o.require(balanced <= 1e-15, "balanced");
  o.detail << mismatches << " mismatches in 1000 sets, max |WA - UA| balanced " << balanced;
}

void fold_audits(Outcome& o) {
  std::vector<eval::ManifestRecord> records;
  for (int s = 1; s <= 5; ++s)
    for (int d = 0; d < 4; ++d)
      for (int u = 0; u < 5 + d; ++u) {
        eval::ManifestRecord r;
        r.session = "Ses0" + std::to_string(s);
        r.dialogue_id = r.session + "_d" + std::to_string(d);
        r.utt_id = r.dialogue_id + "_u" + std::to_string(u);
        r.speaker = r.session + ((u + d) % 2 ? "_M" : "_F");
        r.position = u;
        records.push_back(r);
      }
  for (auto scheme : {eval::FoldScheme::kSession5, eval::FoldScheme::kSpeaker10}) {
    const auto plan = eval::make_folds(records, scheme);
    const auto audit = eval::audit_folds(plan, records);
    o.require(audit.ok(), eval::fold_scheme_name(scheme));
    o.detail << eval::fold_scheme_name(scheme) << " " << plan.folds.size() << " folds "
             << (audit.ok() ? "exclusive and exact" : "FAILED") << "; ";
  }
  // The audit must be able to fail.
  auto plan = eval::make_folds(records, eval::FoldScheme::kSpeaker10);
  plan.folds[2].train_ids.push_back(plan.folds[2].test_ids.back());
  o.require(!eval::audit_folds(plan, records).ok(), "negative control");
  o.detail << "tampered plan rejected";
}

void newbob(Outcome& o) {
  const double improvements[] = {0.05, 0.05, 0.001, 0.02, 0.001};
  const double expected[] = {5e-5, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6};
  double metric = 0.4;
  auto s = train::newbob_step(train::newbob_init(5e-5), metric);
  for (int i = 0; i < 5; ++i) {
    o.require(!s.halt, "early halt");
    metric += improvements[i];
    s = train::newbob_step(s, metric);
    o.require(s.lr == expected[i], "lr " + std::to_string(i));
    o.detail << s.lr << (s.halt ? " halt" : "") << (i < 4 ? ", " : "");
  }
  o.require(s.halt, "halt");
}

// Synthetic corpus prepared once for the end-to-end checks.
struct Prepared {
  synth::SynthCorpus synth;
  eval::Corpus corpus;
  eval::LabelledSet labelled;
  eval::FoldPlan plan;
  double seconds = 0.0;
};

Prepared prepare(const fs::path& work) {
  const auto t0 = Clock::now();
  Prepared p;
  p.synth = synth::generate(synth::SynthOptions{}, (work / "synth").string());
  const auto records = eval::load_manifest(p.synth.paths.manifest);
  eval::extract_features(records, p.synth.paths.manifest, p.synth.paths.feature_dir);
  eval::embed_align(records, text::load_word_table(p.synth.paths.word_table),
                    p.synth.paths.feature_dir);
  p.corpus = eval::load_corpus(p.synth.paths);
  p.labelled = eval::apply_labels(p.corpus, eval::LabelMode::kFourWay);
  p.plan = eval::make_folds(p.labelled.records, eval::FoldScheme::kSession5);
  p.seconds = seconds_since(t0);
  return p;
}

struct RunSpec {
  std::string features;
  std::string context;
  eval::TextCondition text = eval::TextCondition::kRef;
  std::vector<std::string> subset;
};

eval::CvReport run(const Prepared& p, const RunSpec& spec) {
  KeyValueConfig kv = KeyValueConfig::load(std::string(EMO_SOURCE_DIR) + "/configs/synth_small.cfg");
  kv.set("model.features", spec.features);
  kv.set("model.tab.context", spec.context);
  eval::CvOptions opts;
  opts.condition = spec.text;
  opts.subset_ids = spec.subset;
  return eval::run_cv(p.corpus, p.labelled, model::ModelConfig::read(kv),
                      train::TrainConfig::read(kv), p.plan,
                      eval::class_names(eval::LabelMode::kFourWay), opts);
}

}  // namespace

int main(int argc, char** argv) {
  const auto start = Clock::now();
  fs::path work;
  bool cleanup = false;
  if (argc > 1) {
    work = argv[1];
  } else {
    work = fs::temp_directory_path() / ("emo_acceptance_" + std::to_string(::getpid()));
    cleanup = true;
  }
  fs::create_directories(work);

  report("Gradient suite", gradient_suite);
  report("Attention invariants", attention);
  report("DSP oracles", dsp_oracles);
  report("Loss identities", loss_identities);
  report("Metric oracle", metric_oracle);
  report("Fold audits", fold_audits);
  report("Newbob trace", newbob);

  std::optional<Prepared> prepared;
  eval::CvReport context_run;
  report("Synthetic end-to-end", [&](Outcome& o) {
    prepared = prepare(work);
    const auto& p = *prepared;
    context_run = run(p, {"audio25,glove,bert", "1,0"});
    const auto tab_only = run(p, {"bert", "0,0", eval::TextCondition::kRef, p.synth.ambiguous_ids});
    const double amb = tab_only.subset ? tab_only.subset->wa : -1.0;
    const double secs = seconds_since(start);
    o.require(context_run.pooled.wa > 0.95, "span (1,0) WA");
    o.require(std::abs(amb - 0.25) <= 0.05, "span (0,0) ambiguous");
    o.require(secs < 900.0, "runtime");
    o.detail << "span (1,0) test WA " << pct(context_run.pooled.wa) << " (fold mean "
             << pct(context_run.wa.mean) << "); TAB-only span (0,0) on "
             << p.synth.ambiguous_ids.size() << " ambiguous utterances " << pct(amb)
             << " (chance 25%); " << p.corpus.records.size() << " utterances, " << secs
             << " s so far";
  });

  report("ASR-robustness structure", [&](Outcome& o) {
    if (!prepared) throw std::runtime_error("synthetic corpus unavailable");
    const auto& p = *prepared;
    double drop[2];
    int i = 0;
    for (const char* span : {"1,1", "0,0"}) {
      const double clean = run(p, {"audio25,bert", span}).pooled.wa;
      const double degraded = run(p, {"audio25,bert", span, eval::TextCondition::kAsr}).pooled.wa;
      drop[i++] = clean - degraded;
      o.detail << "span (" << span << ") " << pct(clean) << " -> " << pct(degraded) << "; ";
    }
    o.require(drop[0] < drop[1], "drop ordering");
    o.detail << p.synth.asr_failure_ids.size() << " of " << p.synth.num_utterances
             << " centre embeddings deleted";
  });

  report("Determinism", [&](Outcome& o) {
    if (!prepared) throw std::runtime_error("synthetic corpus unavailable");
    const auto again = run(*prepared, {"audio25,glove,bert", "1,0"});
    bool same_ckpt = again.folds.size() == context_run.folds.size();
    for (std::size_t f = 0; same_ckpt && f < again.folds.size(); ++f)
      same_ckpt = again.folds[f].checkpoint == context_run.folds[f].checkpoint;
    const bool same_report = eval::report_kv(again).to_string() ==
                                 eval::report_kv(context_run).to_string() &&
                             eval::report_table(again) == eval::report_table(context_run);
    o.require(same_ckpt, "checkpoints");
    o.require(same_report, "reports");
    o.detail << again.folds.size() << " fold checkpoints "
             << (same_ckpt ? "bit-identical" : "differ") << ", reports "
             << (same_report ? "identical" : "differ");
  });

  if (cleanup) fs::remove_all(work);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << " in " << seconds_since(start) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
