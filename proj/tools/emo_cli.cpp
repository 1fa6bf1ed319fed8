#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "emo/error.hpp"
#include "emo/eval/cv.hpp"
#include "emo/eval/dataset.hpp"
#include "emo/eval/folds.hpp"
#include "emo/eval/labels.hpp"
#include "emo/gradient_suite.hpp"
#include "emo/kernels.hpp"
#include "emo/log.hpp"
#include "emo/model/model.hpp"
#include "emo/stamp.hpp"
#include "emo/synth/corpus.hpp"
#include "emo/text/embeddings.hpp"
#include "emo/train/trainer.hpp"

namespace fs = std::filesystem;
using emo::KeyValueConfig;

namespace {

struct Flags {
  std::vector<std::string> configs;
  std::string manifest;
  std::string fold_scheme;
  std::string labels;
  std::string text;
  std::string context;
  std::string features;
  std::optional<long> seed;
  std::vector<std::string> sets;
  std::string out;
  bool emit_table = false;
  bool verbose = false;
  // subcommand specific
  std::string checkpoint;
  int fold = 0;
  int sessions = 5;
  int dialogues = 8;
  int blocks = 2;
  int block_length = 6;
  int threads = 0;
};

const char* const kDataKeys[] = {"data.manifest", "data.features", "data.sentences_ref",
                                 "data.sentences_asr", "data.word_table"};

KeyValueConfig defaults() {
  KeyValueConfig kv;
  emo::model::ModelConfig{}.write(kv);
  emo::train::TrainConfig{}.write(kv);
  kv.set("run.fold_scheme", "session5");
  kv.set("run.labels", "4way");
  kv.set("run.text", "ref");
  return kv;
}

std::string absolute(const std::string& path, const fs::path& base) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return fs::weakly_canonical(base / path).string();
}

// defaults < config files in order < flags
KeyValueConfig resolve(const Flags& f) {
  KeyValueConfig kv = defaults();
  for (const auto& path : f.configs) {
    KeyValueConfig file = KeyValueConfig::load(path);
    const fs::path base = fs::absolute(path).parent_path();
    for (const char* key : kDataKeys)
      if (file.has(key)) file.set(key, absolute(file.get_string(key, ""), base));
    kv.merge(file);
  }
  const fs::path cwd = fs::current_path();
  if (!f.manifest.empty()) kv.set("data.manifest", absolute(f.manifest, cwd));
  if (!f.fold_scheme.empty()) kv.set("run.fold_scheme", f.fold_scheme);
  if (!f.labels.empty()) kv.set("run.labels", f.labels);
  if (!f.text.empty()) kv.set("run.text", f.text);
  if (!f.context.empty()) kv.set("model.tab.context", f.context);
  if (!f.features.empty()) kv.set("model.features", f.features);
  if (f.seed) kv.set("train.seed", std::to_string(*f.seed));
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw emo::UsageError("--set expects key=value, got '" + s + "'");
    kv.set(emo::trim(s.substr(0, eq)), emo::trim(s.substr(eq + 1)));
  }

  // Validate everything up front so inconsistent configs fail before any work.
  emo::eval::parse_fold_scheme(kv.get_string("run.fold_scheme", ""));
  const auto mode = emo::eval::parse_label_mode(kv.get_string("run.labels", ""));
  emo::eval::parse_text_condition(kv.get_string("run.text", ""));
  emo::text::parse_context_span(kv.get_string("model.tab.context", ""));
  kv.set("model.classes", std::to_string(emo::eval::num_classes(mode)));
  emo::model::ModelConfig::read(kv).validate();
  emo::train::TrainConfig::read(kv);
  return kv;
}

std::string require_out(const Flags& f) {
  if (f.out.empty()) throw emo::UsageError("--out is required");
  fs::create_directories(f.out);
  return f.out;
}

void print_row_table(const KeyValueConfig& kv, const emo::eval::CvReport& r) {
  auto pct = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * v;
    return os.str();
  };
  std::cout << "| features | context | text | folds | WA (%) | UA (%) |\n"
            << "|---|---|---|---|---|---|\n"
            << "| " << kv.get_string("model.features", "") << " | "
            << kv.get_string("model.tab.context", "") << " | "
            << emo::eval::text_condition_name(r.condition) << " | "
            << emo::eval::fold_scheme_name(r.scheme) << " | " << pct(r.wa.mean) << " ± "
            << pct(r.wa.std) << " | " << pct(r.ua.mean) << " ± " << pct(r.ua.std) << " |\n";
}

struct Prepared {
  emo::eval::Corpus corpus;
  emo::eval::LabelledSet labelled;
  emo::eval::LabelMode mode;
  emo::model::ModelConfig model_cfg;
  emo::train::TrainConfig train_cfg;
  emo::eval::FoldPlan plan;
  emo::eval::TextCondition condition;
};

Prepared prepare(const KeyValueConfig& kv) {
  Prepared p;
  p.corpus = emo::eval::load_corpus(emo::eval::CorpusPaths::read(kv));
  p.mode = emo::eval::parse_label_mode(kv.get_string("run.labels", "4way"));
  p.labelled = emo::eval::apply_labels(p.corpus, p.mode);
  p.model_cfg = emo::model::ModelConfig::read(kv);
  p.train_cfg = emo::train::TrainConfig::read(kv);
  p.plan = emo::eval::make_folds(p.labelled.records,
                                 emo::eval::parse_fold_scheme(kv.get_string("run.fold_scheme", "")));
  p.condition = emo::eval::parse_text_condition(kv.get_string("run.text", "ref"));
  return p;
}

const emo::eval::Fold& pick_fold(const Prepared& p, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= p.plan.folds.size())
    throw emo::UsageError("--fold " + std::to_string(index) + " is outside the " +
                          std::to_string(p.plan.folds.size()) + "-fold plan");
  return p.plan.folds[static_cast<std::size_t>(index)];
}

std::vector<std::string> labelled_only(const Prepared& p, const std::vector<std::string>& ids) {
  std::vector<std::string> out;
  for (const auto& id : ids)
    if (p.labelled.labels.count(id)) out.push_back(id);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw emo::MissingData("cannot write " + path.string());
  out << text;
}

int cmd_extract(const Flags& f) {
  const KeyValueConfig kv = resolve(f);
  const auto paths = emo::eval::CorpusPaths::read(kv);
  if (paths.feature_dir.empty()) throw emo::InvalidConfig("data.features is not set");
  const auto records = emo::eval::load_manifest(paths.manifest);
  emo::eval::extract_features(records, paths.manifest, paths.feature_dir);
  emo::write_stamp((fs::path(paths.feature_dir) / "stamp_extract.cfg").string(), kv,
                   "extract-features");
  return 0;
}

int cmd_embed_align(const Flags& f) {
  const KeyValueConfig kv = resolve(f);
  const auto paths = emo::eval::CorpusPaths::read(kv);
  if (paths.word_table.empty()) throw emo::InvalidConfig("data.word_table is not set");
  const auto records = emo::eval::load_manifest(paths.manifest);
  const auto table = emo::text::load_word_table(paths.word_table);
  emo::eval::embed_align(records, table, paths.feature_dir);
  emo::write_stamp((fs::path(paths.feature_dir) / "stamp_embed.cfg").string(), kv, "embed-align");
  return 0;
}

int cmd_train(const Flags& f) {
  KeyValueConfig kv = resolve(f);
  kv.set("run.fold", std::to_string(f.fold));
  const fs::path out = require_out(f);
  Prepared p = prepare(kv);
  const auto& fold = pick_fold(p, f.fold);
  const auto stores = emo::eval::stores_for(p.corpus, p.condition, p.model_cfg);
  const emo::eval::SampleBank bank(p.corpus, p.labelled, p.model_cfg, *stores.train);
  const auto split = emo::eval::split_validation(labelled_only(p, fold.train_ids),
                                                 p.train_cfg.validation_fraction, p.train_cfg.seed);
  emo::model::TwoBranchModel model(p.model_cfg);
  model.init(p.train_cfg.seed);
  const auto result = emo::train::fit(model, bank.select(split.train_ids),
                                      bank.select(split.validation_ids), p.train_cfg);
  emo::nn::save_checkpoint((out / "model.emow").string(), model.params());
  write_file(out / "history.csv", emo::train::history_csv(result.history));
  KeyValueConfig model_kv = kv;
  model_kv.save((out / "model.cfg").string());
  emo::write_stamp((out / "stamp.cfg").string(), kv, "train");
  std::cout << "best epoch " << result.best_epoch << ", validation WA "
            << emo::format_double(result.best_val_wa) << "\n";
  return 0;
}

int cmd_evaluate(const Flags& f) {
  KeyValueConfig kv = resolve(f);
  kv.set("run.fold", std::to_string(f.fold));
  const fs::path out = require_out(f);
  const std::string ckpt = f.checkpoint.empty() ? (out / "model.emow").string() : f.checkpoint;
  Prepared p = prepare(kv);
  const auto& fold = pick_fold(p, f.fold);
  const auto stores = emo::eval::stores_for(p.corpus, p.condition, p.model_cfg);
  const emo::eval::SampleBank bank(p.corpus, p.labelled, p.model_cfg, *stores.test);
  emo::model::TwoBranchModel model(p.model_cfg);
  emo::nn::load_checkpoint(ckpt, model.params());
  const auto test_ids = labelled_only(p, fold.test_ids);
  const auto res = emo::train::evaluate_split(model, bank.select(test_ids));

  emo::eval::CvReport report;
  report.scheme = p.plan.scheme;
  report.condition = p.condition;
  report.class_names = emo::eval::class_names(p.mode);
  emo::eval::FoldResult fr;
  fr.name = fold.name;
  fr.metrics = res.metrics;
  for (std::size_t i = 0; i < test_ids.size(); ++i)
    fr.predictions.push_back({test_ids[i], res.labels[i], res.predicted[i]});
  report.folds.push_back(fr);
  report.wa = emo::eval::mean_std({res.metrics.wa});
  report.ua = emo::eval::mean_std({res.metrics.ua});
  report.pooled = res.metrics;

  write_file(out / "eval_report.txt", emo::eval::report_table(report));
  emo::eval::report_kv(report).save((out / "eval_report.kv").string());
  write_file(out / "eval_predictions.tsv", emo::eval::predictions_tsv(fr.predictions));
  emo::write_stamp((out / "stamp_eval.cfg").string(), kv, "evaluate");
  std::cout << emo::eval::report_table(report);
  if (f.emit_table) print_row_table(kv, report);
  return 0;
}

int cmd_cv(const Flags& f) {
  const KeyValueConfig kv = resolve(f);
  const fs::path out = require_out(f);
  Prepared p = prepare(kv);
  emo::eval::CvOptions opts;
  opts.condition = p.condition;
  opts.output_dir = out.string();
  if (p.condition != emo::eval::TextCondition::kRef) {
    for (const auto& r : p.corpus.records)
      if (emo::trim(r.asr_transcript).empty()) opts.subset_ids.push_back(r.utt_id);
    opts.subset_name = "asr_failures";
  }
  const auto report = emo::eval::run_cv(p.corpus, p.labelled, p.model_cfg, p.train_cfg, p.plan,
                                        emo::eval::class_names(p.mode), opts);
  emo::write_stamp((out / "stamp.cfg").string(), kv, "cv");
  std::cout << emo::eval::report_table(report);
  if (f.emit_table) print_row_table(kv, report);
  return 0;
}

int cmd_synth(const Flags& f) {
  const fs::path out = require_out(f);
  emo::synth::SynthOptions opt;
  if (f.seed) {
    if (*f.seed < 0) throw emo::UsageError("--seed must be non-negative");
    opt.seed = static_cast<std::uint64_t>(*f.seed);
  }
  opt.sessions = f.sessions;
  opt.dialogues_per_session = f.dialogues;
  opt.blocks_per_dialogue = f.blocks;
  opt.block_length = f.block_length;
  const auto corpus = emo::synth::generate(opt, out.string());
  KeyValueConfig kv;
  kv.set("synth.seed", std::to_string(opt.seed));
  kv.set("synth.sessions", std::to_string(opt.sessions));
  kv.set("synth.dialogues_per_session", std::to_string(opt.dialogues_per_session));
  kv.set("synth.blocks_per_dialogue", std::to_string(opt.blocks_per_dialogue));
  kv.set("synth.block_length", std::to_string(opt.block_length));
  emo::write_stamp((out / "stamp.cfg").string(), kv, "synth");
  std::cout << "wrote " << corpus.num_utterances << " utterances; config " << corpus.config_path
            << "\n";
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  const std::uint64_t seed = f.seed ? static_cast<std::uint64_t>(*f.seed) : 1;
  bool ok = true;
  for (const auto& r : emo::run_gradient_suite(seed)) {
    std::cout << std::left << std::setw(26) << r.name << r.report.summary() << "\n";
    ok = ok && r.report.passed;
  }
  if (!f.out.empty()) {
    KeyValueConfig kv;
    kv.set("gradcheck.seed", std::to_string(seed));
    emo::write_stamp((fs::path(require_out(f)) / "stamp_gradcheck.cfg").string(), kv, "gradcheck");
  }
  return ok ? 0 : 1;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.configs, "Key-value config file (repeatable, later wins)");
  cmd->add_option("--manifest", f.manifest, "JSONL manifest");
  cmd->add_option("--fold-scheme", f.fold_scheme, "session5 | speaker10 | single-session5");
  cmd->add_option("--labels", f.labels, "4way | 5way");
  cmd->add_option("--text", f.text, "ref | asr | mix");
  cmd->add_option("--context", f.context, "Context span c1,c2");
  cmd->add_option("--features", f.features, "Comma list of audio25,fbk250,glove,bert");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--set", f.sets, "Extra key=value override (repeatable)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--threads", f.threads, "OpenMP threads (0 = default)");
  cmd->add_flag("--emit-table", f.emit_table, "Print a summary table row");
  cmd->add_flag("-v,--verbose", f.verbose, "Log progress to stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-branch speech emotion recognition engine"};
  app.require_subcommand(1);
  Flags f;
  auto* extract = app.add_subcommand("extract-features", "Compute and normalise audio features");
  auto* embed = app.add_subcommand("embed-align", "Write frame-level word vector streams");
  auto* train = app.add_subcommand("train", "Train one model on a fold's training side");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a fold's test side");
  auto* cv = app.add_subcommand("cv", "Cross-validate over a fold plan");
  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  for (auto* cmd : {extract, embed, train, evaluate, cv, synth, gradcheck}) add_common(cmd, f);
  for (auto* cmd : {train, evaluate}) cmd->add_option("--fold", f.fold, "Fold index");
  evaluate->add_option("--checkpoint", f.checkpoint, "Checkpoint (default <out>/model.emow)");
  synth->add_option("--sessions", f.sessions, "Number of sessions");
  synth->add_option("--dialogues", f.dialogues, "Dialogues per session");
  synth->add_option("--blocks", f.blocks, "Same-label blocks per dialogue");
  synth->add_option("--block-length", f.block_length, "Utterances per block");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << e.what() << "\n";
    return 2;
  }

  emo::set_verbose(f.verbose);
  if (f.threads > 0) emo::kernels::set_num_threads(f.threads);
  try {
    if (*extract) return cmd_extract(f);
    if (*embed) return cmd_embed_align(f);
    if (*train) return cmd_train(f);
    if (*evaluate) return cmd_evaluate(f);
    if (*cv) return cmd_cv(f);
    if (*synth) return cmd_synth(f);
    if (*gradcheck) return cmd_gradcheck(f);
  } catch (const emo::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
