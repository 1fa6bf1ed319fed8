#include "emo/eval/cv.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "emo/error.hpp"
#include "emo/log.hpp"
#include "emo/nn/params.hpp"

namespace emo::eval {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingData("cannot write " + path.string());
  out << text;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

}  // namespace

CvReport run_cv(const Corpus& corpus, const LabelledSet& labelled,
                const model::ModelConfig& model_cfg, const train::TrainConfig& train_cfg,
                const FoldPlan& plan, const std::vector<std::string>& class_names,
                const CvOptions& options) {
  model_cfg.validate();
  train_cfg.validate();
  if (plan.folds.empty()) throw InvalidInput("run_cv: empty fold plan");
  if (class_names.size() != static_cast<std::size_t>(model_cfg.fusion.n_classes))
    throw InvalidConfig("run_cv: " + std::to_string(class_names.size()) +
                        " class names for a " + std::to_string(model_cfg.fusion.n_classes) +
                        "-class model");

  const ConditionStores stores = stores_for(corpus, options.condition, model_cfg);
  const SampleBank train_bank(corpus, labelled, model_cfg, *stores.train);
  std::optional<SampleBank> test_only;
  if (stores.test != stores.train) test_only.emplace(corpus, labelled, model_cfg, *stores.test);
  const SampleBank& test_bank = test_only ? *test_only : train_bank;

  CvReport report;
  report.scheme = plan.scheme;
  report.condition = options.condition;
  report.class_names = class_names;
  std::vector<double> was, uas;
  std::vector<int> all_pred, all_label;
  std::map<std::string, UtterancePrediction> by_id;

  for (std::size_t fi = 0; fi < plan.folds.size(); ++fi) {
    const Fold& fold = plan.folds[fi];
    std::vector<std::string> train_ids, test_ids;
    for (const auto& id : fold.train_ids)
      if (labelled.labels.count(id)) train_ids.push_back(id);
    for (const auto& id : fold.test_ids)
      if (labelled.labels.count(id)) test_ids.push_back(id);
    if (test_ids.empty()) throw InvalidInput("fold " + fold.name + " has no labelled test data");

    train::TrainConfig fold_cfg = train_cfg;
    fold_cfg.seed = train_cfg.seed + fi;
    const ValidationSplit vs =
        split_validation(train_ids, train_cfg.validation_fraction, fold_cfg.seed);

    model::TwoBranchModel model(model_cfg);
    model.init(fold_cfg.seed);
    std::set<std::string> touched;
    model.set_access_log(&touched);
    log_info("fold " + fold.name + ": " + std::to_string(vs.train_ids.size()) + " train, " +
             std::to_string(vs.validation_ids.size()) + " validation, " +
             std::to_string(test_ids.size()) + " test");
    FoldResult fr;
    fr.name = fold.name;
    fr.fit = train::fit(model, train_bank.select(vs.train_ids),
                        train_bank.select(vs.validation_ids), fold_cfg);
    model.set_access_log(nullptr);
    for (const auto& id : test_ids)
      if (touched.count(id)) ++fr.leaked_test_ids;

    const auto test = train::evaluate_split(model, test_bank.select(test_ids));
    fr.metrics = test.metrics;
    for (std::size_t i = 0; i < test_ids.size(); ++i) {
      UtterancePrediction p{test_ids[i], test.labels[i], test.predicted[i]};
      fr.predictions.push_back(p);
      by_id[p.utt_id] = p;
      all_pred.push_back(p.predicted);
      all_label.push_back(p.label);
    }
    fr.checkpoint = nn::checkpoint_bytes(model.params());
    was.push_back(fr.metrics.wa);
    uas.push_back(fr.metrics.ua);

    if (!options.output_dir.empty()) {
      const fs::path dir = fs::path(options.output_dir) / ("fold_" + fold.name);
      fs::create_directories(dir);
      write_text(dir / "model.emow", fr.checkpoint);
      write_text(dir / "history.csv", train::history_csv(fr.fit.history));
      write_text(dir / "predictions.tsv", predictions_tsv(fr.predictions));
    }
    report.folds.push_back(std::move(fr));
  }

  report.wa = mean_std(was);
  report.ua = mean_std(uas);
  report.pooled = compute_metrics(all_pred, all_label, class_names.size());
  if (!options.subset_ids.empty()) {
    std::vector<int> sp, sl;
    for (const auto& id : options.subset_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) continue;
      sp.push_back(it->second.predicted);
      sl.push_back(it->second.label);
    }
    report.subset_name = options.subset_name;
    if (sp.empty())
      log_warning("subset " + options.subset_name + " has no tested utterances");
    else
      report.subset = compute_metrics(sp, sl, class_names.size());
  }

  if (!options.output_dir.empty()) {
    write_text(fs::path(options.output_dir) / "report.txt", report_table(report));
    report_kv(report).save((fs::path(options.output_dir) / "report.kv").string());
  }
  return report;
}

KeyValueConfig report_kv(const CvReport& report) {
  KeyValueConfig kv;
  kv.set("cv.scheme", fold_scheme_name(report.scheme));
  kv.set("cv.text", text_condition_name(report.condition));
  kv.set("cv.folds", std::to_string(report.folds.size()));
  kv.set("cv.wa_mean", format_double(report.wa.mean));
  kv.set("cv.wa_std", format_double(report.wa.std));
  kv.set("cv.ua_mean", format_double(report.ua.mean));
  kv.set("cv.ua_std", format_double(report.ua.std));
  kv.set("cv.pooled_wa", format_double(report.pooled.wa));
  kv.set("cv.pooled_ua", format_double(report.pooled.ua));
  const std::size_t k = report.class_names.size();
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      kv.set("confusion." + report.class_names[a] + "." + report.class_names[b],
             std::to_string(report.pooled.count(a, b)));
  for (const auto& f : report.folds) {
    const std::string p = "fold." + f.name + ".";
    kv.set(p + "wa", format_double(f.metrics.wa));
    kv.set(p + "ua", format_double(f.metrics.ua));
    kv.set(p + "test_utterances", std::to_string(f.predictions.size()));
    kv.set(p + "best_epoch", std::to_string(f.fit.best_epoch));
    kv.set(p + "epochs", std::to_string(f.fit.history.size()));
  }
  if (report.subset) {
    kv.set("subset." + report.subset_name + ".wa", format_double(report.subset->wa));
    kv.set("subset." + report.subset_name + ".ua", format_double(report.subset->ua));
  }
  return kv;
}

std::string report_table(const CvReport& report) {
  std::ostringstream os;
  os << "scheme " << fold_scheme_name(report.scheme) << ", text "
     << text_condition_name(report.condition) << "\n\n";
  os << std::left << std::setw(16) << "fold" << std::right << std::setw(10) << "WA (%)"
     << std::setw(10) << "UA (%)" << std::setw(8) << "n" << '\n';
  for (const auto& f : report.folds)
    os << std::left << std::setw(16) << f.name << std::right << std::setw(10) << pct(f.metrics.wa)
       << std::setw(10) << pct(f.metrics.ua) << std::setw(8) << f.predictions.size() << '\n';
  os << std::left << std::setw(16) << "mean" << std::right << std::setw(10) << pct(report.wa.mean)
     << std::setw(10) << pct(report.ua.mean) << '\n';
  os << std::left << std::setw(16) << "std" << std::right << std::setw(10) << pct(report.wa.std)
     << std::setw(10) << pct(report.ua.std) << "\n\n";
  os << "pooled confusion (rows true, columns predicted)\n" << std::setw(10) << "";
  for (const auto& n : report.class_names) os << std::setw(10) << n;
  os << '\n';
  for (std::size_t a = 0; a < report.class_names.size(); ++a) {
    os << std::setw(10) << report.class_names[a];
    for (std::size_t b = 0; b < report.class_names.size(); ++b)
      os << std::setw(10) << report.pooled.count(a, b);
    os << '\n';
  }
  if (report.subset)
    os << "\nsubset " << report.subset_name << ": WA " << pct(report.subset->wa) << "  UA "
       << pct(report.subset->ua) << '\n';
  return os.str();
}

std::string predictions_tsv(const std::vector<UtterancePrediction>& predictions) {
  std::ostringstream os;
  os << "utt_id\tlabel\tpredicted\n";
  for (const auto& p : predictions) os << p.utt_id << '\t' << p.label << '\t' << p.predicted << '\n';
  return os.str();
}

}  // namespace emo::eval
