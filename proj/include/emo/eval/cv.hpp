#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emo/config.hpp"
#include "emo/eval/dataset.hpp"
#include "emo/eval/folds.hpp"
#include "emo/eval/metrics.hpp"
#include "emo/train/trainer.hpp"

namespace emo::eval {

struct CvOptions {
  TextCondition condition = TextCondition::kRef;
  // When set, each fold writes model.emow, history.csv and predictions.tsv
  // under <output_dir>/fold_<name>/ and the run writes report.txt/report.kv.
  std::string output_dir;
  // Extra pooled scoring over these utterances (for example ASR failures).
  std::vector<std::string> subset_ids;
  std::string subset_name = "subset";
};

struct UtterancePrediction {
  std::string utt_id;
  int label = 0;
  int predicted = 0;
};

struct FoldResult {
  std::string name;
  MetricReport metrics;
  std::vector<UtterancePrediction> predictions;
  train::FitResult fit;
  std::string checkpoint;       // serialised best parameters
  std::size_t leaked_test_ids = 0;  // test utterances seen during fit
};

struct CvReport {
  FoldScheme scheme = FoldScheme::kSession5;
  TextCondition condition = TextCondition::kRef;
  std::vector<std::string> class_names;
  std::vector<FoldResult> folds;
  MeanStd wa, ua;
  MetricReport pooled;
  std::optional<MetricReport> subset;
  std::string subset_name;
};

CvReport run_cv(const Corpus& corpus, const LabelledSet& labelled,
                const model::ModelConfig& model_cfg, const train::TrainConfig& train_cfg,
                const FoldPlan& plan, const std::vector<std::string>& class_names,
                const CvOptions& options = {});

// Machine-readable summary: cv.*, fold.<name>.* and confusion counts.
KeyValueConfig report_kv(const CvReport& report);
// Per-fold WA/UA table with the mean and standard deviation and the pooled
// confusion matrix.
std::string report_table(const CvReport& report);
std::string predictions_tsv(const std::vector<UtterancePrediction>& predictions);

}  // namespace emo::eval
