#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emo/eval/manifest.hpp"

namespace emo::eval {

enum class FoldScheme { kSession5, kSpeaker10, kSingleSession5 };

FoldScheme parse_fold_scheme(const std::string& text);
const char* fold_scheme_name(FoldScheme scheme);

struct Fold {
  std::string name;  // held-out session or speaker
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct FoldPlan {
  FoldScheme scheme = FoldScheme::kSession5;
  std::vector<Fold> folds;
};

// session5: one fold per session, holding out both of its speakers.
// speaker10: one fold per speaker. single-session5: train on every session but
// the last in sorted order, test on that one. Records without session or
// speaker throw InvalidInput.
FoldPlan make_folds(const std::vector<ManifestRecord>& records, FoldScheme scheme);

struct FoldAudit {
  bool speaker_exclusive = true;  // no speaker on both sides of any fold
  bool disjoint = true;           // train and test share no utterance
  bool exact_coverage = true;     // every utterance is tested exactly once
  std::vector<std::string> problems;
  bool ok() const { return speaker_exclusive && disjoint && exact_coverage; }
};
FoldAudit audit_folds(const FoldPlan& plan, const std::vector<ManifestRecord>& records);

struct ValidationSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};
// Holds out round(fraction * n) of the given training ids (at least one) chosen
// by a seeded shuffle; both outputs keep the input order.
ValidationSplit split_validation(const std::vector<std::string>& train_ids, double fraction,
                                 std::uint64_t seed);

}  // namespace emo::eval
