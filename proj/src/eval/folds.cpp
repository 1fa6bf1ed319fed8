#include "emo/eval/folds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "emo/error.hpp"
#include "emo/nn/params.hpp"

namespace emo::eval {

FoldScheme parse_fold_scheme(const std::string& text) {
  if (text == "session5") return FoldScheme::kSession5;
  if (text == "speaker10") return FoldScheme::kSpeaker10;
  if (text == "single-session5") return FoldScheme::kSingleSession5;
  throw UsageError("fold scheme must be session5, speaker10 or single-session5, got '" + text +
                   "'");
}

const char* fold_scheme_name(FoldScheme scheme) {
  switch (scheme) {
    case FoldScheme::kSession5: return "session5";
    case FoldScheme::kSpeaker10: return "speaker10";
    case FoldScheme::kSingleSession5: return "single-session5";
  }
  return "?";
}

FoldPlan make_folds(const std::vector<ManifestRecord>& records, FoldScheme scheme) {
  if (records.empty()) throw InvalidInput("make_folds: no records");
  for (const auto& r : records)
    if (r.session.empty() || r.speaker.empty())
      throw InvalidInput("make_folds: utterance '" + r.utt_id + "' lacks session or speaker");

  auto group_of = [scheme](const ManifestRecord& r) -> const std::string& {
    return scheme == FoldScheme::kSpeaker10 ? r.speaker : r.session;
  };
  std::set<std::string> groups;
  for (const auto& r : records) groups.insert(group_of(r));
  if (groups.size() < 2)
    throw InvalidInput("make_folds: need at least two groups, found " +
                       std::to_string(groups.size()));
  std::vector<std::string> held_out(groups.begin(), groups.end());
  if (scheme == FoldScheme::kSingleSession5) held_out = {held_out.back()};

  FoldPlan plan;
  plan.scheme = scheme;
  for (const auto& g : held_out) {
    Fold f;
    f.name = g;
    for (const auto& r : records) (group_of(r) == g ? f.test_ids : f.train_ids).push_back(r.utt_id);
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

FoldAudit audit_folds(const FoldPlan& plan, const std::vector<ManifestRecord>& records) {
  FoldAudit audit;
  std::map<std::string, const ManifestRecord*> by_id;
  for (const auto& r : records) by_id[r.utt_id] = &r;
  std::map<std::string, int> tested;

  for (const auto& f : plan.folds) {
    std::set<std::string> train_speakers, train_ids;
    for (const auto& id : f.train_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        audit.exact_coverage = false;
        audit.problems.push_back("fold " + f.name + ": unknown training id " + id);
        continue;
      }
      train_speakers.insert(it->second->speaker);
      train_ids.insert(id);
    }
    for (const auto& id : f.test_ids) {
      ++tested[id];
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        audit.exact_coverage = false;
        audit.problems.push_back("fold " + f.name + ": unknown test id " + id);
        continue;
      }
      if (train_ids.count(id)) {
        audit.disjoint = false;
        audit.problems.push_back("fold " + f.name + ": " + id + " is in train and test");
      }
      if (train_speakers.count(it->second->speaker)) {
        audit.speaker_exclusive = false;
        audit.problems.push_back("fold " + f.name + ": speaker " + it->second->speaker +
                                 " is in train and test");
      }
    }
  }
  for (const auto& r : records) {
    const int n = tested.count(r.utt_id) ? tested[r.utt_id] : 0;
    if (n != 1) {
      audit.exact_coverage = false;
      audit.problems.push_back(r.utt_id + " is tested " + std::to_string(n) + " times");
    }
  }
  return audit;
}

ValidationSplit split_validation(const std::vector<std::string>& train_ids, double fraction,
                                 std::uint64_t seed) {
  if (train_ids.size() < 2) throw InvalidInput("split_validation: need at least two utterances");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidConfig("validation fraction must be in (0, 1)");
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train_ids.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, train_ids.size() - 1);

  std::vector<std::size_t> order(train_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  nn::Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<bool> is_val(train_ids.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  ValidationSplit out;
  for (std::size_t i = 0; i < train_ids.size(); ++i)
    (is_val[i] ? out.validation_ids : out.train_ids).push_back(train_ids[i]);
  return out;
}

}  // namespace emo::eval
