#include "emo/eval/labels.hpp"

#include <map>

#include "emo/error.hpp"
#include "emo/text/embeddings.hpp"

namespace emo::eval {

namespace {

enum class Raw { kNeutral, kHappy, kExcited, kAngry, kSad, kFrustration, kFear, kSurprise,
                 kDisgust, kOther, kNoAgreement };

const std::map<std::string, Raw>& raw_inventory() {
  static const std::map<std::string, Raw> inv = {
      {"neutral", Raw::kNeutral},         {"neu", Raw::kNeutral},
      {"happy", Raw::kHappy},             {"hap", Raw::kHappy},
      {"happiness", Raw::kHappy},         {"excited", Raw::kExcited},
      {"exc", Raw::kExcited},             {"angry", Raw::kAngry},
      {"ang", Raw::kAngry},               {"anger", Raw::kAngry},
      {"sad", Raw::kSad},                 {"sadness", Raw::kSad},
      {"frustration", Raw::kFrustration}, {"fru", Raw::kFrustration},
      {"frustrated", Raw::kFrustration},  {"fear", Raw::kFear},
      {"fea", Raw::kFear},                {"surprise", Raw::kSurprise},
      {"sur", Raw::kSurprise},            {"disgust", Raw::kDisgust},
      {"dis", Raw::kDisgust},             {"other", Raw::kOther},
      {"oth", Raw::kOther},               {"xxx", Raw::kNoAgreement},
  };
  return inv;
}

}  // namespace

LabelMode parse_label_mode(const std::string& text) {
  if (text == "4way" || text == "four_way") return LabelMode::kFourWay;
  if (text == "5way" || text == "five_way") return LabelMode::kFiveWay;
  throw UsageError("label scheme must be 4way or 5way, got '" + text + "'");
}

const char* label_mode_name(LabelMode mode) {
  return mode == LabelMode::kFourWay ? "4way" : "5way";
}

int num_classes(LabelMode mode) { return mode == LabelMode::kFourWay ? 4 : 5; }

const std::vector<std::string>& class_names(LabelMode mode) {
  static const std::vector<std::string> four = {"happy", "angry", "sad", "neutral"};
  static const std::vector<std::string> five = {"happy", "angry", "sad", "neutral", "others"};
  return mode == LabelMode::kFourWay ? four : five;
}

std::optional<int> map_label(const std::string& raw, LabelMode mode) {
  const auto& inv = raw_inventory();
  auto it = inv.find(text::fold_case(raw));
  if (it == inv.end()) throw InvalidLabel("unknown emotion label '" + raw + "'");
  switch (it->second) {
    case Raw::kHappy:
    case Raw::kExcited: return 0;
    case Raw::kAngry: return 1;
    case Raw::kSad: return 2;
    case Raw::kNeutral: return 3;
    case Raw::kNoAgreement: return std::nullopt;
    default:
      if (mode == LabelMode::kFiveWay) return 4;
      return std::nullopt;
  }
}

}  // namespace emo::eval
