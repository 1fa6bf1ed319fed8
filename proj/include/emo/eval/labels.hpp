#pragma once

#include <optional>
#include <string>
#include <vector>

namespace emo::eval {

enum class LabelMode { kFourWay, kFiveWay };

LabelMode parse_label_mode(const std::string& text);  // "4way" | "5way"
const char* label_mode_name(LabelMode mode);
int num_classes(LabelMode mode);
// happy, angry, sad, neutral[, others]
const std::vector<std::string>& class_names(LabelMode mode);

// Maps a raw corpus label (full name or three-letter code, any case) to a
// class index. Four-way merges excited into happy and drops the other five
// emotions; five-way sends them to "others". The no-agreement marker "xxx" is
// dropped in both modes. Unknown labels throw InvalidLabel.
std::optional<int> map_label(const std::string& raw, LabelMode mode);

}  // namespace emo::eval
