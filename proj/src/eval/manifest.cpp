#include "emo/eval/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "emo/error.hpp"

namespace emo::eval {

namespace {

using nlohmann::json;

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

ManifestRecord parse_manifest_line(const std::string& line, const std::string& where) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (!obj.is_object()) throw FormatError(where + ": expected a JSON object");
  ManifestRecord r;
  r.utt_id = required<std::string>(obj, "utt_id", where);
  r.dialogue_id = required<std::string>(obj, "dialogue_id", where);
  r.session = required<std::string>(obj, "session", where);
  r.speaker = required<std::string>(obj, "speaker", where);
  r.position = required<int>(obj, "position", where);
  r.audio_path = required<std::string>(obj, "audio_path", where);
  r.ref_transcript = required<std::string>(obj, "ref_transcript", where);
  r.asr_transcript = required<std::string>(obj, "asr_transcript", where);
  r.raw_label = required<std::string>(obj, "raw_label", where);
  const json alignments = required<json>(obj, "ref_alignments", where);
  if (!alignments.is_array()) throw FormatError(where + ": ref_alignments must be an array");
  for (const json& a : alignments) {
    if (!a.is_object()) throw FormatError(where + ": alignment entries must be objects");
    text::WordAlignment w;
    w.word = required<std::string>(a, "word", where);
    w.start_ms = required<double>(a, "start_ms", where);
    w.end_ms = required<double>(a, "end_ms", where);
    r.ref_alignments.push_back(std::move(w));
  }
  if (r.utt_id.empty()) throw FormatError(where + ": empty utt_id");
  if (r.position < 0) throw FormatError(where + ": negative position");
  return r;
}

std::string manifest_line(const ManifestRecord& r) {
  json alignments = json::array();
  for (const auto& a : r.ref_alignments)
    alignments.push_back({{"word", a.word}, {"start_ms", a.start_ms}, {"end_ms", a.end_ms}});
  json obj = {{"utt_id", r.utt_id},
              {"dialogue_id", r.dialogue_id},
              {"session", r.session},
              {"speaker", r.speaker},
              {"position", r.position},
              {"audio_path", r.audio_path},
              {"ref_transcript", r.ref_transcript},
              {"ref_alignments", alignments},
              {"asr_transcript", r.asr_transcript},
              {"raw_label", r.raw_label}};
  return obj.dump();
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("cannot open manifest " + path);
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_manifest_line(line, path + ":" + std::to_string(line_no)));
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingData("cannot write manifest " + path);
  for (const auto& r : records) out << manifest_line(r) << '\n';
}

const std::vector<std::string>& DialogueIndex::of(const std::string& dialogue_id) const {
  auto it = std::lower_bound(dialogue_ids.begin(), dialogue_ids.end(), dialogue_id);
  if (it == dialogue_ids.end() || *it != dialogue_id)
    throw InvalidInput("unknown dialogue '" + dialogue_id + "'");
  return utterances[static_cast<std::size_t>(it - dialogue_ids.begin())];
}

DialogueIndex index_dialogues(const std::vector<ManifestRecord>& records) {
  std::map<std::string, std::map<int, std::string>> by_dialogue;
  for (const auto& r : records) {
    auto& slots = by_dialogue[r.dialogue_id];
    if (!slots.emplace(r.position, r.utt_id).second)
      throw InvalidInput("dialogue '" + r.dialogue_id + "' repeats position " +
                         std::to_string(r.position));
  }
  DialogueIndex index;
  for (auto& [id, slots] : by_dialogue) {
    std::vector<std::string> utts;
    int expected = 0;
    for (auto& [pos, utt] : slots) {
      if (pos != expected)
        throw InvalidInput("dialogue '" + id + "' has no utterance at position " +
                           std::to_string(expected));
      utts.push_back(utt);
      ++expected;
    }
    index.dialogue_ids.push_back(id);
    index.utterances.push_back(std::move(utts));
  }
  return index;
}

}  // namespace emo::eval
