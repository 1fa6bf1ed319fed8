#pragma once

#include <string>
#include <vector>

#include "emo/text/embeddings.hpp"

namespace emo::eval {

struct ManifestRecord {
  std::string utt_id;
  std::string dialogue_id;
  std::string session;
  std::string speaker;
  int position = 0;  // index of the utterance within its dialogue
  std::string audio_path;
  std::string ref_transcript;
  std::vector<text::WordAlignment> ref_alignments;
  std::string asr_transcript;
  std::string raw_label;
};

// One JSON object per line. Blank lines are skipped; a malformed line or a
// missing field throws FormatError naming path:line. Relative audio paths are
// kept as written.
std::vector<ManifestRecord> load_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

std::string manifest_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line, const std::string& where);

// Utterance ids of each dialogue ordered by position.
struct DialogueIndex {
  std::vector<std::string> dialogue_ids;  // sorted
  std::vector<std::vector<std::string>> utterances;
  const std::vector<std::string>& of(const std::string& dialogue_id) const;
};
// Positions must be 0..n-1 without gaps or repeats per dialogue (InvalidInput).
DialogueIndex index_dialogues(const std::vector<ManifestRecord>& records);

}  // namespace emo::eval
