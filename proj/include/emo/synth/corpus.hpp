#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emo/eval/dataset.hpp"

namespace emo::synth {

// Desk-scale stand-in for a dyadic emotion corpus. Each utterance is a voiced
// tone sequence, one segment per token. A cue token names the class: its
// segment is pitched above (happy, angry) or below (sad, neutral) the
// speaker's baseline, and its word and sentence vectors identify the class.
// Labels persist in blocks of consecutive utterances; one utterance per block
// (never the first) is the ambiguous reply "yes exactly" whose label can only
// be read from the preceding utterance.
struct SynthOptions {
  std::uint64_t seed = 7;
  int sessions = 5;
  int dialogues_per_session = 8;
  int blocks_per_dialogue = 2;
  int block_length = 6;
  int sample_rate = 16000;
  double asr_failure_rate = 0.1;
  // When false the "ref" and "asr" sentence stores are written identical.
  bool asr_failures = true;

  void validate() const;
};

struct SynthCorpus {
  eval::CorpusPaths paths;
  std::string config_path;  // corpus.cfg with the data.* keys
  std::vector<std::string> ambiguous_ids;
  std::vector<std::string> asr_failure_ids;
  std::size_t num_utterances = 0;
};

// Writes audio/, manifest.jsonl, words.txt, sentences_ref.tsv,
// sentences_asr.tsv, ambiguous.txt, asr_failures.txt and corpus.cfg under
// out_dir. Output bytes depend only on the options.
SynthCorpus generate(const SynthOptions& options, const std::string& out_dir);

// Raw label codes in class order (hap, ang, sad, neu).
const std::vector<std::string>& label_codes();

// Deterministic hash-seeded vector of `dim` components in [-1, 1].
std::vector<double> hashed_vector(const std::string& token, std::size_t dim, std::uint64_t salt);

std::vector<std::string> read_id_list(const std::string& path);

}  // namespace emo::synth
