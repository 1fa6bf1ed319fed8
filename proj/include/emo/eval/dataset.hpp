#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emo/config.hpp"
#include "emo/eval/labels.hpp"
#include "emo/eval/manifest.hpp"
#include "emo/model/model.hpp"
#include "emo/text/embeddings.hpp"

namespace emo::eval {

// Locations of a prepared corpus. Feature files live in feature_dir as
// <utt_id>.audio25.emof, <utt_id>.fbk250.emof and <utt_id>.words.emof.
struct CorpusPaths {
  std::string manifest;
  std::string feature_dir;
  std::string ref_sentences;
  std::string asr_sentences;  // may be empty
  std::string word_table;

  // Keys data.manifest, data.features, data.sentences_ref, data.sentences_asr,
  // data.word_table. Relative paths are resolved against base_dir.
  static CorpusPaths read(const KeyValueConfig& kv, const std::string& base_dir = "");
  void write(KeyValueConfig& kv) const;
};

std::string feature_path(const std::string& feature_dir, const std::string& utt_id,
                         const char* stream);
// Audio paths are relative to the manifest's directory unless absolute.
std::string resolve_audio_path(const std::string& manifest_path, const std::string& audio_path);

// Computes the 25 ms and 250 ms streams of every utterance, normalises them per
// dialogue and writes them to feature_dir.
void extract_features(const std::vector<ManifestRecord>& records,
                      const std::string& manifest_path, const std::string& feature_dir);

// Writes the frame-level word vector stream of every utterance from its
// reference alignments. The audio25 file fixes the frame count.
void embed_align(const std::vector<ManifestRecord>& records,
                 const text::WordEmbeddingTable& table, const std::string& feature_dir);

enum class TextCondition { kRef, kAsr, kMix };
TextCondition parse_text_condition(const std::string& text);
const char* text_condition_name(TextCondition c);

// Manifest plus sentence stores. Dialogue context is built from every record,
// including those whose label the scheme drops.
struct Corpus {
  CorpusPaths paths;
  std::vector<ManifestRecord> records;
  DialogueIndex dialogues;
  std::map<std::string, std::size_t> index;  // utt_id -> records position
  text::SentenceEmbeddingStore ref_store;
  std::optional<text::SentenceEmbeddingStore> asr_store;

  const ManifestRecord& record(const std::string& utt_id) const;
};

Corpus load_corpus(const CorpusPaths& paths);

// Records kept by the scheme, in manifest order, with their class index.
struct LabelledSet {
  std::vector<ManifestRecord> records;
  std::map<std::string, int> labels;
};
LabelledSet apply_labels(const Corpus& corpus, LabelMode mode);

// Model-ready samples keyed by utterance id, built with the given sentence
// store supplying context vectors (ref or asr).
class SampleBank {
 public:
  SampleBank(const Corpus& corpus, const LabelledSet& labelled, const model::ModelConfig& cfg,
             const text::SentenceEmbeddingStore& store);
  const model::Sample& at(const std::string& utt_id) const;
  std::vector<const model::Sample*> select(const std::vector<std::string>& ids) const;
  std::size_t size() const { return samples_.size(); }

 private:
  std::vector<model::Sample> samples_;
  std::map<std::string, std::size_t> index_;
};

// The store a condition uses for training and for testing. MissingData when
// the asr store is needed and absent, or when frame-level word vectors are
// requested for ASR text (no ASR alignments exist).
struct ConditionStores {
  const text::SentenceEmbeddingStore* train = nullptr;
  const text::SentenceEmbeddingStore* test = nullptr;
};
ConditionStores stores_for(const Corpus& corpus, TextCondition condition,
                           const model::ModelConfig& cfg);

}  // namespace emo::eval
