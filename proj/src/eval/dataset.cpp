#include "emo/eval/dataset.hpp"

#include <filesystem>
#include <optional>

#include "emo/dsp/features.hpp"
#include "emo/error.hpp"
#include "emo/log.hpp"
#include "emo/wav.hpp"

namespace emo::eval {

namespace fs = std::filesystem;

CorpusPaths CorpusPaths::read(const KeyValueConfig& kv, const std::string& base_dir) {
  auto path = [&](const char* key) -> std::string {
    const std::string v = kv.get_string(key, "");
    if (v.empty() || base_dir.empty() || fs::path(v).is_absolute()) return v;
    return (fs::path(base_dir) / v).string();
  };
  CorpusPaths p;
  p.manifest = path("data.manifest");
  p.feature_dir = path("data.features");
  p.ref_sentences = path("data.sentences_ref");
  p.asr_sentences = path("data.sentences_asr");
  p.word_table = path("data.word_table");
  return p;
}

void CorpusPaths::write(KeyValueConfig& kv) const {
  kv.set("data.manifest", manifest);
  kv.set("data.features", feature_dir);
  kv.set("data.sentences_ref", ref_sentences);
  kv.set("data.sentences_asr", asr_sentences);
  kv.set("data.word_table", word_table);
}

std::string feature_path(const std::string& feature_dir, const std::string& utt_id,
                         const char* stream) {
  return (fs::path(feature_dir) / (utt_id + "." + stream + ".emof")).string();
}

std::string resolve_audio_path(const std::string& manifest_path, const std::string& audio_path) {
  const fs::path p(audio_path);
  if (p.is_absolute()) return audio_path;
  return (fs::path(manifest_path).parent_path() / p).string();
}

void extract_features(const std::vector<ManifestRecord>& records,
                      const std::string& manifest_path, const std::string& feature_dir) {
  if (records.empty()) throw InvalidInput("extract_features: empty manifest");
  fs::create_directories(feature_dir);
  const std::size_t n = records.size();
  std::vector<dsp::FeatureMatrix> audio25(n), fbk250(n);
  std::vector<std::string> dialogues(n);
  std::vector<std::optional<std::string>> failures(n);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto signal = read_wav(resolve_audio_path(manifest_path, records[i].audio_path));
      auto streams = dsp::compute_audio_streams(signal);
      audio25[i] = std::move(streams.audio25);
      fbk250[i] = std::move(streams.fbk250);
    } catch (const std::exception& e) {
      failures[i] = records[i].utt_id + ": " + e.what();
    }
    dialogues[i] = records[i].dialogue_id;
  }
  for (const auto& f : failures)
    if (f) throw MissingData("feature extraction failed for " + *f);

  dsp::normalize_features(audio25, dialogues);
  dsp::normalize_features(fbk250, dialogues);
  for (std::size_t i = 0; i < n; ++i) {
    dsp::write_feature_file(feature_path(feature_dir, records[i].utt_id, "audio25"), audio25[i]);
    dsp::write_feature_file(feature_path(feature_dir, records[i].utt_id, "fbk250"), fbk250[i]);
  }
  log_info("extracted features for " + std::to_string(n) + " utterances");
}

void embed_align(const std::vector<ManifestRecord>& records,
                 const text::WordEmbeddingTable& table, const std::string& feature_dir) {
  std::size_t oov = 0, words = 0;
  for (const auto& r : records) {
    const auto audio = dsp::read_feature_file(feature_path(feature_dir, r.utt_id, "audio25"),
                                              dsp::StreamTag::kCombined);
    for (const auto& a : r.ref_alignments) {
      ++words;
      if (!table.contains(a.word)) ++oov;
    }
    const auto frames =
        text::words_to_frames(r.ref_alignments, table, audio.num_frames(), audio.frame_shift_ms);
    dsp::write_feature_file(feature_path(feature_dir, r.utt_id, "words"), frames);
  }
  if (oov > 0)
    log_warning(std::to_string(oov) + " of " + std::to_string(words) +
                " aligned words are missing from the word table and map to zero");
}

TextCondition parse_text_condition(const std::string& text) {
  if (text == "ref") return TextCondition::kRef;
  if (text == "asr") return TextCondition::kAsr;
  if (text == "mix") return TextCondition::kMix;
  throw UsageError("text condition must be ref, asr or mix, got '" + text + "'");
}

const char* text_condition_name(TextCondition c) {
  switch (c) {
    case TextCondition::kRef: return "ref";
    case TextCondition::kAsr: return "asr";
    case TextCondition::kMix: return "mix";
  }
  return "?";
}

const ManifestRecord& Corpus::record(const std::string& utt_id) const {
  auto it = index.find(utt_id);
  if (it == index.end()) throw InvalidInput("unknown utterance '" + utt_id + "'");
  return records[it->second];
}

Corpus load_corpus(const CorpusPaths& paths) {
  if (paths.manifest.empty()) throw InvalidConfig("no manifest given (data.manifest)");
  Corpus c;
  c.paths = paths;
  c.records = load_manifest(paths.manifest);
  for (std::size_t i = 0; i < c.records.size(); ++i)
    if (!c.index.emplace(c.records[i].utt_id, i).second)
      throw InvalidInput("manifest repeats utterance '" + c.records[i].utt_id + "'");
  c.dialogues = index_dialogues(c.records);
  if (!paths.ref_sentences.empty())
    c.ref_store = text::load_sentence_store(paths.ref_sentences, text::kSentenceDim);
  if (!paths.asr_sentences.empty())
    c.asr_store = text::load_sentence_store(paths.asr_sentences, text::kSentenceDim);
  return c;
}

LabelledSet apply_labels(const Corpus& corpus, LabelMode mode) {
  LabelledSet out;
  for (const auto& r : corpus.records) {
    const auto label = map_label(r.raw_label, mode);
    if (!label) continue;
    out.records.push_back(r);
    out.labels[r.utt_id] = *label;
  }
  if (out.records.empty()) throw InvalidInput("no utterance survives the label scheme");
  return out;
}

SampleBank::SampleBank(const Corpus& corpus, const LabelledSet& labelled,
                       const model::ModelConfig& cfg, const text::SentenceEmbeddingStore& store) {
  const std::string& dir = corpus.paths.feature_dir;
  if (cfg.tsb.enabled() && dir.empty()) throw InvalidConfig("no feature directory (data.features)");
  samples_.resize(labelled.records.size());
  for (std::size_t i = 0; i < labelled.records.size(); ++i) {
    const ManifestRecord& r = labelled.records[i];
    model::Sample& s = samples_[i];
    s.utt_id = r.utt_id;
    s.label = labelled.labels.at(r.utt_id);
    if (cfg.tsb.use_audio25)
      s.audio25 = dsp::read_feature_file(feature_path(dir, r.utt_id, "audio25"),
                                         dsp::StreamTag::kCombined).values;
    if (cfg.tsb.use_fbk250)
      s.fbk250 = dsp::read_feature_file(feature_path(dir, r.utt_id, "fbk250"),
                                        dsp::StreamTag::kFbk250).values;
    if (cfg.tsb.use_glove)
      s.words = dsp::read_feature_file(feature_path(dir, r.utt_id, "words"),
                                       dsp::StreamTag::kWords).values;
    if (cfg.tab.enabled) {
      const auto& dialogue = corpus.dialogues.of(r.dialogue_id);
      s.context = text::assemble_context(store, dialogue, static_cast<std::size_t>(r.position),
                                         cfg.tab.span);
    }
    index_[r.utt_id] = i;
  }
}

const model::Sample& SampleBank::at(const std::string& utt_id) const {
  auto it = index_.find(utt_id);
  if (it == index_.end()) throw InvalidInput("no sample for utterance '" + utt_id + "'");
  return samples_[it->second];
}

std::vector<const model::Sample*> SampleBank::select(const std::vector<std::string>& ids) const {
  std::vector<const model::Sample*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&at(id));
  return out;
}

ConditionStores stores_for(const Corpus& corpus, TextCondition condition,
                           const model::ModelConfig& cfg) {
  if (condition != TextCondition::kRef && cfg.tsb.use_glove)
    throw MissingData(std::string("text condition ") + text_condition_name(condition) +
                      " has no word alignments for ASR output; drop glove from the features");
  const bool needs_asr = condition != TextCondition::kRef && cfg.tab.enabled;
  if (needs_asr && !corpus.asr_store)
    throw MissingData(std::string("text condition ") + text_condition_name(condition) +
                      " needs ASR sentence embeddings (data.sentences_asr)");
  if (cfg.tab.enabled && corpus.ref_store.size() == 0 && condition != TextCondition::kAsr)
    throw MissingData("reference sentence embeddings are empty (data.sentences_ref)");
  ConditionStores s;
  s.train = &corpus.ref_store;
  s.test = &corpus.ref_store;
  if (needs_asr) {
    s.test = &*corpus.asr_store;
    if (condition == TextCondition::kAsr) s.train = &*corpus.asr_store;
  }
  return s;
}

}  // namespace emo::eval
