#include "emo/synth/corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>

#include "emo/config.hpp"
#include "emo/error.hpp"
#include "emo/eval/manifest.hpp"
#include "emo/log.hpp"
#include "emo/nn/params.hpp"
#include "emo/text/embeddings.hpp"
#include "emo/wav.hpp"

namespace emo::synth {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kWordSalt = 0x5157a1e0ULL;
constexpr std::uint64_t kSentenceSalt = 0x9e3779b97f4a7c15ULL;

const std::vector<std::vector<std::string>>& cue_words() {
  static const std::vector<std::vector<std::string>> cues = {
      {"wonderful", "great", "love"},
      {"furious", "hate", "stupid"},
      {"lonely", "miss", "cry"},
      {"okay", "table", "monday"},
  };
  return cues;
}

const std::vector<std::string>& fillers() {
  static const std::vector<std::string> words = {"i",     "the",   "you",  "it",   "was",
                                                  "today", "really", "think", "that", "we",
                                                  "just",  "so",    "there", "about", "now"};
  return words;
}

const std::vector<std::string> kAmbiguous = {"yes", "exactly"};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double uniform(nn::Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(nn::Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

struct Utterance {
  std::string utt_id;
  std::string speaker;
  int position = 0;
  int label = 0;
  bool ambiguous = false;
  std::vector<std::string> tokens;
  std::size_t pitched_token = 0;  // index of the token carrying the class pitch
};

// Segment pitch: baseline for neutral tokens, raised or lowered for the one
// carrying the class.
dsp::AudioSignal render(const Utterance& u, double baseline_hz, int sample_rate, nn::Rng& rng,
                        std::vector<text::WordAlignment>& alignments) {
  const double sr = sample_rate;
  std::vector<double> samples;
  auto silence = [&](double ms) {
    const auto n = static_cast<std::size_t>(ms * sr / 1000.0);
    for (std::size_t i = 0; i < n; ++i) samples.push_back(0.004 * (2.0 * uniform(rng) - 1.0));
  };
  silence(80.0);
  double phase = 0.0;
  for (std::size_t k = 0; k < u.tokens.size(); ++k) {
    const bool high = u.label == 0 || u.label == 1;
    double f0 = baseline_hz * (1.0 + 0.04 * (2.0 * uniform(rng) - 1.0));
    if (k == u.pitched_token) f0 = baseline_hz * (high ? 1.45 : 0.7);
    const double dur_ms = 160.0 + 80.0 * uniform(rng);
    const auto n = static_cast<std::size_t>(dur_ms * sr / 1000.0);
    const double start_ms = 1000.0 * static_cast<double>(samples.size()) / sr;
    for (std::size_t i = 0; i < n; ++i) {
      const double env = std::sin(std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                  static_cast<double>(n));
      phase += 2.0 * std::numbers::pi * f0 / sr;
      const double v = 0.30 * std::sin(phase) + 0.15 * std::sin(2.0 * phase) +
                       0.07 * std::sin(3.0 * phase);
      samples.push_back(env * v + 0.01 * (2.0 * uniform(rng) - 1.0));
    }
    const double end_ms = 1000.0 * static_cast<double>(samples.size()) / sr;
    alignments.push_back({u.tokens[k], start_ms, end_ms});
    silence(30.0 + 30.0 * uniform(rng));
  }
  silence(50.0);
  return {std::move(samples), sample_rate};
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

std::vector<double> sentence_vector(const std::vector<std::string>& tokens, std::uint64_t seed) {
  std::vector<double> v(text::kSentenceDim, 0.0);
  for (const auto& t : tokens) {
    const auto tv = hashed_vector(t, text::kSentenceDim, kSentenceSalt ^ seed);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += tv[i];
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  // Unit root-mean-square per dimension.
  const double gain = std::sqrt(static_cast<double>(v.size()) / norm);
  for (double& x : v) x *= gain;
  return v;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingData("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

void SynthOptions::validate() const {
  if (sessions < 2) throw InvalidConfig("synth: need at least two sessions");
  if (dialogues_per_session < 1 || blocks_per_dialogue < 1)
    throw InvalidConfig("synth: sizes must be at least 1");
  if (block_length < 2) throw InvalidConfig("synth: block_length must be at least 2");
  if (!(asr_failure_rate >= 0.0 && asr_failure_rate < 1.0))
    throw InvalidConfig("synth: asr_failure_rate must be in [0, 1)");
}

const std::vector<std::string>& label_codes() {
  static const std::vector<std::string> codes = {"hap", "ang", "sad", "neu"};
  return codes;
}

std::vector<double> hashed_vector(const std::string& token, std::size_t dim, std::uint64_t salt) {
  nn::Rng rng(fnv1a(token) ^ salt);
  std::vector<double> v(dim);
  for (double& x : v) x = 2.0 * uniform(rng) - 1.0;
  return v;
}

std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

SynthCorpus generate(const SynthOptions& opt, const std::string& out_dir) {
  opt.validate();
  const fs::path root = fs::absolute(out_dir);
  fs::create_directories(root / "audio");
  const int n_classes = static_cast<int>(label_codes().size());

  struct Dialogue {
    std::string id, session;
    std::vector<std::string> speakers;
    std::vector<int> block_labels;
    std::uint64_t seed = 0;
  };
  std::vector<Dialogue> dialogues;
  nn::Rng plan_rng(opt.seed);
  for (int s = 0; s < opt.sessions; ++s) {
    char session[16];
    std::snprintf(session, sizeof session, "Ses%02d", s + 1);
    // Block labels cycle through the classes in shuffled rounds so every
    // session is balanced to within one block per class.
    std::vector<int> labels;
    const int n_blocks = opt.dialogues_per_session * opt.blocks_per_dialogue;
    while (static_cast<int>(labels.size()) < n_blocks) {
      std::vector<int> round(static_cast<std::size_t>(n_classes));
      for (int k = 0; k < n_classes; ++k) round[static_cast<std::size_t>(k)] = k;
      for (std::size_t i = round.size(); i > 1; --i) std::swap(round[i - 1], round[pick(plan_rng, i)]);
      labels.insert(labels.end(), round.begin(), round.end());
    }
    for (int d = 0; d < opt.dialogues_per_session; ++d) {
      Dialogue dl;
      char id[32];
      std::snprintf(id, sizeof id, "%s_d%02d", session, d);
      dl.id = id;
      dl.session = session;
      dl.speakers = {std::string(session) + "_F", std::string(session) + "_M"};
      if (plan_rng() & 1) std::swap(dl.speakers[0], dl.speakers[1]);
      for (int b = 0; b < opt.blocks_per_dialogue; ++b)
        dl.block_labels.push_back(labels[static_cast<std::size_t>(d * opt.blocks_per_dialogue + b)]);
      dl.seed = plan_rng();
      dialogues.push_back(std::move(dl));
    }
  }

  std::vector<std::vector<eval::ManifestRecord>> records(dialogues.size());
  std::vector<std::vector<Utterance>> utterances(dialogues.size());
  std::vector<std::optional<std::string>> failures(dialogues.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t di = 0; di < dialogues.size(); ++di) {
    try {
      const Dialogue& dl = dialogues[di];
      nn::Rng rng(dl.seed);
      for (int b = 0; b < opt.blocks_per_dialogue; ++b) {
        const int label = dl.block_labels[static_cast<std::size_t>(b)];
        const int ambiguous_at = 1 + static_cast<int>(pick(rng, static_cast<std::size_t>(opt.block_length - 1)));
        for (int j = 0; j < opt.block_length; ++j) {
          Utterance u;
          u.position = b * opt.block_length + j;
          char id[48];
          std::snprintf(id, sizeof id, "%s_u%02d", dl.id.c_str(), u.position);
          u.utt_id = id;
          u.speaker = dl.speakers[static_cast<std::size_t>(u.position % 2)];
          u.label = label;
          u.ambiguous = j == ambiguous_at;
          if (u.ambiguous) {
            u.tokens = kAmbiguous;
            u.pitched_token = 1;
          } else {
            const std::size_t n_tok = 3 + pick(rng, 3);
            for (std::size_t k = 0; k < n_tok; ++k)
              u.tokens.push_back(fillers()[pick(rng, fillers().size())]);
            u.pitched_token = pick(rng, n_tok);
            const auto& cues = cue_words()[static_cast<std::size_t>(label)];
            u.tokens[u.pitched_token] = cues[pick(rng, cues.size())];
          }
          const double baseline = u.speaker.back() == 'F' ? 200.0 : 120.0;
          std::vector<text::WordAlignment> align;
          const auto signal = render(u, baseline, opt.sample_rate, rng, align);
          const std::string rel = "audio/" + u.utt_id + ".wav";
          write_wav((root / rel).string(), signal);

          eval::ManifestRecord r;
          r.utt_id = u.utt_id;
          r.dialogue_id = dl.id;
          r.session = dl.session;
          r.speaker = u.speaker;
          r.position = u.position;
          r.audio_path = rel;
          r.ref_transcript = join(u.tokens);
          r.ref_alignments = std::move(align);
          r.asr_transcript = r.ref_transcript;
          r.raw_label = label_codes()[static_cast<std::size_t>(label)];
          records[di].push_back(std::move(r));
          utterances[di].push_back(std::move(u));
        }
      }
    } catch (const std::exception& e) {
      failures[di] = e.what();
    }
  }
  for (const auto& f : failures)
    if (f) throw MissingData("synth: " + *f);

  std::vector<eval::ManifestRecord> flat;
  std::vector<const Utterance*> flat_utts;
  for (std::size_t di = 0; di < dialogues.size(); ++di)
    for (std::size_t i = 0; i < records[di].size(); ++i) {
      flat.push_back(records[di][i]);
      flat_utts.push_back(&utterances[di][i]);
    }

  SynthCorpus out;
  out.num_utterances = flat.size();
  if (opt.asr_failures && opt.asr_failure_rate > 0.0) {
    nn::Rng asr_rng(opt.seed ^ 0xa5a5a5a5ULL);
    std::vector<std::size_t> order(flat.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick(asr_rng, i)]);
    const auto n_fail = static_cast<std::size_t>(
        std::llround(opt.asr_failure_rate * static_cast<double>(flat.size())));
    std::vector<bool> failed(flat.size(), false);
    for (std::size_t i = 0; i < n_fail; ++i) failed[order[i]] = true;
    for (std::size_t i = 0; i < flat.size(); ++i)
      if (failed[i]) {
        flat[i].asr_transcript.clear();
        out.asr_failure_ids.push_back(flat[i].utt_id);
      }
  }

  text::WordEmbeddingTable table(text::kWordDim);
  auto add_word = [&](const std::string& w) {
    table.insert(w, hashed_vector(w, text::kWordDim, kWordSalt ^ opt.seed));
  };
  for (const auto& group : cue_words())
    for (const auto& w : group) add_word(w);
  for (const auto& w : fillers()) add_word(w);
  for (const auto& w : kAmbiguous) add_word(w);

  text::SentenceEmbeddingStore ref(text::kSentenceDim), asr(text::kSentenceDim);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const auto vec = sentence_vector(flat_utts[i]->tokens, opt.seed);
    ref.insert(flat[i].utt_id, vec);
    if (!flat[i].asr_transcript.empty()) asr.insert(flat[i].utt_id, vec);
    if (flat_utts[i]->ambiguous) out.ambiguous_ids.push_back(flat[i].utt_id);
  }

  out.paths.manifest = (root / "manifest.jsonl").string();
  out.paths.feature_dir = (root / "features").string();
  out.paths.ref_sentences = (root / "sentences_ref.tsv").string();
  out.paths.asr_sentences = (root / "sentences_asr.tsv").string();
  out.paths.word_table = (root / "words.txt").string();
  out.config_path = (root / "corpus.cfg").string();

  eval::write_manifest(out.paths.manifest, flat);
  text::write_word_table(out.paths.word_table, table);
  text::write_sentence_store(out.paths.ref_sentences, ref);
  text::write_sentence_store(out.paths.asr_sentences, asr);
  write_lines(root / "ambiguous.txt", out.ambiguous_ids);
  write_lines(root / "asr_failures.txt", out.asr_failure_ids);
  KeyValueConfig kv;
  eval::CorpusPaths relative{"manifest.jsonl", "features", "sentences_ref.tsv",
                             "sentences_asr.tsv", "words.txt"};
  relative.write(kv);
  kv.set("synth.seed", std::to_string(opt.seed));
  kv.save(out.config_path);
  log_info("synth: wrote " + std::to_string(flat.size()) + " utterances to " + root.string());
  return out;
}

}  // namespace emo::synth
