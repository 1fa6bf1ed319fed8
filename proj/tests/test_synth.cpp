#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "emo/dsp/features.hpp"
#include "emo/error.hpp"
#include "emo/eval/labels.hpp"
#include "emo/synth/corpus.hpp"
#include "emo/wav.hpp"
#include "test_util.hpp"

using namespace emo;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

synth::SynthOptions small_options() {
  synth::SynthOptions o;
  o.sessions = 2;
  o.dialogues_per_session = 3;
  return o;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("output bytes depend only on the options") {
  testutil::TempDir dir("synth_det");
  const auto a = synth::generate(small_options(), dir.file("a"));
  synth::generate(small_options(), dir.file("b"));
  auto other = small_options();
  other.seed = 8;
  synth::generate(other, dir.file("c"));
  const auto sa = snapshot(dir.file("a"));
  const auto sb = snapshot(dir.file("b"));
  CHECK(sa.size() > 10);
  CHECK(sa == sb);
  CHECK(snapshot(dir.file("c")) != sa);
  CHECK(a.num_utterances == 2u * 3u * 2u * 6u);
}

TEST_CASE("classes are balanced and ambiguity never opens a block") {
  testutil::TempDir dir("synth_bal");
  // Eight blocks per session: two full rounds of the four classes.
  auto opts = small_options();
  opts.dialogues_per_session = 4;
  const auto c = synth::generate(opts, dir.file("c"));
  const auto records = eval::load_manifest(c.paths.manifest);
  std::map<int, int> counts;
  for (const auto& r : records) ++counts[*eval::map_label(r.raw_label, eval::LabelMode::kFourWay)];
  for (int k = 0; k < 4; ++k) CHECK(counts[k] * 4 == static_cast<int>(records.size()));

  const std::set<std::string> ambiguous(c.ambiguous_ids.begin(), c.ambiguous_ids.end());
  CHECK(ambiguous.size() == 2u * 4u * 2u);
  CHECK(synth::read_id_list((fs::path(dir.file("c")) / "ambiguous.txt").string()) ==
        c.ambiguous_ids);
  for (const auto& r : records) {
    if (!ambiguous.count(r.utt_id)) continue;
    CHECK(r.position % opts.block_length != 0);
    CHECK(r.ref_transcript == "yes exactly");
  }
  // Failed recognitions leave the ASR transcript empty.
  for (const auto& id : c.asr_failure_ids) {
    const auto it = std::find_if(records.begin(), records.end(),
                                 [&](const auto& r) { return r.utt_id == id; });
    REQUIRE(it != records.end());
    CHECK(it->asr_transcript.empty());
  }
}

TEST_CASE("the pitch cue is recoverable from the audio") {
  testutil::TempDir dir("synth_pitch");
  const auto c = synth::generate(small_options(), dir.file("c"));
  const auto records = eval::load_manifest(c.paths.manifest);
  int correct = 0;
  for (const auto& r : records) {
    const auto audio = read_wav((fs::path(dir.file("c")) / r.audio_path).string());
    const auto track = dsp::track_pitch({audio.samples, audio.sample_rate},
                                        dsp::FramingSpec::short_term());
    const double base = std::log(r.speaker.back() == 'F' ? 200.0 : 120.0);
    // The segment furthest from the speaker's baseline carries the class.
    double extreme = 0.0;
    for (const auto& w : r.ref_alignments) {
      std::vector<double> logs;
      for (auto t = static_cast<std::size_t>(w.start_ms / 10.0) + 3;
           t + 3 < static_cast<std::size_t>(w.end_ms / 10.0) && t < track.size(); ++t)
        logs.push_back(track[t].log_pitch);
      if (logs.empty()) continue;
      std::nth_element(logs.begin(), logs.begin() + logs.size() / 2, logs.end());
      const double dev = logs[logs.size() / 2] - base;
      if (std::abs(dev) > std::abs(extreme)) extreme = dev;
    }
    const int label = *eval::map_label(r.raw_label, eval::LabelMode::kFourWay);
    correct += (extreme > 0.0) == (label <= 1);
  }
  CHECK(correct / static_cast<double>(records.size()) > 0.99);
}

TEST_CASE("hashed vectors and option checks") {
  const auto v = synth::hashed_vector("love", 16, 1);
  CHECK(v == synth::hashed_vector("love", 16, 1));
  CHECK(v != synth::hashed_vector("love", 16, 2));
  CHECK(v.size() == 16);
  for (double x : v) CHECK(std::abs(x) <= 1.0);
  CHECK(synth::label_codes() == std::vector<std::string>{"hap", "ang", "sad", "neu"});

  auto o = small_options();
  o.sessions = 1;
  CHECK_THROWS_AS(o.validate(), InvalidConfig);
  o = small_options();
  o.block_length = 1;
  CHECK_THROWS_AS(o.validate(), InvalidConfig);
  o = small_options();
  o.asr_failure_rate = 1.0;
  CHECK_THROWS_AS(o.validate(), InvalidConfig);
  CHECK_THROWS_AS(synth::read_id_list("/nonexistent/ids.txt"), MissingData);
}

}  // TEST_SUITE
