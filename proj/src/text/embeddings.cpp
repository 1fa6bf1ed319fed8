#include "emo/text/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "emo/error.hpp"
#include "emo/log.hpp"

namespace emo::text {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  // std::from_chars for double is available in libstdc++ 11.
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

}  // namespace

std::string fold_case(std::string_view word) {
  std::string out(word);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool WordEmbeddingTable::contains(std::string_view word) const {
  return table_.count(fold_case(word)) > 0;
}

std::span<const double> WordEmbeddingTable::lookup(std::string_view word) const {
  auto it = table_.find(fold_case(word));
  if (it == table_.end()) return zero_;
  return it->second;
}

bool WordEmbeddingTable::insert(std::string_view word, std::vector<double> vec) {
  if (vec.size() != dim_)
    throw FormatError("word vector for '" + std::string(word) + "' has dimension " +
                      std::to_string(vec.size()) + ", table is " + std::to_string(dim_));
  auto [it, inserted] = table_.insert_or_assign(fold_case(word), std::move(vec));
  (void)it;
  return !inserted;
}

WordEmbeddingTable load_word_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingData("cannot open word table " + path);
  WordEmbeddingTable table;
  bool have_dim = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::size_t d = fields.size() - 1;
    if (!have_dim) {
      if (d == 0) throw FormatError(where(path, line_no) + ": word has no vector");
      table = WordEmbeddingTable(d);
      have_dim = true;
    } else if (d != table.dim()) {
      throw FormatError(where(path, line_no) + ": expected " + std::to_string(table.dim()) +
                        " values, found " + std::to_string(d));
    }
    std::vector<double> vec(d);
    for (std::size_t i = 0; i < d; ++i)
      if (!parse_double(fields[i + 1], vec[i]))
        throw FormatError(where(path, line_no) + ": bad number '" +
                          std::string(fields[i + 1]) + "'");
    if (table.insert(fields[0], std::move(vec)))
      log_warning(where(path, line_no) + ": duplicate word '" + std::string(fields[0]) +
                  "', keeping the last entry");
  }
  if (!have_dim) throw FormatError(path + ": empty word table");
  return table;
}

void write_word_table(const std::string& path, const WordEmbeddingTable& table) {
  std::ofstream os(path);
  if (!os) throw MissingData("cannot open " + path + " for writing");
  std::vector<std::string> words;
  for (const auto& [w, v] : table.entries()) words.push_back(w);
  std::sort(words.begin(), words.end());
  os << std::setprecision(9);
  for (const auto& w : words) {
    os << w;
    for (double v : table.entries().at(w)) os << ' ' << v;
    os << '\n';
  }
}

dsp::FeatureMatrix words_to_frames(const std::vector<WordAlignment>& alignments,
                                   const WordEmbeddingTable& table, std::size_t num_frames,
                                   double frame_shift_ms) {
  if (!(frame_shift_ms > 0.0)) throw InvalidSpec("frame shift must be positive");
  for (std::size_t i = 0; i < alignments.size(); ++i) {
    const auto& a = alignments[i];
    if (!(a.start_ms >= 0.0 && a.start_ms < a.end_ms))
      throw InvalidAlignment("word '" + a.word + "' has an empty or negative interval");
    if (i > 0 && a.start_ms < alignments[i - 1].end_ms)
      throw InvalidAlignment("word '" + a.word + "' overlaps or precedes '" +
                             alignments[i - 1].word + "'");
  }
  dsp::FeatureMatrix out{Matrix(num_frames, table.dim()), frame_shift_ms,
                         dsp::StreamTag::kWords};
  std::size_t w = 0;
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double time = static_cast<double>(t) * frame_shift_ms;
    while (w < alignments.size() && alignments[w].end_ms <= time) ++w;
    if (w == alignments.size()) break;
    if (time < alignments[w].start_ms) continue;
    auto vec = table.lookup(alignments[w].word);
    std::copy(vec.begin(), vec.end(), out.values.row(t).begin());
  }
  return out;
}

const std::vector<double>* SentenceEmbeddingStore::find(const std::string& utt_id) const {
  auto it = rows_.find(utt_id);
  return it == rows_.end() ? nullptr : &it->second;
}

void SentenceEmbeddingStore::insert(const std::string& utt_id, std::vector<double> vec) {
  if (vec.size() != dim_)
    throw FormatError("sentence vector for '" + utt_id + "' has dimension " +
                      std::to_string(vec.size()) + ", store is " + std::to_string(dim_));
  if (!rows_.emplace(utt_id, std::move(vec)).second)
    throw FormatError("duplicate utterance id '" + utt_id + "' in sentence store");
}

std::vector<std::string> SentenceEmbeddingStore::sorted_ids() const {
  std::vector<std::string> ids;
  ids.reserve(rows_.size());
  for (const auto& [id, v] : rows_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

SentenceEmbeddingStore load_sentence_store(const std::string& path,
                                           std::optional<std::size_t> expected_dim) {
  std::ifstream is(path);
  if (!is) throw MissingData("cannot open sentence store " + path);
  std::optional<SentenceEmbeddingStore> store;
  if (expected_dim) store.emplace(*expected_dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw FormatError(where(path, line_no) + ": expected '<utt_id>\\t<values>'");
    const std::string id = line.substr(0, tab);
    const auto fields = split_ws(std::string_view(line).substr(tab + 1));
    std::vector<double> vec(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (!parse_double(fields[i], vec[i]))
        throw FormatError(where(path, line_no) + ": non-numeric field '" +
                          std::string(fields[i]) + "'");
    if (!store) store.emplace(vec.size());
    if (vec.size() != store->dim())
      throw FormatError(where(path, line_no) + ": expected " + std::to_string(store->dim()) +
                        " values, found " + std::to_string(vec.size()));
    try {
      store->insert(id, std::move(vec));
    } catch (const FormatError& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    }
  }
  if (!store || store->size() == 0) {
    log_warning(path + ": sentence store is empty");
    if (!store) store.emplace(kSentenceDim);
  }
  return std::move(*store);
}

void write_sentence_store(const std::string& path, const SentenceEmbeddingStore& store) {
  std::ofstream os(path);
  if (!os) throw MissingData("cannot open " + path + " for writing");
  os << std::setprecision(9);
  for (const auto& id : store.sorted_ids()) {
    os << id << '\t';
    const auto& v = *store.find(id);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    os << '\n';
  }
}

ContextSpan parse_context_span(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw UsageError("context span must look like 'c1,c2', got '" + text + "'");
  auto parse = [&](std::string_view s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
      throw UsageError("context span component '" + std::string(s) + "' is not an integer");
    if (v < 0)
      throw UsageError("context span components must be non-negative, got '" + text + "'");
    return v;
  };
  const std::string_view sv(text);
  return {parse(sv.substr(0, comma)), parse(sv.substr(comma + 1))};
}

bool ContextWindow::any_present() const {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

ContextWindow assemble_context(const SentenceEmbeddingStore& store,
                               const std::vector<std::string>& dialogue,
                               std::size_t position, ContextSpan span) {
  if (position >= dialogue.size())
    throw InvalidInput("dialogue position " + std::to_string(position) +
                       " out of range for a dialogue of " +
                       std::to_string(dialogue.size()) + " utterances");
  if (span.before < 0 || span.after < 0)
    throw InvalidInput("context span components must be non-negative");
  ContextWindow w;
  w.span = span;
  w.vectors = Matrix(span.width(), store.dim());
  w.mask.assign(span.width(), 0);
  w.slot_ids.assign(span.width(), "");
  const auto p = static_cast<std::ptrdiff_t>(position);
  for (std::ptrdiff_t k = -span.before; k <= span.after; ++k) {
    const std::ptrdiff_t idx = p + k;
    const auto slot = static_cast<std::size_t>(k + span.before);
    if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(dialogue.size())) continue;
    const std::string& id = dialogue[static_cast<std::size_t>(idx)];
    w.slot_ids[slot] = id;
    if (const auto* vec = store.find(id)) {
      std::copy(vec->begin(), vec->end(), w.vectors.row(slot).begin());
      w.mask[slot] = 1;
    }
  }
  return w;
}

}  // namespace emo::text
