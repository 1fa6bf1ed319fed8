#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "emo/dsp/features.hpp"
#include "emo/matrix.hpp"

namespace emo::text {

constexpr std::size_t kWordDim = 50;
constexpr std::size_t kSentenceDim = 768;

std::string fold_case(std::string_view word);

// Word -> vector table with case-folded keys. Lookups of absent words return
// the zero vector.
class WordEmbeddingTable {
 public:
  WordEmbeddingTable() = default;
  explicit WordEmbeddingTable(std::size_t dim) : dim_(dim), zero_(dim, 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool contains(std::string_view word) const;
  std::span<const double> lookup(std::string_view word) const;
  // Returns true when an existing entry was replaced.
  bool insert(std::string_view word, std::vector<double> vec);

  const std::unordered_map<std::string, std::vector<double>>& entries() const {
    return table_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> zero_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// One line per word: token followed by D whitespace-separated floats.
WordEmbeddingTable load_word_table(const std::string& path);
void write_word_table(const std::string& path, const WordEmbeddingTable& table);

struct WordAlignment {
  std::string word;
  double start_ms = 0.0;
  double end_ms = 0.0;
};

// T x dim matrix; frame t (centre time t * shift) takes the vector of the word
// whose half-open interval [start, end) contains it, zero otherwise.
dsp::FeatureMatrix words_to_frames(const std::vector<WordAlignment>& alignments,
                                   const WordEmbeddingTable& table, std::size_t num_frames,
                                   double frame_shift_ms);

class SentenceEmbeddingStore {
 public:
  SentenceEmbeddingStore() = default;
  explicit SentenceEmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<double>* find(const std::string& utt_id) const;
  // Throws FormatError on a duplicate id or a dimension mismatch.
  void insert(const std::string& utt_id, std::vector<double> vec);
  void erase(const std::string& utt_id) { rows_.erase(utt_id); }
  std::vector<std::string> sorted_ids() const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

// TSV: utterance id, a tab, then D floats. When expected_dim is unset the
// dimension is taken from the first row.
SentenceEmbeddingStore load_sentence_store(
    const std::string& path, std::optional<std::size_t> expected_dim = std::nullopt);
void write_sentence_store(const std::string& path, const SentenceEmbeddingStore& store);

struct ContextSpan {
  int before = 3;
  int after = 3;
  std::size_t width() const { return static_cast<std::size_t>(before + after + 1); }
};

// Parses "c1,c2"; both components must be non-negative integers.
ContextSpan parse_context_span(const std::string& text);

struct ContextWindow {
  Matrix vectors;                // width x dim; masked rows are zero
  std::vector<std::uint8_t> mask;  // 1 = utterance present
  ContextSpan span;
  std::vector<std::string> slot_ids;  // dialogue utterance id per slot ("" outside)

  std::size_t center() const { return static_cast<std::size_t>(span.before); }
  bool any_present() const;
};

ContextWindow assemble_context(const SentenceEmbeddingStore& store,
                               const std::vector<std::string>& dialogue,
                               std::size_t position, ContextSpan span);

}  // namespace emo::text
