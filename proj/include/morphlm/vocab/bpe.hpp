#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace morphlm::vocab {

// Greedy pair-merge subword model over Unicode scalar values, with an
// end-of-word marker appended to every word. Fallback tokenizer for words
// the analyzer cannot decompose.
class BpeModel {
 public:
  static constexpr const char* kEndOfWord = "</w>";

  const std::vector<std::string>& base_symbols() const { return base_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }

  // Base symbols plus one token per merge, in creation order.
  std::vector<std::string> vocabulary() const;

  // Segments a word by replaying the merges in training order. The last
  // token carries the end-of-word marker.
  std::vector<std::string> encode_word(const std::string& word) const;

  // Concatenation minus the marker recovers the original word.
  static std::string decode(const std::vector<std::string>& tokens);

  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

  friend BpeModel train_bpe(
      const std::vector<std::pair<std::string, std::int64_t>>& word_freqs,
      std::size_t target_vocab);

 private:
  std::vector<std::string> base_;
  std::vector<std::pair<std::string, std::string>> merges_;
};

// Trains on an explicit word frequency table until the vocabulary reaches
// target_vocab or no pairs remain. Ties between equally frequent pairs go to
// the lexicographically smaller pair.
BpeModel train_bpe(
    const std::vector<std::pair<std::string, std::int64_t>>& word_freqs,
    std::size_t target_vocab);

// Whitespace-tokenizes raw text and trains on the resulting counts.
BpeModel train_bpe_text(const std::string& text, std::size_t target_vocab);

}  // namespace morphlm::vocab
