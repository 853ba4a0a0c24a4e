#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace morphlm::vocab {

// Vocabulary of the N most frequent affix combinations. Combinations are
// unordered for vocabulary purposes and stored in canonical (sorted
// ascending) form; ids run from most to least frequent and the empty
// combination is always present.
class AffixSetVocab {
 public:
  struct Entry {
    std::vector<int> affixes;  // canonical sorted, unique
    std::int64_t freq = 0;
  };

  // counts: canonical combination -> corpus frequency. n_affixes bounds the
  // valid affix id universe for later queries.
  static AffixSetVocab build(
      const std::map<std::vector<int>, std::int64_t>& counts, std::size_t n,
      int n_affixes);

  const std::vector<Entry>& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }
  int n_affixes() const { return n_affixes_; }
  int empty_set_id() const { return empty_id_; }

  // Exact id of a canonical combination, or -1.
  int id_of(const std::vector<int>& canonical) const;

  // Maps any combination into the vocabulary by dropping as few affixes as
  // possible: the largest in-vocabulary subset wins, ties to the higher
  // frequency, then the lower id. The empty set is the universal fallback.
  int map(const std::vector<int>& combo) const;

  static std::vector<int> canonical(std::vector<int> combo);

  void save(const std::string& path) const;
  static AffixSetVocab load(const std::string& path, int n_affixes);

 private:
  std::vector<Entry> entries_;
  std::map<std::vector<int>, int> index_;
  int n_affixes_ = 0;
  int empty_id_ = -1;
};

}  // namespace morphlm::vocab
