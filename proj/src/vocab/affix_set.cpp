#include "morphlm/vocab/affix_set.hpp"

#include <algorithm>
#include <sstream>

#include "morphlm/common.hpp"

namespace morphlm::vocab {

std::vector<int> AffixSetVocab::canonical(std::vector<int> combo) {
  std::sort(combo.begin(), combo.end());
  combo.erase(std::unique(combo.begin(), combo.end()), combo.end());
  return combo;
}

AffixSetVocab AffixSetVocab::build(
    const std::map<std::vector<int>, std::int64_t>& counts, std::size_t n,
    int n_affixes) {
  if (n < 1) throw ValidationError("affix set vocabulary: N must be >= 1");
  AffixSetVocab v;
  v.n_affixes_ = n_affixes;

  std::vector<Entry> all;
  all.reserve(counts.size());
  for (const auto& [combo, freq] : counts) {
    if (!std::is_sorted(combo.begin(), combo.end()) ||
        std::adjacent_find(combo.begin(), combo.end()) != combo.end()) {
      throw ValidationError(
          "affix set vocabulary: combination keys must be canonical");
    }
    for (int a : combo) {
      if (a < 0 || a >= n_affixes) {
        throw IndexError("affix set vocabulary: affix id " +
                         std::to_string(a) + " out of inventory of " +
                         std::to_string(n_affixes));
      }
    }
    all.push_back({combo, freq});
  }
  // Frequency descending; ties by lexicographic order of the sorted ids.
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.affixes < b.affixes;
  });
  if (all.size() > n) all.resize(n);

  bool has_empty = std::any_of(all.begin(), all.end(), [](const Entry& e) {
    return e.affixes.empty();
  });
  if (!has_empty) {
    auto it = counts.find({});
    std::int64_t freq = it == counts.end() ? 0 : it->second;
    all.push_back({{}, freq});
    std::stable_sort(all.begin(), all.end(),
                     [](const Entry& a, const Entry& b) {
                       if (a.freq != b.freq) return a.freq > b.freq;
                       return a.affixes < b.affixes;
                     });
  }

  v.entries_ = std::move(all);
  for (std::size_t i = 0; i < v.entries_.size(); ++i) {
    v.index_[v.entries_[i].affixes] = static_cast<int>(i);
    if (v.entries_[i].affixes.empty()) v.empty_id_ = static_cast<int>(i);
  }
  return v;
}

int AffixSetVocab::id_of(const std::vector<int>& canonical_combo) const {
  auto it = index_.find(canonical_combo);
  return it == index_.end() ? -1 : it->second;
}

int AffixSetVocab::map(const std::vector<int>& combo) const {
  for (int a : combo) {
    if (a < 0 || a >= n_affixes_) {
      throw ValidationError("map_affix_set: unknown affix id " +
                            std::to_string(a));
    }
  }
  std::vector<int> c = canonical(combo);
  int exact = id_of(c);
  if (exact >= 0) return exact;
  // Largest in-vocabulary subset; entries are ordered by (freq desc, lex),
  // so the first hit at a given cardinality already wins frequency ties,
  // and the lower id is the earlier entry.
  int best = empty_id_;
  int best_card = -1;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i].affixes;
    if (static_cast<int>(e.size()) <= best_card) continue;
    if (std::includes(c.begin(), c.end(), e.begin(), e.end())) {
      best = static_cast<int>(i);
      best_card = static_cast<int>(e.size());
    }
  }
  return best;
}

void AffixSetVocab::save(const std::string& path) const {
  std::ostringstream ss;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    ss << i << "\t";
    for (std::size_t k = 0; k < entries_[i].affixes.size(); ++k) {
      if (k) ss << ",";
      ss << entries_[i].affixes[k];
    }
    ss << "\t" << entries_[i].freq << "\n";
  }
  write_file(path, ss.str());
}

AffixSetVocab AffixSetVocab::load(const std::string& path, int n_affixes) {
  AffixSetVocab v;
  v.n_affixes_ = n_affixes;
  std::string text = read_file(path);
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    if (raw.empty()) continue;
    auto fields = split(raw, '\t');
    if (fields.size() != 3) {
      throw LoadError(path + ":" + std::to_string(line_no) +
                      ": expected 'id<TAB>affixes<TAB>frequency'");
    }
    Entry e;
    if (!fields[1].empty()) {
      for (const std::string& s : split(fields[1], ',')) {
        e.affixes.push_back(std::stoi(s));
      }
    }
    e.freq = std::stoll(fields[2]);
    int id = std::stoi(fields[0]);
    if (id != static_cast<int>(v.entries_.size())) {
      throw LoadError(path + ":" + std::to_string(line_no) +
                      ": ids must be consecutive from 0");
    }
    if (e.affixes.empty()) v.empty_id_ = id;
    v.index_[e.affixes] = id;
    v.entries_.push_back(std::move(e));
  }
  if (v.empty_id_ < 0) {
    throw LoadError(path + ": missing the empty combination entry");
  }
  return v;
}

}  // namespace morphlm::vocab
