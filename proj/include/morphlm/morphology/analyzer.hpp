#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "morphlm/morphology/grammar.hpp"

namespace morphlm::morphology {

// One complete morphotactic traversal: the POS tag selecting the subgraph
// plus the chosen morphemes in slot order.
struct Path {
  int pos_tag = -1;
  std::vector<int> morphemes;

  bool operator==(const Path&) const = default;
};

// One morphological parse of a word. `path` keeps the full ordered morpheme
// sequence so the parse can be regenerated; `stem`/`affixes` are views of it.
struct Analysis {
  std::string surface;
  int stem = -1;                // morpheme index; -1 for BPE fallback
  std::string stem_text;        // morpheme id, or the word itself on fallback
  std::vector<int> affixes;     // morpheme indices in surface order
  std::vector<int> path;        // full ordered morpheme indices incl. stem
  int pos_tag = -1;
  double morph_score = 0.0;     // unnormalized log-count prior
  bool is_bpe_fallback = false;
};

// Morpheme frequency prior: id -> count, scored as ln(1 + count).
class MorphemeCounts {
 public:
  MorphemeCounts() = default;
  static MorphemeCounts load(const std::string& path);

  void set(const std::string& id, double count) { counts_[id] = count; }
  double count(const std::string& id) const {
    auto it = counts_.find(id);
    return it == counts_.end() ? 0.0 : it->second;
  }

 private:
  std::unordered_map<std::string, double> counts_;
};

class Analyzer {
 public:
  explicit Analyzer(const Grammar& grammar, MorphemeCounts counts = {});

  const Grammar& grammar() const { return *grammar_; }

  // Realizes a traversal: concatenate underlying forms with boundary
  // markers, then resolve boundaries left to right, first matching rule
  // first, deleting the marker when no rule applies.
  std::string generate(const Path& path) const;

  // All parses whose generate() output equals the word, sorted canonically;
  // a single BPE-fallback analysis when there are none.
  std::vector<Analysis> analyze(const std::string& word) const;

  // ln(1+count) summed over the analysis' morphemes.
  double score_analysis(const Analysis& a) const;

  // Weighted sum of matched agreement rules in the window centered at t.
  double agreement_score(const AgreementRuleSet& rules,
                         const std::vector<std::vector<Analysis>>& sentence,
                         std::size_t t, const Analysis& candidate) const;

  // Every complete traversal of every tag subgraph, in deterministic order.
  std::vector<Path> enumerate_paths(std::size_t limit = 1000000) const;

  // The rewrite cascade applied to an explicit marked string (test hook).
  std::string realize(const std::string& marked) const;

 private:
  Analysis path_to_analysis(const Path& p, const std::string& surface) const;
  // Resolves the single trailing boundary created by appending `form`.
  std::string append_form(const std::string& realized,
                          const std::string& form) const;

  const Grammar* grammar_;
  MorphemeCounts counts_;
};

}  // namespace morphlm::morphology
