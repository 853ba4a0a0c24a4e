#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "morphlm/morphology/analyzer.hpp"
#include "morphlm/vocab/affix_set.hpp"
#include "morphlm/vocab/bpe.hpp"

namespace morphlm::vocab {

// Shared stem/BPE token vocabulary with reserved specials.
class StemVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kMask = 1;
  static constexpr int kUnk = 2;
  static constexpr int kSep = 3;
  static constexpr int kNumSpecials = 4;

  // Grammar stem morpheme ids followed by the BPE token inventory.
  static StemVocab build(const morphology::Grammar& grammar,
                         const BpeModel& bpe);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int id_of(const std::string& token) const;
  int id_or_unk(const std::string& token) const;

  void save(const std::string& path) const;
  static StemVocab load(const std::string& path);

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Encoder input unit: one analyzable word, or one BPE piece of a word the
// analyzer could not decompose.
struct WordPiece {
  std::string surface;    // the word, or the BPE piece text
  std::string stem_text;  // stem morpheme id, or the BPE piece
  int stem_id = -1;
  std::vector<int> affix_ids;  // affix inventory indices, surface order
  int affix_set_id = 0;
  int pos_tag_id = -1;
  bool is_bpe = false;
  double score = 0.0;
};

// Everything tokenize_word needs, loadable from a vocab directory.
struct Vocabs {
  StemVocab stems;
  std::vector<std::string> affixes;  // index -> affix morpheme id
  std::unordered_map<std::string, int> affix_index;
  AffixSetVocab affix_sets;
  BpeModel bpe;

  int affix_id(const std::string& morpheme_id) const;

  void save(const std::string& dir) const;
  static Vocabs load(const std::string& dir);

  // Affix inventory straight from the grammar, declaration order.
  static std::vector<std::string> affix_inventory(
      const morphology::Grammar& grammar);
};

// Turns the disambiguated analysis of one word into encoder input units:
// one WordPiece for an analyzable word, one flagged WordPiece per BPE token
// otherwise.
std::vector<WordPiece> tokenize_word(const morphology::Analysis& best,
                                     const morphology::Grammar& grammar,
                                     const Vocabs& vocabs);

}  // namespace morphlm::vocab
