#include "morphlm/vocab/vocab.hpp"

#include <filesystem>
#include <sstream>

#include "morphlm/common.hpp"

namespace morphlm::vocab {

namespace fs = std::filesystem;

void StemVocab::add(const std::string& token) {
  if (index_.count(token)) return;
  index_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
}

StemVocab StemVocab::build(const morphology::Grammar& grammar,
                           const BpeModel& bpe) {
  StemVocab v;
  v.add("[PAD]");
  v.add("[MASK]");
  v.add("[UNK]");
  v.add("[SEP]");
  for (const auto& m : grammar.morphemes()) {
    if (grammar.slots()[m.slot].kind == morphology::SlotKind::kStem) {
      v.add(m.id);
    }
  }
  for (const std::string& t : bpe.vocabulary()) v.add(t);
  return v;
}

int StemVocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

int StemVocab::id_or_unk(const std::string& token) const {
  int id = id_of(token);
  return id < 0 ? kUnk : id;
}

void StemVocab::save(const std::string& path) const {
  std::ostringstream ss;
  for (const auto& t : tokens_) ss << t << "\n";
  write_file(path, ss.str());
}

StemVocab StemVocab::load(const std::string& path) {
  StemVocab v;
  std::string text = read_file(path);
  for (const std::string& line : split(text, '\n')) {
    if (line.empty()) continue;
    if (v.index_.count(line)) {
      throw LoadError(path + ": duplicate token '" + line + "'");
    }
    v.add(line);
  }
  if (v.size() < kNumSpecials || v.tokens_[kPad] != "[PAD]" ||
      v.tokens_[kMask] != "[MASK]" || v.tokens_[kUnk] != "[UNK]" ||
      v.tokens_[kSep] != "[SEP]") {
    throw LoadError(path + ": special tokens missing or misplaced");
  }
  return v;
}

int Vocabs::affix_id(const std::string& morpheme_id) const {
  auto it = affix_index.find(morpheme_id);
  return it == affix_index.end() ? -1 : it->second;
}

std::vector<std::string> Vocabs::affix_inventory(
    const morphology::Grammar& grammar) {
  std::vector<std::string> out;
  for (const auto& m : grammar.morphemes()) {
    if (grammar.slots()[m.slot].kind != morphology::SlotKind::kStem) {
      out.push_back(m.id);
    }
  }
  return out;
}

void Vocabs::save(const std::string& dir) const {
  fs::create_directories(dir);
  stems.save((fs::path(dir) / "stems.vocab").string());
  std::ostringstream ss;
  for (const auto& a : affixes) ss << a << "\n";
  write_file((fs::path(dir) / "affixes.vocab").string(), ss.str());
  affix_sets.save((fs::path(dir) / "affix_sets.vocab").string());
  bpe.save((fs::path(dir) / "bpe.model").string());
}

Vocabs Vocabs::load(const std::string& dir) {
  Vocabs v;
  v.stems = StemVocab::load((fs::path(dir) / "stems.vocab").string());
  std::string text = read_file((fs::path(dir) / "affixes.vocab").string());
  for (const std::string& line : split(text, '\n')) {
    if (line.empty()) continue;
    v.affix_index[line] = static_cast<int>(v.affixes.size());
    v.affixes.push_back(line);
  }
  v.affix_sets =
      AffixSetVocab::load((fs::path(dir) / "affix_sets.vocab").string(),
                          static_cast<int>(v.affixes.size()));
  v.bpe = BpeModel::load((fs::path(dir) / "bpe.model").string());
  return v;
}

std::vector<WordPiece> tokenize_word(const morphology::Analysis& best,
                                     const morphology::Grammar& grammar,
                                     const Vocabs& vocabs) {
  std::vector<WordPiece> out;
  if (!best.is_bpe_fallback) {
    WordPiece w;
    w.surface = best.surface;
    w.stem_text = best.stem_text;
    w.stem_id = vocabs.stems.id_or_unk(best.stem_text);
    for (int m : best.affixes) {
      int id = vocabs.affix_id(grammar.morphemes()[m].id);
      if (id < 0) {
        throw ValidationError("tokenize_word: affix morpheme '" +
                              grammar.morphemes()[m].id +
                              "' missing from affix inventory");
      }
      w.affix_ids.push_back(id);
    }
    w.affix_set_id =
        vocabs.affix_sets.map(AffixSetVocab::canonical(w.affix_ids));
    w.pos_tag_id = best.pos_tag;
    w.is_bpe = false;
    w.score = best.morph_score;
    out.push_back(std::move(w));
    return out;
  }
  for (const std::string& piece : vocabs.bpe.encode_word(best.surface)) {
    WordPiece w;
    w.surface = piece;
    w.stem_text = piece;
    w.stem_id = vocabs.stems.id_or_unk(piece);
    w.affix_set_id = vocabs.affix_sets.empty_set_id();
    w.pos_tag_id = grammar.fallback_tag();
    w.is_bpe = true;
    w.score = 0.0;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace morphlm::vocab
