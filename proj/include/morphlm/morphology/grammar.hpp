#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace morphlm::morphology {

struct PosTag {
  std::string name;
  double precedence = 1.0;  // local precedence weight between competing tags
};

enum class SlotKind { kPrefix, kStem, kSuffix };

struct Slot {
  std::string name;
  SlotKind kind = SlotKind::kPrefix;
};

struct Morpheme {
  std::string id;
  int slot = -1;
  std::string form;   // underlying form, boundary markers added at generation
  std::string gloss;
  std::string class_marker;  // empty when the morpheme carries none
};

// Surface rewrite at a morpheme boundary. The pattern contains exactly one
// '+' and at most 3 characters of context on either side; the replacement
// carries no boundary marker, so every application consumes one boundary.
struct RewriteRule {
  std::string pattern;
  std::string replacement;
};

struct AgreementRule {
  std::string label;
  double weight = 1.0;
};

// Empty `rules` means the default scoring: +1 per neighboring token sharing
// any of the candidate's class-marker labels.
struct AgreementRuleSet {
  std::vector<AgreementRule> rules;
  int window = 7;
};

// Morpheme-sequencing DAG over slots, one subgraph per POS tag, plus the
// ordered rewrite cascade. Immutable after load.
class Grammar {
 public:
  // Node ids: 0 = START, 1..slot_count = slots, slot_count+1 = END.
  static constexpr int kStart = 0;
  int end_node() const { return static_cast<int>(slots_.size()) + 1; }
  int slot_node(int slot_index) const { return slot_index + 1; }
  int node_slot(int node) const { return node - 1; }

  static Grammar load(const std::string& path);
  static Grammar parse(std::string_view json_text, const std::string& origin);

  const std::vector<PosTag>& pos_tags() const { return pos_tags_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<Morpheme>& morphemes() const { return morphemes_; }
  const std::vector<RewriteRule>& rewrite_rules() const {
    return rewrite_rules_;
  }
  const AgreementRuleSet& agreement_rules() const { return agreement_; }

  int pos_tag_index(std::string_view name) const;
  int morpheme_index(std::string_view id) const;
  int fallback_tag() const { return fallback_tag_; }

  // Adjacency of the tag's subgraph; empty when the tag has no edges.
  const std::vector<std::vector<int>>& adjacency(int tag) const;
  // Morpheme indices housed in each slot.
  const std::vector<std::vector<int>>& slot_morphemes() const {
    return slot_morphemes_;
  }
  // Tags that own at least one edge, in declaration order.
  const std::vector<int>& generative_tags() const { return generative_tags_; }

  static constexpr const char* kFallbackTagName = "UNK#BPE";

 private:
  void validate(const std::string& origin);

  std::vector<PosTag> pos_tags_;
  std::vector<Slot> slots_;
  std::vector<Morpheme> morphemes_;
  std::vector<RewriteRule> rewrite_rules_;
  AgreementRuleSet agreement_;
  int fallback_tag_ = -1;

  std::unordered_map<std::string, int> tag_index_;
  std::unordered_map<std::string, int> morpheme_index_;
  std::vector<std::vector<std::vector<int>>> adjacency_;  // [tag][node] -> nodes
  std::vector<std::vector<int>> slot_morphemes_;
  std::vector<int> generative_tags_;
};

}  // namespace morphlm::morphology
