#include "morphlm/morphology/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "morphlm/common.hpp"

namespace morphlm::morphology {

namespace {

// Tries rules in order against the boundary at `plus`, aligning each
// pattern's own '+' with it. Returns true and applies in place on a hit.
bool apply_rule_at(std::string& s, std::size_t plus,
                   const std::vector<RewriteRule>& rules) {
  for (const auto& rule : rules) {
    std::size_t pat_plus = rule.pattern.find('+');
    if (plus < pat_plus) continue;
    std::size_t start = plus - pat_plus;
    if (start + rule.pattern.size() > s.size()) continue;
    if (s.compare(start, rule.pattern.size(), rule.pattern) == 0) {
      s.replace(start, rule.pattern.size(), rule.replacement);
      return true;
    }
  }
  return false;
}

void resolve_boundaries(std::string& s,
                        const std::vector<RewriteRule>& rules) {
  std::size_t plus;
  while ((plus = s.find('+')) != std::string::npos) {
    if (!apply_rule_at(s, plus, rules)) {
      s.erase(plus, 1);  // plain concatenation
    }
  }
}

// Collects the class markers carried by an analysis' morphemes.
std::set<std::string> markers_of(const Grammar& g, const Analysis& a) {
  std::set<std::string> out;
  for (int m : a.path) {
    const auto& cm = g.morphemes()[m].class_marker;
    if (!cm.empty()) out.insert(cm);
  }
  return out;
}

}  // namespace

MorphemeCounts MorphemeCounts::load(const std::string& path) {
  MorphemeCounts c;
  std::string text = read_file(path);
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw LoadError(path + ":" + std::to_string(line_no) +
                      ": expected 'morpheme_id<TAB>count'");
    }
    try {
      c.counts_[fields[0]] = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw LoadError(path + ":" + std::to_string(line_no) +
                      ": count '" + fields[1] + "' is not a number");
    }
  }
  return c;
}

Analyzer::Analyzer(const Grammar& grammar, MorphemeCounts counts)
    : grammar_(&grammar), counts_(std::move(counts)) {}

std::string Analyzer::realize(const std::string& marked) const {
  std::string s = marked;
  resolve_boundaries(s, grammar_->rewrite_rules());
  return s;
}

std::string Analyzer::append_form(const std::string& realized,
                                  const std::string& form) const {
  if (realized.empty()) return form;
  std::string s = realized + "+" + form;
  resolve_boundaries(s, grammar_->rewrite_rules());
  return s;
}

std::string Analyzer::generate(const Path& path) const {
  const Grammar& g = *grammar_;
  if (path.pos_tag < 0 ||
      path.pos_tag >= static_cast<int>(g.pos_tags().size())) {
    throw PathError("generate: unknown pos tag index " +
                    std::to_string(path.pos_tag));
  }
  const auto& adj = g.adjacency(path.pos_tag);
  if (adj.empty()) {
    throw PathError("generate: pos tag '" + g.pos_tags()[path.pos_tag].name +
                    "' has no morphotactics graph");
  }
  if (path.morphemes.empty()) {
    throw PathError("generate: empty morpheme sequence");
  }
  int node = Grammar::kStart;
  std::string marked;
  for (int m : path.morphemes) {
    if (m < 0 || m >= static_cast<int>(g.morphemes().size())) {
      throw PathError("generate: unknown morpheme index " + std::to_string(m));
    }
    int next = g.slot_node(g.morphemes()[m].slot);
    const auto& outs = adj[node];
    if (std::find(outs.begin(), outs.end(), next) == outs.end()) {
      throw PathError("generate: no edge into slot '" +
                      g.slots()[g.morphemes()[m].slot].name +
                      "' at this position of the '" +
                      g.pos_tags()[path.pos_tag].name + "' graph");
    }
    node = next;
    if (!marked.empty()) marked += "+";
    marked += g.morphemes()[m].form;
  }
  const auto& outs = adj[node];
  if (std::find(outs.begin(), outs.end(), g.end_node()) == outs.end()) {
    throw PathError("generate: traversal does not reach END");
  }
  resolve_boundaries(marked, g.rewrite_rules());
  return marked;
}

Analysis Analyzer::path_to_analysis(const Path& p,
                                    const std::string& surface) const {
  const Grammar& g = *grammar_;
  Analysis a;
  a.surface = surface;
  a.path = p.morphemes;
  a.pos_tag = p.pos_tag;
  for (int m : p.morphemes) {
    if (g.slots()[g.morphemes()[m].slot].kind == SlotKind::kStem) {
      a.stem = m;
      a.stem_text = g.morphemes()[m].id;
    } else {
      a.affixes.push_back(m);
    }
  }
  a.morph_score = score_analysis(a);
  return a;
}

std::vector<Analysis> Analyzer::analyze(const std::string& word) const {
  if (word.empty()) throw ValidationError("analyze: empty word");
  const Grammar& g = *grammar_;
  std::vector<Analysis> out;

  // Realized strings are stable except for the trailing rule-context window;
  // future boundary resolutions can only rewrite the last 3 characters.
  const std::size_t kCushion = 3;
  const std::size_t kMaxOverhang = 48;

  for (int tag : g.generative_tags()) {
    const auto& adj = g.adjacency(tag);
    std::vector<int> morphemes;
    auto dfs = [&](auto&& self, int node, const std::string& realized) -> void {
      if (node == g.end_node()) {
        if (realized == word && !morphemes.empty()) {
          Path p{tag, morphemes};
          // Authoritative check: the parse must regenerate the word.
          if (generate(p) == word) {
            out.push_back(path_to_analysis(p, word));
          }
        }
        return;
      }
      for (int next : adj[node]) {
        if (next == g.end_node()) {
          self(self, next, realized);
          continue;
        }
        for (int m : g.slot_morphemes()[g.node_slot(next)]) {
          std::string ns = append_form(realized, g.morphemes()[m].form);
          if (ns.size() > word.size() + kMaxOverhang) continue;
          std::size_t stable =
              ns.size() > kCushion ? ns.size() - kCushion : 0;
          if (stable > word.size() ||
              ns.compare(0, stable, word, 0, stable) != 0) {
            continue;
          }
          morphemes.push_back(m);
          self(self, next, ns);
          morphemes.pop_back();
        }
      }
    };
    dfs(dfs, Grammar::kStart, "");
  }

  if (out.empty()) {
    Analysis fb;
    fb.surface = word;
    fb.stem = -1;
    fb.stem_text = word;
    fb.pos_tag = g.fallback_tag();
    fb.morph_score = 0.0;
    fb.is_bpe_fallback = true;
    out.push_back(std::move(fb));
    return out;
  }

  std::sort(out.begin(), out.end(), [](const Analysis& a, const Analysis& b) {
    if (a.pos_tag != b.pos_tag) return a.pos_tag < b.pos_tag;
    return a.path < b.path;
  });
  return out;
}

double Analyzer::score_analysis(const Analysis& a) const {
  if (a.is_bpe_fallback) return 0.0;
  const Grammar& g = *grammar_;
  double s = 0.0;
  for (int m : a.path) {
    s += std::log1p(counts_.count(g.morphemes()[m].id));
  }
  return s;
}

double Analyzer::agreement_score(
    const AgreementRuleSet& rules,
    const std::vector<std::vector<Analysis>>& sentence, std::size_t t,
    const Analysis& candidate) const {
  if (t >= sentence.size()) {
    throw IndexError("agreement_score: token index out of sentence");
  }
  const Grammar& g = *grammar_;
  std::set<std::string> cand_markers = markers_of(g, candidate);
  if (cand_markers.empty()) return 0.0;

  int half = (rules.window - 1) / 2;
  double score = 0.0;
  std::int64_t ti = static_cast<std::int64_t>(t);
  for (std::int64_t i = ti - half; i <= ti + half; ++i) {
    if (i < 0 || i >= static_cast<std::int64_t>(sentence.size()) || i == ti) {
      continue;
    }
    std::set<std::string> neigh;
    for (const Analysis& a : sentence[i]) {
      auto ms = markers_of(g, a);
      neigh.insert(ms.begin(), ms.end());
    }
    if (rules.rules.empty()) {
      // Default: one point per neighbor sharing any candidate marker.
      bool shared = std::any_of(
          cand_markers.begin(), cand_markers.end(),
          [&](const std::string& m) { return neigh.count(m) > 0; });
      if (shared) score += 1.0;
    } else {
      for (const AgreementRule& r : rules.rules) {
        if (cand_markers.count(r.label) && neigh.count(r.label)) {
          score += r.weight;
        }
      }
    }
  }
  return score;
}

std::vector<Path> Analyzer::enumerate_paths(std::size_t limit) const {
  const Grammar& g = *grammar_;
  std::vector<Path> out;
  for (int tag : g.generative_tags()) {
    const auto& adj = g.adjacency(tag);
    std::vector<int> morphemes;
    // Recursive lambda DFS in declaration order.
    auto dfs = [&](auto&& self, int node) -> void {
      if (node == g.end_node()) {
        out.push_back({tag, morphemes});
        if (out.size() > limit) {
          throw ValidationError("enumerate_paths: more than " +
                                std::to_string(limit) + " paths");
        }
        return;
      }
      for (int next : adj[node]) {
        if (next == g.end_node()) {
          self(self, next);
          continue;
        }
        for (int m : g.slot_morphemes()[g.node_slot(next)]) {
          morphemes.push_back(m);
          self(self, next);
          morphemes.pop_back();
        }
      }
    };
    dfs(dfs, Grammar::kStart);
  }
  return out;
}

}  // namespace morphlm::morphology
