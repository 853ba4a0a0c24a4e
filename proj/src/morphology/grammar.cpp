#include "morphlm/morphology/grammar.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "morphlm/common.hpp"

namespace morphlm::morphology {

using nlohmann::json;

namespace {

[[noreturn]] void load_fail(const std::string& origin, const std::string& msg) {
  throw LoadError(origin + ": " + msg);
}

SlotKind parse_slot_kind(const std::string& s, const std::string& origin) {
  if (s == "prefix") return SlotKind::kPrefix;
  if (s == "stem") return SlotKind::kStem;
  if (s == "suffix") return SlotKind::kSuffix;
  load_fail(origin, "unknown slot kind '" + s + "'");
}

}  // namespace

int Grammar::pos_tag_index(std::string_view name) const {
  auto it = tag_index_.find(std::string(name));
  return it == tag_index_.end() ? -1 : it->second;
}

int Grammar::morpheme_index(std::string_view id) const {
  auto it = morpheme_index_.find(std::string(id));
  return it == morpheme_index_.end() ? -1 : it->second;
}

const std::vector<std::vector<int>>& Grammar::adjacency(int tag) const {
  static const std::vector<std::vector<int>> kEmpty;
  if (tag < 0 || tag >= static_cast<int>(adjacency_.size())) return kEmpty;
  return adjacency_[tag];
}

Grammar Grammar::load(const std::string& path) {
  return parse(read_file(path), path);
}

Grammar Grammar::parse(std::string_view json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    load_fail(origin, std::string("JSON parse error: ") + e.what());
  }

  Grammar g;

  if (!doc.contains("pos_tags") || !doc["pos_tags"].is_array()) {
    load_fail(origin, "missing 'pos_tags' array");
  }
  for (const auto& t : doc["pos_tags"]) {
    PosTag tag;
    tag.name = t.at("name").get<std::string>();
    tag.precedence = t.value("precedence", 1.0);
    if (!std::isfinite(tag.precedence)) {
      load_fail(origin, "pos tag '" + tag.name + "': precedence not finite");
    }
    if (g.tag_index_.count(tag.name)) {
      load_fail(origin, "duplicate pos tag '" + tag.name + "'");
    }
    g.tag_index_[tag.name] = static_cast<int>(g.pos_tags_.size());
    g.pos_tags_.push_back(std::move(tag));
  }
  if (g.pos_tags_.empty()) load_fail(origin, "'pos_tags' must be non-empty");
  if (!g.tag_index_.count(kFallbackTagName)) {
    g.tag_index_[kFallbackTagName] = static_cast<int>(g.pos_tags_.size());
    g.pos_tags_.push_back({kFallbackTagName, 1.0});
  }
  g.fallback_tag_ = g.tag_index_[kFallbackTagName];

  std::unordered_map<std::string, int> slot_index;
  for (const auto& s : doc.value("slots", json::array())) {
    Slot slot;
    slot.name = s.at("name").get<std::string>();
    slot.kind = parse_slot_kind(s.value("kind", "prefix"), origin);
    if (slot_index.count(slot.name)) {
      load_fail(origin, "duplicate slot '" + slot.name + "'");
    }
    slot_index[slot.name] = static_cast<int>(g.slots_.size());
    g.slots_.push_back(std::move(slot));
  }

  g.slot_morphemes_.assign(g.slots_.size(), {});
  for (const auto& m : doc.value("morphemes", json::array())) {
    Morpheme mo;
    mo.id = m.at("id").get<std::string>();
    std::string slot_name = m.at("slot").get<std::string>();
    auto it = slot_index.find(slot_name);
    if (it == slot_index.end()) {
      load_fail(origin,
                "morpheme '" + mo.id + "': unknown slot '" + slot_name + "'");
    }
    mo.slot = it->second;
    mo.form = m.at("form").get<std::string>();
    if (mo.form.empty()) {
      load_fail(origin, "morpheme '" + mo.id + "': empty form");
    }
    if (mo.form.find('+') != std::string::npos) {
      load_fail(origin, "morpheme '" + mo.id + "': form contains '+'");
    }
    mo.gloss = m.value("gloss", "");
    if (m.contains("class_marker") && !m["class_marker"].is_null()) {
      mo.class_marker = m["class_marker"].get<std::string>();
    }
    if (g.morpheme_index_.count(mo.id)) {
      load_fail(origin, "duplicate morpheme id '" + mo.id + "'");
    }
    g.morpheme_index_[mo.id] = static_cast<int>(g.morphemes_.size());
    g.slot_morphemes_[mo.slot].push_back(
        static_cast<int>(g.morphemes_.size()));
    g.morphemes_.push_back(std::move(mo));
  }

  int n_nodes = static_cast<int>(g.slots_.size()) + 2;
  g.adjacency_.assign(g.pos_tags_.size(), {});
  auto node_of = [&](const std::string& name) -> int {
    if (name == "START") return kStart;
    if (name == "END") return g.end_node();
    auto it = slot_index.find(name);
    if (it == slot_index.end()) {
      load_fail(origin, "edge references unknown slot '" + name + "'");
    }
    return g.slot_node(it->second);
  };
  for (const auto& e : doc.value("edges", json::array())) {
    std::string tag_name = e.at("pos").get<std::string>();
    auto it = g.tag_index_.find(tag_name);
    if (it == g.tag_index_.end()) {
      load_fail(origin, "edge references unknown pos tag '" + tag_name + "'");
    }
    int tag = it->second;
    int from = node_of(e.at("from").get<std::string>());
    int to = node_of(e.at("to").get<std::string>());
    if (from == g.end_node()) load_fail(origin, "edge starts at END");
    if (to == kStart) load_fail(origin, "edge ends at START");
    auto& adj = g.adjacency_[tag];
    if (adj.empty()) adj.assign(n_nodes, {});
    adj[from].push_back(to);
  }
  for (std::size_t tag = 0; tag < g.adjacency_.size(); ++tag) {
    if (!g.adjacency_[tag].empty()) {
      g.generative_tags_.push_back(static_cast<int>(tag));
    }
  }

  for (const auto& r : doc.value("rewrite_rules", json::array())) {
    RewriteRule rule;
    rule.pattern = r.at("pattern").get<std::string>();
    rule.replacement = r.value("replacement", "");
    std::size_t plus = rule.pattern.find('+');
    if (plus == std::string::npos ||
        rule.pattern.find('+', plus + 1) != std::string::npos) {
      load_fail(origin, "rewrite pattern '" + rule.pattern +
                            "' must contain exactly one '+'");
    }
    if (plus > 3 || rule.pattern.size() - plus - 1 > 3) {
      load_fail(origin, "rewrite pattern '" + rule.pattern +
                            "' exceeds 3 characters of boundary context");
    }
    if (rule.replacement.find('+') != std::string::npos) {
      load_fail(origin, "rewrite replacement for '" + rule.pattern +
                            "' must not contain '+'");
    }
    g.rewrite_rules_.push_back(std::move(rule));
  }

  if (doc.contains("agreement_rules")) {
    const auto& a = doc["agreement_rules"];
    g.agreement_.window = a.value("window", 7);
    if (g.agreement_.window < 1) {
      load_fail(origin, "agreement window must be >= 1");
    }
    for (const auto& r : a.value("rules", json::array())) {
      AgreementRule rule;
      rule.label = r.at("label").get<std::string>();
      rule.weight = r.value("weight", 1.0);
      if (!std::isfinite(rule.weight)) {
        load_fail(origin, "agreement rule '" + rule.label +
                              "': weight not finite");
      }
      g.agreement_.rules.push_back(std::move(rule));
    }
  }

  g.validate(origin);
  return g;
}

void Grammar::validate(const std::string& origin) {
  int n_nodes = static_cast<int>(slots_.size()) + 2;
  for (int tag : generative_tags_) {
    const auto& adj = adjacency_[tag];
    const std::string& tag_name = pos_tags_[tag].name;

    // Cycle detection (iterative coloring); reports one cycle by name.
    std::vector<int> color(n_nodes, 0);  // 0 white, 1 on stack, 2 done
    std::vector<int> stack, parent(n_nodes, -1);
    for (int start = 0; start < n_nodes; ++start) {
      if (color[start] != 0) continue;
      stack.push_back(start);
      while (!stack.empty()) {
        int u = stack.back();
        if (color[u] == 0) {
          color[u] = 1;
          for (int v : adj[u]) {
            if (color[v] == 1) {
              // Reconstruct the cycle v -> ... -> u -> v.
              std::vector<std::string> names;
              auto name_of = [&](int node) {
                if (node == kStart) return std::string("START");
                if (node == end_node()) return std::string("END");
                return slots_[node_slot(node)].name;
              };
              names.push_back(name_of(v));
              for (int w = u; w != v && w != -1; w = parent[w]) {
                names.push_back(name_of(w));
              }
              names.push_back(name_of(v));
              std::reverse(names.begin() + 1, names.end());
              load_fail(origin, "cycle in '" + tag_name + "' graph: " +
                                    join(names, " -> "));
            }
            if (color[v] == 0) parent[v] = u;
          }
          for (int v : adj[u]) {
            if (color[v] == 0) stack.push_back(v);
          }
        } else {
          color[u] = 2;
          stack.pop_back();
        }
      }
    }

    // Every complete START->END path must visit exactly one stem slot once.
    // DAG DP over nodes reachable from START that also reach END.
    std::vector<char> from_start(n_nodes, 0), to_end(n_nodes, 0);
    {
      std::vector<int> work{kStart};
      from_start[kStart] = 1;
      while (!work.empty()) {
        int u = work.back();
        work.pop_back();
        for (int v : adj[u]) {
          if (!from_start[v]) {
            from_start[v] = 1;
            work.push_back(v);
          }
        }
      }
      std::vector<std::vector<int>> rev(n_nodes);
      for (int u = 0; u < n_nodes; ++u)
        for (int v : adj[u]) rev[v].push_back(u);
      work.push_back(end_node());
      to_end[end_node()] = 1;
      while (!work.empty()) {
        int u = work.back();
        work.pop_back();
        for (int v : rev[u]) {
          if (!to_end[v]) {
            to_end[v] = 1;
            work.push_back(v);
          }
        }
      }
    }
    if (!from_start[end_node()]) {
      load_fail(origin, "'" + tag_name + "' graph has no START->END path");
    }
    // Longest/shortest stem-count over relevant paths via topological DP.
    std::vector<int> order;
    {
      std::vector<int> indeg(n_nodes, 0);
      for (int u = 0; u < n_nodes; ++u) {
        if (!from_start[u] || !to_end[u]) continue;
        for (int v : adj[u])
          if (from_start[v] && to_end[v]) indeg[v]++;
      }
      std::vector<int> work;
      for (int u = 0; u < n_nodes; ++u)
        if (from_start[u] && to_end[u] && indeg[u] == 0) work.push_back(u);
      while (!work.empty()) {
        int u = work.back();
        work.pop_back();
        order.push_back(u);
        for (int v : adj[u]) {
          if (from_start[v] && to_end[v] && --indeg[v] == 0)
            work.push_back(v);
        }
      }
    }
    const int kUnset = -1;
    std::vector<int> min_stems(n_nodes, n_nodes + 1), max_stems(n_nodes, kUnset);
    min_stems[kStart] = max_stems[kStart] = 0;
    for (int u : order) {
      if (max_stems[u] == kUnset) continue;
      for (int v : adj[u]) {
        if (!from_start[v] || !to_end[v]) continue;
        int self = 0;
        if (v != end_node() &&
            slots_[node_slot(v)].kind == SlotKind::kStem) {
          self = 1;
        }
        min_stems[v] = std::min(min_stems[v], min_stems[u] + self);
        max_stems[v] = std::max(max_stems[v], max_stems[u] + self);
      }
    }
    if (min_stems[end_node()] != 1 || max_stems[end_node()] != 1) {
      load_fail(origin, "'" + tag_name +
                            "' graph must visit exactly one stem slot on "
                            "every START->END path");
    }
  }
}

}  // namespace morphlm::morphology
