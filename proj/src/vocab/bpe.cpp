#include "morphlm/vocab/bpe.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "morphlm/common.hpp"

namespace morphlm::vocab {

namespace {

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms;
  for (char32_t cp : utf8_decode(word)) {
    syms.push_back(utf8_encode({cp}));
  }
  syms.push_back(BpeModel::kEndOfWord);
  return syms;
}

// Merges adjacent (left,right) occurrences left to right, non-overlapping.
void apply_merge(std::vector<std::string>& syms, const std::string& left,
                 const std::string& right) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < syms.size();) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      syms[w] = left + right;
      ++w;
      i += 2;
    } else {
      if (w != i) syms[w] = std::move(syms[i]);
      ++w;
      i += 1;
    }
  }
  syms.resize(w);
}

}  // namespace

std::vector<std::string> BpeModel::vocabulary() const {
  std::vector<std::string> v = base_;
  for (const auto& [l, r] : merges_) v.push_back(l + r);
  return v;
}

std::vector<std::string> BpeModel::encode_word(const std::string& word) const {
  std::vector<std::string> syms = word_symbols(word);
  for (const auto& [l, r] : merges_) {
    if (syms.size() < 2) break;
    apply_merge(syms, l, r);
  }
  return syms;
}

std::string BpeModel::decode(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += t;
  std::string marker = kEndOfWord;
  std::size_t pos;
  while ((pos = out.find(marker)) != std::string::npos) {
    out.erase(pos, marker.size());
  }
  return out;
}

void BpeModel::save(const std::string& path) const {
  std::ostringstream ss;
  for (const auto& s : base_) ss << s << "\n";
  for (const auto& [l, r] : merges_) ss << l << " " << r << "\n";
  write_file(path, ss.str());
}

BpeModel BpeModel::load(const std::string& path) {
  BpeModel m;
  std::string text = read_file(path);
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    if (raw.empty()) continue;
    std::size_t sp = raw.find(' ');
    if (sp == std::string::npos) {
      if (!m.merges_.empty()) {
        throw LoadError(path + ":" + std::to_string(line_no) +
                        ": base symbol after merges section");
      }
      m.base_.push_back(raw);
    } else {
      std::string l = raw.substr(0, sp);
      std::string r = raw.substr(sp + 1);
      if (l.empty() || r.empty() || r.find(' ') != std::string::npos) {
        throw LoadError(path + ":" + std::to_string(line_no) +
                        ": malformed merge line");
      }
      m.merges_.emplace_back(std::move(l), std::move(r));
    }
  }
  return m;
}

BpeModel train_bpe(
    const std::vector<std::pair<std::string, std::int64_t>>& word_freqs,
    std::size_t target_vocab) {
  if (word_freqs.empty()) {
    throw ValidationError("train_bpe: empty corpus");
  }
  BpeModel model;

  std::vector<std::vector<std::string>> words;
  std::vector<std::int64_t> freqs;
  std::set<std::string> base_set;
  for (const auto& [w, f] : word_freqs) {
    if (w.empty() || f <= 0) continue;
    words.push_back(word_symbols(w));
    freqs.push_back(f);
    for (const auto& s : words.back()) base_set.insert(s);
  }
  if (words.empty()) {
    throw ValidationError("train_bpe: empty corpus");
  }
  model.base_.assign(base_set.begin(), base_set.end());
  if (target_vocab < model.base_.size()) {
    throw ValidationError("train_bpe: target vocabulary " +
                          std::to_string(target_vocab) +
                          " smaller than base symbol count " +
                          std::to_string(model.base_.size()));
  }

  while (model.base_.size() + model.merges_.size() < target_vocab) {
    // Count adjacent pairs over the current segmentation, weighted by the
    // word frequency; overlapping occurrences all count.
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_count;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& syms = words[w];
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        pair_count[{syms[i], syms[i + 1]}] += freqs[w];
      }
    }
    if (pair_count.empty()) break;
    auto best = pair_count.begin();
    for (auto it = std::next(pair_count.begin()); it != pair_count.end();
         ++it) {
      if (it->second > best->second) best = it;  // map order breaks ties
    }
    const auto& [l, r] = best->first;
    for (auto& syms : words) apply_merge(syms, l, r);
    model.merges_.emplace_back(l, r);
  }
  return model;
}

BpeModel train_bpe_text(const std::string& text, std::size_t target_vocab) {
  std::map<std::string, std::int64_t> counts;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) counts[cur]++;
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) counts[cur]++;
  std::vector<std::pair<std::string, std::int64_t>> freqs(counts.begin(),
                                                          counts.end());
  return train_bpe(freqs, target_vocab);
}

}  // namespace morphlm::vocab
