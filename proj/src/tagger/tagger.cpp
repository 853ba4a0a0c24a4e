#include "morphlm/tagger/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "morphlm/common.hpp"

namespace morphlm::tagger {

using nlohmann::json;

double sigma(double z, const SigmoidRange& r, double outer_exponent) {
  if (!(r.z_b > r.z_a)) {
    throw ValidationError("sigma: require z_B > z_A");
  }
  double u = std::exp(-8.0 * (z - r.z_a) / (r.z_b - r.z_a));
  return std::pow(1.0 + u, -outer_exponent);
}

TokenEmissions emission_at(
    const morphology::Analyzer& analyzer,
    const std::vector<std::vector<morphology::Analysis>>& sentence,
    std::size_t t, const TaggerConfig& cfg) {
  if (t >= sentence.size()) {
    throw IndexError("emission_at: token index out of sentence");
  }
  const auto& grammar = analyzer.grammar();
  // Best entry per candidate tag, keyed by tag id for deterministic order.
  std::map<int, EmissionEntry> best;
  for (const morphology::Analysis& a : sentence[t]) {
    EmissionEntry e;
    e.token = static_cast<int>(t);
    e.tag = a.pos_tag;
    e.p_m = a.morph_score;
    e.p_p = grammar.pos_tags()[a.pos_tag].precedence;
    e.p_a = analyzer.agreement_score(grammar.agreement_rules(), sentence, t, a);
    e.mapped = sigma(e.p_m, cfg.range_m, cfg.outer_exponent) *
               sigma(e.p_p, cfg.range_p, cfg.outer_exponent) *
               sigma(e.p_a, cfg.range_a, cfg.outer_exponent);
    e.analysis = a;
    auto it = best.find(e.tag);
    if (it == best.end() || e.mapped > it->second.mapped) {
      best[e.tag] = std::move(e);
    }
  }
  TokenEmissions out;
  out.reserve(best.size());
  for (auto& [tag, e] : best) out.push_back(std::move(e));
  return out;
}

SentenceEmissions emission(
    const morphology::Analyzer& analyzer,
    const std::vector<std::vector<morphology::Analysis>>& sentence,
    const TaggerConfig& cfg) {
  SentenceEmissions out;
  out.reserve(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    out.push_back(emission_at(analyzer, sentence, t, cfg));
  }
  return out;
}

TransitionTables TransitionTables::uniform(std::vector<std::string> tag_names) {
  TransitionTables tt;
  tt.tags = std::move(tag_names);
  int n = tt.n();
  double p = 1.0 / static_cast<double>(n);
  tt.forward.assign(n, std::vector<double>(n, p));
  tt.backward.assign(n, std::vector<double>(n, p));
  tt.triple.assign(n, std::vector<std::vector<double>>(
                          n, std::vector<double>(n, p)));
  // Large context counts so the triple table is used directly.
  tt.context_count.assign(n, std::vector<double>(n, 1e9));
  return tt;
}

double TransitionTables::log_forward(int prev, int cur) const {
  return safe_log(forward[prev][cur]);
}

double TransitionTables::log_backward(int next, int cur) const {
  return safe_log(backward[next][cur]);
}

double TransitionTables::log_both(int prev, int next, int cur) const {
  if (context_count[prev][next] < triple_min_count) {
    return log_forward(prev, cur) + log_backward(next, cur);
  }
  return safe_log(triple[prev][next][cur]);
}

TransitionTables estimate_transitions(
    const std::vector<SentenceEmissions>& corpus,
    const std::vector<std::string>& tag_names, double alpha,
    double triple_min_count) {
  if (corpus.empty()) {
    throw ValidationError("estimate_transitions: empty corpus");
  }
  int n = static_cast<int>(tag_names.size());
  TransitionTables tt;
  tt.tags = tag_names;
  tt.alpha = alpha;
  tt.triple_min_count = triple_min_count;
  std::vector<std::vector<double>> fwd(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> bwd(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<std::vector<double>>> tri(
      n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
  tt.context_count.assign(n, std::vector<double>(n, 0.0));

  // Normalized per-token marginals over candidate tags.
  auto marginals = [n](const TokenEmissions& tok) {
    std::vector<std::pair<int, double>> m;
    double z = 0.0;
    for (const auto& e : tok) z += e.mapped;
    for (const auto& e : tok) {
      if (e.tag < 0 || e.tag >= n) {
        throw IndexError("estimate_transitions: tag id " +
                         std::to_string(e.tag) + " outside axis");
      }
      m.emplace_back(e.tag, z > 0.0 ? e.mapped / z : 1.0 / tok.size());
    }
    return m;
  };

  for (const SentenceEmissions& sent : corpus) {
    std::vector<std::vector<std::pair<int, double>>> ms;
    ms.reserve(sent.size());
    for (const auto& tok : sent) ms.push_back(marginals(tok));
    for (std::size_t t = 0; t + 1 < sent.size(); ++t) {
      for (const auto& [y1, w1] : ms[t]) {
        for (const auto& [y2, w2] : ms[t + 1]) {
          fwd[y1][y2] += w1 * w2;
          bwd[y2][y1] += w1 * w2;
        }
      }
    }
    for (std::size_t t = 1; t + 1 < sent.size(); ++t) {
      for (const auto& [yp, wp] : ms[t - 1]) {
        for (const auto& [yc, wc] : ms[t]) {
          for (const auto& [yn, wn] : ms[t + 1]) {
            tri[yp][yn][yc] += wp * wc * wn;
          }
        }
      }
    }
    for (std::size_t t = 1; t + 1 < sent.size(); ++t) {
      for (const auto& [yp, wp] : ms[t - 1]) {
        for (const auto& [yn, wn] : ms[t + 1]) {
          tt.context_count[yp][yn] += wp * wn;
        }
      }
    }
  }

  auto normalize_row = [alpha](std::vector<double>& row) {
    double z = 0.0;
    for (double& v : row) {
      v += alpha;
      z += v;
    }
    for (double& v : row) v /= z;
  };
  for (auto& row : fwd) normalize_row(row);
  for (auto& row : bwd) normalize_row(row);
  for (auto& plane : tri) {
    for (auto& row : plane) normalize_row(row);
  }
  tt.forward = std::move(fwd);
  tt.backward = std::move(bwd);
  tt.triple = std::move(tri);
  return tt;
}

std::string TransitionTables::to_json() const {
  json doc;
  doc["tags"] = tags;
  doc["alpha"] = alpha;
  doc["triple_min_count"] = triple_min_count;
  doc["forward"] = forward;
  doc["backward"] = backward;
  doc["triple"] = triple;
  doc["context_count"] = context_count;
  return doc.dump(2);
}

TransitionTables TransitionTables::from_json(std::string_view text,
                                             const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(origin + ": JSON parse error: " + e.what());
  }
  TransitionTables tt;
  try {
    tt.tags = doc.at("tags").get<std::vector<std::string>>();
    tt.alpha = doc.at("alpha").get<double>();
    tt.triple_min_count = doc.at("triple_min_count").get<double>();
    tt.forward = doc.at("forward").get<std::vector<std::vector<double>>>();
    tt.backward = doc.at("backward").get<std::vector<std::vector<double>>>();
    tt.triple =
        doc.at("triple")
            .get<std::vector<std::vector<std::vector<double>>>>();
    tt.context_count =
        doc.at("context_count").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw LoadError(origin + ": bad transition table: " + e.what());
  }
  std::size_t n = tt.tags.size();
  if (tt.forward.size() != n || tt.backward.size() != n ||
      tt.triple.size() != n || tt.context_count.size() != n) {
    throw LoadError(origin + ": transition table axes do not match tag list");
  }
  return tt;
}

void TransitionTables::save(const std::string& path) const {
  write_file(path, to_json());
}

TransitionTables TransitionTables::load(const std::string& path) {
  return from_json(read_file(path), path);
}

namespace {

// Total order for argmax over candidate entries: higher score wins, exact
// score ties go to higher precedence, then lower tag id.
struct Argmax {
  double score = 0.0;
  double precedence = 0.0;
  int tag = -1;
  const EmissionEntry* entry = nullptr;

  bool better_than(const Argmax& o) const {
    if (entry == nullptr) return false;
    if (o.entry == nullptr) return true;
    if (score != o.score) return score > o.score;
    if (precedence != o.precedence) return precedence > o.precedence;
    return tag < o.tag;
  }
};

void check_entries(const SentenceEmissions& entries) {
  if (entries.empty()) {
    throw ValidationError("decode: empty sentence");
  }
  for (const auto& tok : entries) {
    if (tok.empty()) {
      throw ValidationError("decode: token without candidate entries");
    }
  }
}

}  // namespace

DecodeResult decode_bidirectional(const SentenceEmissions& entries,
                                  const TransitionTables& tables,
                                  const std::vector<double>& precedence) {
  check_entries(entries);
  std::size_t n = entries.size();
  DecodeResult res;
  res.tags.assign(n, -1);
  res.log_scores.assign(n, 0.0);
  std::vector<char> decoded(n, 0);

  // Decode order key: max over candidate tags of mapped emission.
  std::vector<double> order_key(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double mx = entries[t][0].mapped;
    for (const auto& e : entries[t]) mx = std::max(mx, e.mapped);
    order_key[t] = mx;
  }

  for (std::size_t step = 0; step < n; ++step) {
    // Highest key first; ties to the lower token index.
    std::size_t pick = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (decoded[t]) continue;
      if (pick == n || order_key[t] > order_key[pick]) pick = t;
    }
    bool left = pick > 0 && decoded[pick - 1];
    bool right = pick + 1 < n && decoded[pick + 1];
    Argmax best;
    for (const auto& e : entries[pick]) {
      double s = safe_log(e.mapped);
      if (left && right) {
        s += tables.log_both(res.tags[pick - 1], res.tags[pick + 1], e.tag);
        s += res.log_scores[pick - 1] + res.log_scores[pick + 1];
      } else if (left) {
        s += tables.log_forward(res.tags[pick - 1], e.tag);
        s += res.log_scores[pick - 1];
      } else if (right) {
        s += tables.log_backward(res.tags[pick + 1], e.tag);
        s += res.log_scores[pick + 1];
      }
      Argmax cand{s, precedence[e.tag], e.tag, &e};
      if (cand.better_than(best)) best = cand;
    }
    res.tags[pick] = best.tag;
    res.log_scores[pick] = best.score;
    decoded[pick] = 1;
  }
  return res;
}

DecodeResult decode_viterbi(const SentenceEmissions& entries,
                            const TransitionTables& tables,
                            const std::vector<double>& precedence) {
  check_entries(entries);
  std::size_t n = entries.size();
  // dp[t][i]: best log score of a prefix ending with candidate i at token t.
  std::vector<std::vector<double>> dp(n);
  std::vector<std::vector<int>> back(n);
  dp[0].resize(entries[0].size());
  back[0].assign(entries[0].size(), -1);
  for (std::size_t i = 0; i < entries[0].size(); ++i) {
    dp[0][i] = safe_log(entries[0][i].mapped);
  }
  for (std::size_t t = 1; t < n; ++t) {
    dp[t].resize(entries[t].size());
    back[t].assign(entries[t].size(), -1);
    for (std::size_t j = 0; j < entries[t].size(); ++j) {
      Argmax best;
      for (std::size_t i = 0; i < entries[t - 1].size(); ++i) {
        double s =
            dp[t - 1][i] +
            tables.log_forward(entries[t - 1][i].tag, entries[t][j].tag);
        Argmax cand{s, precedence[entries[t - 1][i].tag],
                    entries[t - 1][i].tag, &entries[t - 1][i]};
        if (cand.better_than(best)) {
          best = cand;
          back[t][j] = static_cast<int>(i);
        }
      }
      dp[t][j] = best.score + safe_log(entries[t][j].mapped);
    }
  }
  Argmax final_best;
  int final_idx = -1;
  for (std::size_t j = 0; j < entries[n - 1].size(); ++j) {
    Argmax cand{dp[n - 1][j], precedence[entries[n - 1][j].tag],
                entries[n - 1][j].tag, &entries[n - 1][j]};
    if (cand.better_than(final_best)) {
      final_best = cand;
      final_idx = static_cast<int>(j);
    }
  }
  DecodeResult res;
  res.tags.assign(n, -1);
  res.log_scores.assign(n, 0.0);
  int idx = final_idx;
  for (std::size_t t = n; t-- > 0;) {
    res.tags[t] = entries[t][idx].tag;
    res.log_scores[t] = dp[t][idx];
    idx = back[t][idx];
  }
  return res;
}

}  // namespace morphlm::tagger
