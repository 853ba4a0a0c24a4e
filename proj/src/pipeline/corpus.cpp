#include "morphlm/pipeline/corpus.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include "morphlm/common.hpp"

namespace morphlm::pipeline {

namespace {

bool is_punct_char(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

bool is_terminal(const std::string& token) {
  return token.find('.') != std::string::npos ||
         token.find('!') != std::string::npos ||
         token.find('?') != std::string::npos;
}

}  // namespace

std::vector<std::vector<std::string>> split_sentences(
    const std::string& text) {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  auto flush = [&]() {
    if (!current.empty()) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  };
  for (const std::string& line : split(lowercase(text), '\n')) {
    std::istringstream ss(line);
    std::string raw;
    while (ss >> raw) {
      // Peel leading and trailing punctuation runs off the core token.
      std::size_t begin = 0, end = raw.size();
      while (begin < end && is_punct_char(raw[begin])) begin++;
      while (end > begin && is_punct_char(raw[end - 1])) end--;
      std::string lead = raw.substr(0, begin);
      std::string core = raw.substr(begin, end - begin);
      std::string tail = raw.substr(end);
      if (!lead.empty()) current.push_back(lead);
      if (!core.empty()) current.push_back(core);
      if (!tail.empty()) current.push_back(tail);
      if (!tail.empty() && is_terminal(tail)) flush();
      if (core.empty() && tail.empty() && !lead.empty() && is_terminal(lead)) {
        flush();
      }
    }
    flush();  // newline always ends a sentence
  }
  return sentences;
}

TaggedCorpus tag_corpus(const std::string& raw_text,
                        const morphology::Analyzer& analyzer,
                        const tagger::TaggerConfig& tagger_cfg, int workers) {
  if (workers < 1) workers = 1;
  auto sentences = split_sentences(raw_text);
  TaggedCorpus result;

  std::vector<std::string> tag_names;
  std::vector<double> precedence;
  for (const auto& t : analyzer.grammar().pos_tags()) {
    tag_names.push_back(t.name);
    precedence.push_back(t.precedence);
  }

  if (sentences.empty()) {
    result.tables = tagger::TransitionTables::uniform(tag_names);
    return result;
  }

  auto run_stage = [&](auto&& fn) {
    std::vector<std::thread> pool;
    std::size_t n = sentences.size();
    std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      std::size_t lo = w * chunk;
      std::size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi]() {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      });
    }
    for (auto& t : pool) t.join();
  };

  // Stage 1: analyses and emission scores per sentence.
  std::vector<tagger::SentenceEmissions> emissions(sentences.size());
  run_stage([&](std::size_t i) {
    std::vector<std::vector<morphology::Analysis>> sent;
    sent.reserve(sentences[i].size());
    for (const std::string& w : sentences[i]) {
      sent.push_back(analyzer.analyze(w));
    }
    emissions[i] = tagger::emission(analyzer, sent, tagger_cfg);
  });

  // Corpus-level transition tables from the emission-scored stream.
  result.tables = tagger::estimate_transitions(
      emissions, tag_names, tagger_cfg.alpha, tagger_cfg.triple_min_count);

  // Stage 2: decode; keep the analysis behind the winning tag.
  result.chosen.assign(sentences.size(), {});
  run_stage([&](std::size_t i) {
    tagger::DecodeResult decoded = tagger::decode_bidirectional(
        emissions[i], result.tables, precedence);
    std::vector<morphology::Analysis> sent;
    for (std::size_t t = 0; t < sentences[i].size(); ++t) {
      const tagger::EmissionEntry* chosen = nullptr;
      for (const auto& e : emissions[i][t]) {
        if (e.tag == decoded.tags[t]) {
          chosen = &e;
          break;
        }
      }
      if (chosen == nullptr) {
        throw Error("tag_corpus: decoded tag missing from candidates");
      }
      sent.push_back(chosen->analysis);
    }
    result.chosen[i] = std::move(sent);
  });
  return result;
}

PreprocessResult preprocess(const std::string& raw_text,
                            const morphology::Analyzer& analyzer,
                            const vocab::Vocabs& vocabs,
                            const tagger::TaggerConfig& tagger_cfg,
                            int workers) {
  TaggedCorpus tagged = tag_corpus(raw_text, analyzer, tagger_cfg, workers);
  PreprocessResult result;
  result.tables = std::move(tagged.tables);
  result.sentences.reserve(tagged.chosen.size());
  for (const auto& sent : tagged.chosen) {
    Sentence out;
    for (const morphology::Analysis& a : sent) {
      auto pieces = vocab::tokenize_word(a, analyzer.grammar(), vocabs);
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
    result.sentences.push_back(std::move(out));
  }
  return result;
}

Sentence preprocess_text(const std::string& text,
                         const morphology::Analyzer& analyzer,
                         const vocab::Vocabs& vocabs,
                         const tagger::TaggerConfig& tagger_cfg,
                         const tagger::TransitionTables& tables) {
  std::vector<double> precedence;
  for (const auto& t : analyzer.grammar().pos_tags()) {
    precedence.push_back(t.precedence);
  }
  Sentence out;
  for (const auto& words : split_sentences(text)) {
    std::vector<std::vector<morphology::Analysis>> sent;
    for (const std::string& w : words) sent.push_back(analyzer.analyze(w));
    auto emissions = tagger::emission(analyzer, sent, tagger_cfg);
    auto decoded = tagger::decode_bidirectional(emissions, tables, precedence);
    for (std::size_t t = 0; t < words.size(); ++t) {
      for (const auto& e : emissions[t]) {
        if (e.tag == decoded.tags[t]) {
          auto pieces =
              vocab::tokenize_word(e.analysis, analyzer.grammar(), vocabs);
          out.insert(out.end(), pieces.begin(), pieces.end());
          break;
        }
      }
    }
  }
  return out;
}

std::string to_parsed_text(const ParsedCorpus& corpus,
                           const morphology::Grammar& grammar) {
  std::ostringstream ss;
  for (const Sentence& sentence : corpus) {
    for (const vocab::WordPiece& w : sentence) {
      ss << w.surface << "\t" << w.stem_text << "\t"
         << grammar.pos_tags()[w.pos_tag_id].name << "\t";
      for (std::size_t i = 0; i < w.affix_ids.size(); ++i) {
        if (i) ss << ",";
        ss << w.affix_ids[i];
      }
      ss << "\t" << format_double(w.score) << "\n";
    }
    ss << "\n";
  }
  return ss.str();
}

ParsedCorpus parse_corpus_text(const std::string& text,
                               const morphology::Grammar& grammar,
                               const vocab::Vocabs& vocabs,
                               const std::string& origin) {
  ParsedCorpus corpus;
  Sentence current;
  std::size_t line_no = 0;
  auto lines = split(text, '\n');
  for (const std::string& line : lines) {
    ++line_no;
    if (line.empty()) {
      if (!current.empty()) {
        corpus.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    auto fields = split(line, '\t');
    if (fields.size() != 5) {
      throw LoadError(origin + ":" + std::to_string(line_no) +
                      ": expected 5 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    vocab::WordPiece w;
    w.surface = fields[0];
    w.stem_text = fields[1];
    w.stem_id = vocabs.stems.id_or_unk(w.stem_text);
    int tag = grammar.pos_tag_index(fields[2]);
    if (tag < 0) {
      throw LoadError(origin + ":" + std::to_string(line_no) +
                      ": unknown pos tag '" + fields[2] + "'");
    }
    w.pos_tag_id = tag;
    w.is_bpe = tag == grammar.fallback_tag();
    if (!fields[3].empty()) {
      for (const std::string& s : split(fields[3], ',')) {
        int id;
        try {
          id = std::stoi(s);
        } catch (const std::exception&) {
          throw LoadError(origin + ":" + std::to_string(line_no) +
                          ": bad affix id '" + s + "'");
        }
        if (id < 0 || id >= static_cast<int>(vocabs.affixes.size())) {
          throw LoadError(origin + ":" + std::to_string(line_no) +
                          ": affix id " + s + " out of inventory");
        }
        w.affix_ids.push_back(id);
      }
    }
    w.affix_set_id =
        vocabs.affix_sets.map(vocab::AffixSetVocab::canonical(w.affix_ids));
    try {
      w.score = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw LoadError(origin + ":" + std::to_string(line_no) +
                      ": bad score '" + fields[4] + "'");
    }
    current.push_back(std::move(w));
  }
  if (!current.empty()) corpus.push_back(std::move(current));
  return corpus;
}

ParsedCorpus load_parsed_corpus(const std::string& path,
                                const morphology::Grammar& grammar,
                                const vocab::Vocabs& vocabs) {
  return parse_corpus_text(read_file(path), grammar, vocabs, path);
}

std::vector<encoder::WordInput> to_word_inputs(const Sentence& sentence) {
  std::vector<encoder::WordInput> out;
  out.reserve(sentence.size());
  for (const vocab::WordPiece& w : sentence) {
    encoder::WordInput in;
    in.stem_id = w.stem_id;
    in.affix_ids = w.affix_ids;
    in.affix_set_id = w.affix_set_id;
    in.pos_tag_id = w.pos_tag_id;
    out.push_back(std::move(in));
  }
  return out;
}

}  // namespace morphlm::pipeline
