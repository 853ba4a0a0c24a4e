#pragma once

#include <string>
#include <vector>

#include "morphlm/encoder/model.hpp"
#include "morphlm/morphology/analyzer.hpp"
#include "morphlm/tagger/tagger.hpp"
#include "morphlm/vocab/vocab.hpp"

namespace morphlm::pipeline {

// Newline plus terminal punctuation sentence splitting over whitespace
// tokens; punctuation runs are peeled off as their own tokens. Text is
// lowercased at ingestion.
std::vector<std::vector<std::string>> split_sentences(const std::string& text);

using Sentence = std::vector<vocab::WordPiece>;
using ParsedCorpus = std::vector<Sentence>;

struct TaggedCorpus {
  // The winning analysis per token after bidirectional decoding.
  std::vector<std::vector<morphology::Analysis>> chosen;
  tagger::TransitionTables tables;
};

// analyze -> estimate transitions over the whole stream -> bidirectional
// decode, fanned out over sentences with an order-preserving merge; output
// is independent of the worker count.
TaggedCorpus tag_corpus(const std::string& raw_text,
                        const morphology::Analyzer& analyzer,
                        const tagger::TaggerConfig& tagger_cfg, int workers);

struct PreprocessResult {
  ParsedCorpus sentences;
  tagger::TransitionTables tables;
};

// tag_corpus plus tokenization into WordPieces.
PreprocessResult preprocess(const std::string& raw_text,
                            const morphology::Analyzer& analyzer,
                            const vocab::Vocabs& vocabs,
                            const tagger::TaggerConfig& tagger_cfg,
                            int workers);

// Single-text helper for task files: tokens of every sentence in the text,
// concatenated. Decodes with the supplied tables.
Sentence preprocess_text(const std::string& text,
                         const morphology::Analyzer& analyzer,
                         const vocab::Vocabs& vocabs,
                         const tagger::TaggerConfig& tagger_cfg,
                         const tagger::TransitionTables& tables);

// Parsed-corpus text format: one token per line,
// surface<TAB>stem<TAB>pos_tag<TAB>affix,ids<TAB>score, a blank line after
// each sentence.
std::string to_parsed_text(const ParsedCorpus& corpus,
                           const morphology::Grammar& grammar);

ParsedCorpus parse_corpus_text(const std::string& text,
                               const morphology::Grammar& grammar,
                               const vocab::Vocabs& vocabs,
                               const std::string& origin);

ParsedCorpus load_parsed_corpus(const std::string& path,
                                const morphology::Grammar& grammar,
                                const vocab::Vocabs& vocabs);

// WordPieces -> encoder inputs (no masking).
std::vector<encoder::WordInput> to_word_inputs(const Sentence& sentence);

}  // namespace morphlm::pipeline
