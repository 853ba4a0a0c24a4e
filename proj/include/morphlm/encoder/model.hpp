#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "morphlm/common.hpp"
#include "morphlm/encoder/config.hpp"
#include "morphlm/kernel/tape.hpp"

namespace morphlm::encoder {

// Sequential per-call dropout seeds; pass nullptr to run without dropout.
struct DropoutStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;
  std::uint64_t next() { return derive_seed(seed, "dropout", counter++); }
};

// Resolved ids for one sentence-level unit (a word or a BPE piece).
struct WordInput {
  int stem_id = -1;
  std::vector<int> affix_ids;  // tier-1 affix units, surface order
  int affix_set_id = -1;
  int pos_tag_id = -1;
};

struct Parameter {
  std::string name;
  kernel::TensorPtr tensor;
};

struct EncodedSentence {
  kernel::TensorPtr hidden;  // [words+1, sentence.hidden]; row 0 is CLS
};

// The two-tier encoder: a per-word morphology encoder without positional
// information feeding a sentence encoder with untied relative positional
// bias, plus the tied pretraining heads.
class Model {
 public:
  Model(ModelConfig cfg, VocabSizes vocabs, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const VocabSizes& vocab_sizes() const { return vocabs_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const kernel::TensorPtr& param(const std::string& name) const;

  // Mask rows appended to the POS and affix-set embedding tables.
  int pos_mask_id() const { return static_cast<int>(vocabs_.pos_tags); }
  int affix_set_mask_id() const {
    return static_cast<int>(vocabs_.affix_sets);
  }

  // Tier 1 on one word: the four designated feature rows [1, morpho.hidden].
  // Affix units participate in attention but only the designated outputs are
  // returned (the AVG variant returns their mean as the third feature).
  std::vector<kernel::TensorPtr> encode_morphology(kernel::Tape& tape,
                                                   const WordInput& word,
                                                   DropoutStream* drop) const;

  // Concatenation [f0||f1||f2||f3||stem_embed] -> [1, sentence.hidden].
  kernel::TensorPtr assemble_word_vector(
      kernel::Tape& tape, const std::vector<kernel::TensorPtr>& features,
      const kernel::TensorPtr& stem_embed) const;

  // Full two-tier forward over a sentence.
  EncodedSentence encode(kernel::Tape& tape,
                         const std::vector<WordInput>& words,
                         DropoutStream* drop) const;

  // Prediction heads over stacked slot rows [b, sentence.hidden]. Output
  // projections are tied to the corresponding embedding tables.
  kernel::TensorPtr stem_logits(kernel::Tape& tape,
                                const kernel::TensorPtr& rows) const;
  kernel::TensorPtr affix_logits(kernel::Tape& tape,
                                 const kernel::TensorPtr& rows) const;
  kernel::TensorPtr affix_set_logits(kernel::Tape& tape,
                                     const kernel::TensorPtr& rows) const;

  std::int64_t param_count() const;
  static std::int64_t param_count(const ModelConfig& cfg,
                                  const VocabSizes& vocabs);

  void save(const std::string& path) const;
  static Model load(const std::string& path);

  // Normalized positional attention bias of one layer, one matrix per head,
  // over word slots 1..length.
  std::vector<std::vector<double>> export_positional_bias(int length,
                                                          int layer) const;

  void zero_grads();

 private:
  kernel::TensorPtr encoder_layer(kernel::Tape& tape, kernel::TensorPtr x,
                                  const std::string& prefix, int heads,
                                  int head_size,
                                  const std::vector<kernel::TensorPtr>& pos,
                                  DropoutStream* drop) const;
  kernel::TensorPtr head_transform(kernel::Tape& tape,
                                   const kernel::TensorPtr& rows,
                                   const std::string& prefix) const;
  std::vector<std::int32_t> bucket_matrix(std::int64_t len) const;

  ModelConfig cfg_;
  VocabSizes vocabs_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// T5-style symmetric log-spaced distance bucketing.
int relative_bucket(std::int64_t relative_position, int num_buckets,
                    int max_distance);

}  // namespace morphlm::encoder
