#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace morphlm::encoder {

// Morphology-input / prediction-head variants:
//   kAsc      - two POS-tag units plus an affix-set unit; affix-set head
//   kAdr      - three POS-tag units; affix-distribution head
//   kAvg      - two POS-tag units, third feature = mean of affix outputs;
//               affix-distribution head
//   kStemOnly - no morphology encoder, stem embeddings only; stem head only
enum class Variant { kAsc, kAdr, kAvg, kStemOnly };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

struct TierConfig {
  int layers = 0;
  int heads = 0;
  int hidden = 0;
  int head_size = 0;
  int ffn = 0;
  int embed_dim = 0;  // morph_embed_dim / stem_embed_dim
};

struct VocabSizes {
  std::int64_t stems = 0;
  std::int64_t affix_sets = 0;
  std::int64_t affixes = 0;
  std::int64_t pos_tags = 0;
};

struct ModelConfig {
  Variant variant = Variant::kAsc;
  TierConfig morpho;
  TierConfig sentence;
  int max_positions = 512;
  int relative_bias_buckets = 32;
  int max_affixes = 12;
  double dropout = 0.1;
  double attention_dropout = 0.1;
  double init_std = 0.02;

  int feature_slots() const { return variant == Variant::kStemOnly ? 0 : 4; }

  // Throws ConfigError on any violated structural constraint, in particular
  // feature_slots * morpho.hidden + stem_embed_dim == sentence.hidden.
  void validate() const;

  static ModelConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

VocabSizes vocab_sizes_from_json(const nlohmann::json& j);
nlohmann::json vocab_sizes_to_json(const VocabSizes& v);

}  // namespace morphlm::encoder
