#pragma once

#include <cstdint>
#include <vector>

#include "morphlm/encoder/model.hpp"
#include "morphlm/vocab/vocab.hpp"

namespace morphlm::pretrain {

enum class MaskAction { kMask, kRandom, kKeep };

struct TokenPlan {
  bool selected = false;
  MaskAction action = MaskAction::kKeep;
  bool affixes_omitted = false;
  // Prediction targets, recorded before any replacement.
  int original_stem_id = -1;
  std::vector<int> original_affix_ids;
  int original_affix_set_id = -1;
};

struct MaskingPlan {
  std::uint64_t seed = 0;
  std::vector<std::vector<TokenPlan>> tokens;  // [sentence][token]

  std::size_t selected_count() const;
};

struct MaskingRates {
  double select = 0.15;  // tokens considered for prediction
  double mask = 0.80;    // of selected: replaced with [MASK]
  double random = 0.10;  // of selected: replaced with a random stem
  double omit_affixes = 0.70;  // of MASK/RANDOM: affix units dropped
};

// Vocabulary ids the masking transform needs.
struct MaskingIds {
  int stem_mask = vocab::StemVocab::kMask;
  int stem_random_lo = vocab::StemVocab::kNumSpecials;
  int stem_random_hi = 0;  // exclusive
  int pos_mask = -1;
  int affix_set_mask = -1;
};

struct MaskedBatch {
  std::vector<std::vector<encoder::WordInput>> inputs;
  MaskingPlan plan;
};

// The masked-morphology transform: selected tokens have their stem replaced
// per action; on MASK/RANDOM the POS-role and affix-set units are masked and
// all affix units are dropped with probability omit_affixes. KEEP leaves
// every unit in place. Deterministic in the seed.
MaskedBatch apply_masking(
    const std::vector<std::vector<vocab::WordPiece>>& batch,
    const MaskingIds& ids, const MaskingRates& rates, std::uint64_t seed);

// Target affix distribution: 1/m at each of the word's m affix indices.
// All-zero (m = 0) rows are excluded from the loss by the caller.
std::vector<double> adr_target(const std::vector<int>& affix_ids,
                               std::int64_t n_affixes);

}  // namespace morphlm::pretrain
