#include "morphlm/pretrain/masking.hpp"

#include <algorithm>

#include "morphlm/common.hpp"
#include "morphlm/kernel/rng.hpp"

namespace morphlm::pretrain {

std::size_t MaskingPlan::selected_count() const {
  std::size_t n = 0;
  for (const auto& sent : tokens) {
    for (const auto& t : sent) n += t.selected ? 1 : 0;
  }
  return n;
}

MaskedBatch apply_masking(
    const std::vector<std::vector<vocab::WordPiece>>& batch,
    const MaskingIds& ids, const MaskingRates& rates, std::uint64_t seed) {
  if (ids.pos_mask < 0 || ids.affix_set_mask < 0 ||
      ids.stem_random_hi <= ids.stem_random_lo) {
    throw ValidationError("apply_masking: incomplete masking ids");
  }
  kernel::Rng rng(seed);
  MaskedBatch out;
  out.plan.seed = seed;
  out.inputs.reserve(batch.size());
  out.plan.tokens.reserve(batch.size());

  for (const auto& sentence : batch) {
    std::vector<encoder::WordInput> inputs;
    std::vector<TokenPlan> plans;
    inputs.reserve(sentence.size());
    plans.reserve(sentence.size());
    for (const vocab::WordPiece& w : sentence) {
      encoder::WordInput in;
      in.stem_id = w.stem_id;
      in.affix_ids = w.affix_ids;
      in.affix_set_id = w.affix_set_id;
      in.pos_tag_id = w.pos_tag_id;

      TokenPlan plan;
      plan.original_stem_id = w.stem_id;
      plan.original_affix_ids = w.affix_ids;
      plan.original_affix_set_id = w.affix_set_id;

      if (rng.uniform() < rates.select) {
        plan.selected = true;
        double action_roll = rng.uniform();
        if (action_roll < rates.mask) {
          plan.action = MaskAction::kMask;
        } else if (action_roll < rates.mask + rates.random) {
          plan.action = MaskAction::kRandom;
        } else {
          plan.action = MaskAction::kKeep;
        }
        if (plan.action != MaskAction::kKeep) {
          if (plan.action == MaskAction::kMask) {
            in.stem_id = ids.stem_mask;
          } else {
            in.stem_id = static_cast<int>(
                ids.stem_random_lo +
                rng.uniform_int(ids.stem_random_hi - ids.stem_random_lo));
          }
          in.pos_tag_id = ids.pos_mask;
          in.affix_set_id = ids.affix_set_mask;
          if (rng.uniform() < rates.omit_affixes) {
            plan.affixes_omitted = true;
            in.affix_ids.clear();
          }
        }
      }
      inputs.push_back(std::move(in));
      plans.push_back(std::move(plan));
    }
    out.inputs.push_back(std::move(inputs));
    out.plan.tokens.push_back(std::move(plans));
  }
  return out;
}

std::vector<double> adr_target(const std::vector<int>& affix_ids,
                               std::int64_t n_affixes) {
  std::vector<double> target(n_affixes, 0.0);
  if (affix_ids.empty()) return target;
  std::vector<int> sorted = affix_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("adr_target: duplicate affix id");
  }
  double p = 1.0 / static_cast<double>(affix_ids.size());
  for (int a : affix_ids) {
    if (a < 0 || a >= n_affixes) {
      throw IndexError("adr_target: affix id " + std::to_string(a) +
                       " out of inventory of " + std::to_string(n_affixes));
    }
    target[a] = p;
  }
  return target;
}

}  // namespace morphlm::pretrain
