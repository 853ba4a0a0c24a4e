#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "morphlm/encoder/model.hpp"
#include "morphlm/pretrain/masking.hpp"

namespace morphlm::pretrain {

struct TrainingConfig {
  std::string optimizer = "lamb";  // "lamb" or "adamw"
  double peak_lr = 4e-4;
  std::int64_t warmup_steps = 2000;
  std::int64_t max_steps = 200000;
  double weight_decay = 0.01;
  double beta1 = 0.90;
  double beta2 = 0.98;
  double eps = 1e-6;
  std::int64_t batch_sentences = 2560;
  double mask_rate = 0.15;
  std::int64_t checkpoint_every = 1000;
  std::int64_t eval_every = 25;
  std::uint64_t seed = 42;

  static TrainingConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct LossBundle {
  kernel::TensorPtr total;  // scalar, on the tape
  double stem_loss = 0.0;
  double affix_loss = 0.0;
  std::size_t slots = 0;
  double masked_stem_accuracy = 0.0;
};

// Stem cross-entropy at every selected slot plus the variant's affix term:
// KL against the 1/m affix distribution (ADR/AVG), cross-entropy over the
// affix-set vocabulary (ASC), or nothing (STEM_ONLY). Terms sum unweighted.
LossBundle pretrain_loss(kernel::Tape& tape, const encoder::Model& model,
                         const MaskedBatch& batch,
                         encoder::DropoutStream* drop);

struct StepLog {
  std::int64_t step = 0;
  double total = 0.0;
  double stem = 0.0;
  double affix = 0.0;
  double lr = 0.0;
  double batch_stem_accuracy = 0.0;
};

struct TrainResult {
  std::vector<StepLog> log;
  double final_masked_stem_accuracy = 0.0;
  double best_masked_stem_accuracy = 0.0;
  std::int64_t best_accuracy_step = -1;
  std::string checkpoint_path;
  std::string loss_log_path;
};

// Deterministic single-worker training loop: epoch-shuffled batches, linear
// warmup/decay schedule, LAMB or AdamW updates, CSV loss log and periodic
// checkpoints under out_dir. Aborts with a diagnostic dump on non-finite
// loss.
TrainResult train(encoder::Model& model,
                  const std::vector<std::vector<vocab::WordPiece>>& corpus,
                  const TrainingConfig& tc, std::int64_t steps,
                  const std::string& out_dir, const MaskingIds& ids);

// Masked-stem prediction accuracy under a fixed evaluation masking.
double evaluate_masked_accuracy(
    const encoder::Model& model,
    const std::vector<std::vector<vocab::WordPiece>>& corpus,
    const MaskingIds& ids, const MaskingRates& rates, std::uint64_t seed);

}  // namespace morphlm::pretrain
