#include "morphlm/pretrain/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "morphlm/kernel/optim.hpp"
#include "morphlm/kernel/rng.hpp"

namespace morphlm::pretrain {

namespace fs = std::filesystem;
using kernel::Tape;
using kernel::Tensor;
using kernel::TensorPtr;

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.optimizer = j.value("optimizer", c.optimizer);
  if (c.optimizer != "lamb" && c.optimizer != "adamw") {
    throw ConfigError("training.optimizer must be 'lamb' or 'adamw'");
  }
  c.peak_lr = j.value("peak_lr", c.peak_lr);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("adam_beta1", c.beta1);
  c.beta2 = j.value("adam_beta2", c.beta2);
  c.eps = j.value("adam_eps", c.eps);
  c.batch_sentences = j.value("batch_sentences", c.batch_sentences);
  c.mask_rate = j.value("mask_rate", c.mask_rate);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  if (c.batch_sentences < 1) throw ConfigError("batch_sentences must be >= 1");
  if (c.mask_rate <= 0.0 || c.mask_rate >= 1.0) {
    throw ConfigError("mask_rate must be in (0,1)");
  }
  return c;
}

nlohmann::json TrainingConfig::to_json() const {
  nlohmann::json j;
  j["optimizer"] = optimizer;
  j["peak_lr"] = peak_lr;
  j["warmup_steps"] = warmup_steps;
  j["max_steps"] = max_steps;
  j["weight_decay"] = weight_decay;
  j["adam_beta1"] = beta1;
  j["adam_beta2"] = beta2;
  j["adam_eps"] = eps;
  j["batch_sentences"] = batch_sentences;
  j["mask_rate"] = mask_rate;
  j["checkpoint_every"] = checkpoint_every;
  j["eval_every"] = eval_every;
  j["seed"] = seed;
  return j;
}

LossBundle pretrain_loss(Tape& tape, const encoder::Model& model,
                         const MaskedBatch& batch,
                         encoder::DropoutStream* drop) {
  using encoder::Variant;
  const Variant variant = model.config().variant;
  std::vector<TensorPtr> slot_rows;
  std::vector<std::int64_t> stem_targets;
  std::vector<TensorPtr> affix_rows;        // ADR/AVG: m >= 1 slots only
  std::vector<std::vector<double>> affix_targets;
  std::vector<std::int64_t> set_targets;    // ASC: all selected slots

  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    const auto& plans = batch.plan.tokens[s];
    bool any = std::any_of(plans.begin(), plans.end(),
                           [](const TokenPlan& p) { return p.selected; });
    if (!any) continue;
    encoder::EncodedSentence enc = model.encode(tape, batch.inputs[s], drop);
    for (std::size_t t = 0; t < plans.size(); ++t) {
      if (!plans[t].selected) continue;
      TensorPtr row = tape.slice_row(enc.hidden, static_cast<std::int64_t>(t) + 1);
      slot_rows.push_back(row);
      stem_targets.push_back(plans[t].original_stem_id);
      if (variant == Variant::kAdr || variant == Variant::kAvg) {
        if (!plans[t].original_affix_ids.empty()) {
          affix_rows.push_back(row);
          affix_targets.push_back(adr_target(plans[t].original_affix_ids,
                                             model.vocab_sizes().affixes));
        }
      } else if (variant == Variant::kAsc) {
        set_targets.push_back(plans[t].original_affix_set_id);
      }
    }
  }
  if (slot_rows.empty()) {
    throw ValidationError("pretrain_loss: masking plan selected no tokens");
  }

  LossBundle out;
  out.slots = slot_rows.size();

  TensorPtr rows = tape.stack_rows(slot_rows);
  TensorPtr stem_logits = model.stem_logits(tape, rows);
  TensorPtr stem_ce = tape.cross_entropy(stem_logits, stem_targets);
  out.stem_loss = stem_ce->values[0];
  // Batch masked-stem accuracy from the same logits.
  std::int64_t v = stem_logits->shape[1];
  std::size_t correct = 0;
  for (std::size_t r = 0; r < stem_targets.size(); ++r) {
    const double* x = stem_logits->values.data() + r * v;
    std::int64_t arg = 0;
    for (std::int64_t c = 1; c < v; ++c) {
      if (x[c] > x[arg]) arg = c;
    }
    if (arg == stem_targets[r]) correct++;
  }
  out.masked_stem_accuracy =
      static_cast<double>(correct) / static_cast<double>(stem_targets.size());

  TensorPtr total = stem_ce;
  if (variant == Variant::kAdr || variant == Variant::kAvg) {
    if (!affix_rows.empty()) {
      TensorPtr arows = tape.stack_rows(affix_rows);
      TensorPtr logits = model.affix_logits(tape, arows);
      TensorPtr logp = tape.log_softmax(logits);
      std::vector<double> flat;
      flat.reserve(affix_targets.size() * model.vocab_sizes().affixes);
      for (const auto& row : affix_targets) {
        flat.insert(flat.end(), row.begin(), row.end());
      }
      TensorPtr target = Tensor::from(
          {static_cast<std::int64_t>(affix_targets.size()),
           model.vocab_sizes().affixes},
          std::move(flat));
      TensorPtr kl = tape.kl_divergence(target, logp);
      out.affix_loss = kl->values[0];
      total = tape.add(total, kl);
    }
  } else if (variant == Variant::kAsc) {
    TensorPtr logits = model.affix_set_logits(tape, rows);
    TensorPtr ce = tape.cross_entropy(logits, set_targets);
    out.affix_loss = ce->values[0];
    total = tape.add(total, ce);
  }
  out.total = total;
  return out;
}

double evaluate_masked_accuracy(
    const encoder::Model& model,
    const std::vector<std::vector<vocab::WordPiece>>& corpus,
    const MaskingIds& ids, const MaskingRates& rates, std::uint64_t seed) {
  MaskedBatch masked = apply_masking(corpus, ids, rates, seed);
  if (masked.plan.selected_count() == 0) return 0.0;
  Tape tape;
  LossBundle b = pretrain_loss(tape, model, masked, nullptr);
  return b.masked_stem_accuracy;
}

namespace {

std::string dump_batch(const MaskedBatch& batch) {
  std::ostringstream ss;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    ss << "sentence " << s << ":";
    for (const auto& w : batch.inputs[s]) {
      ss << " stem=" << w.stem_id << "/pos=" << w.pos_tag_id
         << "/set=" << w.affix_set_id << "/affixes=";
      for (std::size_t i = 0; i < w.affix_ids.size(); ++i) {
        if (i) ss << ",";
        ss << w.affix_ids[i];
      }
    }
    ss << "\n";
  }
  return ss.str();
}

}  // namespace

TrainResult train(encoder::Model& model,
                  const std::vector<std::vector<vocab::WordPiece>>& corpus,
                  const TrainingConfig& tc, std::int64_t steps,
                  const std::string& out_dir, const MaskingIds& ids) {
  if (corpus.empty()) throw ValidationError("train: empty corpus");
  fs::create_directories(out_dir);

  MaskingRates rates;
  rates.select = tc.mask_rate;

  kernel::OptimUpdate optim;
  optim.beta1 = tc.beta1;
  optim.beta2 = tc.beta2;
  optim.eps = tc.eps;
  optim.weight_decay = tc.weight_decay;
  std::vector<kernel::MomentState> moments(model.parameters().size());

  // Epoch-shuffled sentence order, refilled deterministically.
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::int64_t epoch = 0;
  auto next_batch = [&]() {
    std::vector<std::vector<vocab::WordPiece>> batch;
    for (std::int64_t i = 0; i < tc.batch_sentences; ++i) {
      if (cursor >= order.size()) {
        order.resize(corpus.size());
        std::iota(order.begin(), order.end(), 0);
        kernel::Rng rng(derive_seed(tc.seed, "epoch-shuffle",
                                    static_cast<std::uint64_t>(epoch++)));
        for (std::size_t k = order.size(); k > 1; --k) {
          std::swap(order[k - 1], order[rng.uniform_int(
                                      static_cast<std::int64_t>(k))]);
        }
        cursor = 0;
      }
      batch.push_back(corpus[order[cursor++]]);
    }
    return batch;
  };

  TrainResult res;
  for (std::int64_t step = 1; step <= steps; ++step) {
    auto batch = next_batch();
    MaskedBatch masked;
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 100) {
        throw Error("train: could not select any token for masking");
      }
      masked = apply_masking(
          batch, ids, rates,
          derive_seed(tc.seed, "mask",
                      static_cast<std::uint64_t>(step) * 101 + attempt));
      if (masked.plan.selected_count() > 0) break;
    }

    Tape tape;
    encoder::DropoutStream drop{derive_seed(tc.seed, "step-dropout",
                                            static_cast<std::uint64_t>(step)),
                                0};
    encoder::DropoutStream* dp =
        (model.config().dropout > 0.0 || model.config().attention_dropout > 0.0)
            ? &drop
            : nullptr;
    LossBundle loss = pretrain_loss(tape, model, masked, dp);
    if (!std::isfinite(loss.total->values[0])) {
      std::string dump_path =
          (fs::path(out_dir) / ("diagnostic_step_" + std::to_string(step) +
                                ".txt"))
              .string();
      write_file(dump_path, dump_batch(masked));
      throw Error("train: non-finite loss at step " + std::to_string(step) +
                  "; offending batch dumped to " + dump_path);
    }
    tape.backward(loss.total);
    double lr = kernel::linear_warmup_decay(step, tc.peak_lr, tc.warmup_steps,
                                            tc.max_steps);
    optim.lr = lr;
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].tensor->ensure_grad();
      if (tc.optimizer == "lamb") {
        kernel::lamb_step(*params[i].tensor, moments[i], optim);
      } else {
        kernel::adamw_step(*params[i].tensor, moments[i], optim);
      }
    }
    model.zero_grads();

    res.log.push_back({step, loss.total->values[0], loss.stem_loss,
                       loss.affix_loss, lr, loss.masked_stem_accuracy});

    bool eval_now = tc.eval_every > 0 && step % tc.eval_every == 0;
    if (eval_now || step == steps) {
      // Evaluation always uses the standard masking rates, whatever the
      // training mask_rate is set to.
      double acc = evaluate_masked_accuracy(
          model, corpus, ids, MaskingRates{},
          derive_seed(tc.seed, "eval-mask", 0));
      if (acc > res.best_masked_stem_accuracy) {
        res.best_masked_stem_accuracy = acc;
        res.best_accuracy_step = step;
      }
      if (step == steps) res.final_masked_stem_accuracy = acc;
    }
    if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 &&
        step != steps) {
      model.save((fs::path(out_dir) /
                  ("checkpoint_step" + std::to_string(step) + ".bin"))
                     .string());
    }
  }

  res.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
  model.save(res.checkpoint_path);

  std::ostringstream csv;
  csv << "step,total,stem_loss,affix_loss,lr\n";
  for (const auto& row : res.log) {
    csv << row.step << "," << format_double(row.total) << ","
        << format_double(row.stem) << "," << format_double(row.affix) << ","
        << format_double(row.lr) << "\n";
  }
  res.loss_log_path = (fs::path(out_dir) / "loss_log.csv").string();
  write_file(res.loss_log_path, csv.str());
  return res;
}

}  // namespace morphlm::pretrain
