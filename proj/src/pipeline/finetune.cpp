#include "morphlm/pipeline/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "morphlm/common.hpp"
#include "morphlm/kernel/optim.hpp"
#include "morphlm/kernel/rng.hpp"
#include "morphlm/pipeline/metrics.hpp"

namespace morphlm::pipeline {

using kernel::Tape;
using kernel::Tensor;
using kernel::TensorPtr;

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "classification") return TaskKind::kSentenceClassification;
  if (s == "pair") return TaskKind::kSentencePair;
  if (s == "regression") return TaskKind::kRegression;
  if (s == "labeling") return TaskKind::kSequenceLabeling;
  throw ConfigError("unknown task kind '" + s +
                    "' (classification, pair, regression, labeling)");
}

TaskMetric task_metric_from_string(const std::string& s) {
  if (s == "accuracy") return TaskMetric::kAccuracy;
  if (s == "f1") return TaskMetric::kF1Micro;
  if (s == "pearson") return TaskMetric::kPearson;
  if (s == "spearman") return TaskMetric::kSpearman;
  throw ConfigError("unknown metric '" + s +
                    "' (accuracy, f1, pearson, spearman)");
}

void TaskSpec::validate() const {
  bool ok = false;
  switch (kind) {
    case TaskKind::kSentenceClassification:
    case TaskKind::kSentencePair:
      ok = metric == TaskMetric::kAccuracy || metric == TaskMetric::kF1Micro;
      break;
    case TaskKind::kRegression:
      ok = metric == TaskMetric::kPearson || metric == TaskMetric::kSpearman;
      break;
    case TaskKind::kSequenceLabeling:
      ok = metric == TaskMetric::kF1Micro || metric == TaskMetric::kAccuracy;
      break;
  }
  if (!ok) {
    throw ConfigError("task metric is inconsistent with the task kind");
  }
  if (kind != TaskKind::kRegression && labels.empty()) {
    throw ConfigError("task needs a label inventory");
  }
}

namespace {

struct Head {
  TensorPtr w1, b1, w2, b2;

  std::vector<TensorPtr> all() const { return {w1, b1, w2, b2}; }
};

Head make_head(int hidden, int out, std::uint64_t seed) {
  Head h;
  kernel::Rng rng(derive_seed(seed, "head-init", 0));
  h.w1 = Tensor::zeros({hidden, hidden}, true);
  for (double& x : h.w1->values) x = rng.normal(0.0, 0.02);
  h.b1 = Tensor::zeros({hidden}, true);
  h.w2 = Tensor::zeros({hidden, out}, true);
  for (double& x : h.w2->values) x = rng.normal(0.0, 0.02);
  h.b2 = Tensor::zeros({out}, true);
  return h;
}

TensorPtr head_forward(Tape& tape, const Head& h, const TensorPtr& rows) {
  TensorPtr a = tape.gelu(tape.add_bias(tape.matmul(rows, h.w1), h.b1));
  return tape.add_bias(tape.matmul(a, h.w2), h.b2);
}

}  // namespace

FinetuneResult finetune(encoder::Model& model, const TaskSpec& task,
                        const std::vector<Example>& train,
                        const std::vector<Example>& dev,
                        const FinetuneOptions& opt) {
  task.validate();
  if (train.empty()) throw ValidationError("finetune: empty training set");
  int d2 = model.config().sentence.hidden;
  int out_dim = task.kind == TaskKind::kRegression
                    ? 1
                    : static_cast<int>(task.labels.size());
  Head head = make_head(d2, out_dim, opt.seed);

  kernel::OptimUpdate optim;
  optim.beta1 = opt.beta1;
  optim.beta2 = opt.beta2;
  optim.eps = opt.eps;
  optim.weight_decay = opt.weight_decay;

  std::vector<TensorPtr> trainable;
  for (auto& p : model.parameters()) trainable.push_back(p.tensor);
  for (auto& t : head.all()) trainable.push_back(t);
  std::vector<kernel::MomentState> moments(trainable.size());

  std::int64_t steps_per_epoch =
      (static_cast<std::int64_t>(train.size()) + opt.batch - 1) / opt.batch;
  std::int64_t total_steps = steps_per_epoch * opt.epochs;
  std::int64_t warmup = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(opt.warmup_proportion * total_steps));

  // Forward for a group of examples; returns per-example outputs needed for
  // both the loss and dev predictions.
  auto forward_rows = [&](Tape& tape, const std::vector<const Example*>& batch)
      -> std::pair<TensorPtr, std::vector<std::int64_t>> {
    std::vector<TensorPtr> rows;
    std::vector<std::int64_t> row_labels;
    for (const Example* ex : batch) {
      auto enc = model.encode(tape, to_word_inputs(ex->tokens), nullptr);
      if (task.kind == TaskKind::kSequenceLabeling) {
        for (std::size_t t = 0; t < ex->tokens.size(); ++t) {
          rows.push_back(
              tape.slice_row(enc.hidden, static_cast<std::int64_t>(t) + 1));
          row_labels.push_back(ex->word_labels[t]);
        }
      } else {
        rows.push_back(tape.slice_row(enc.hidden, 0));
        row_labels.push_back(ex->label);
      }
    }
    return {tape.stack_rows(rows), std::move(row_labels)};
  };

  FinetuneResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  std::int64_t step = 0;
  for (std::int64_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    // Deterministic shuffle.
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    kernel::Rng rng(derive_seed(opt.seed, "finetune-shuffle",
                                static_cast<std::uint64_t>(epoch)));
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1],
                order[rng.uniform_int(static_cast<std::int64_t>(k))]);
    }

    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::size_t lo = 0; lo < order.size();
         lo += static_cast<std::size_t>(opt.batch)) {
      std::vector<const Example*> batch;
      for (std::size_t i = lo;
           i < std::min(order.size(), lo + static_cast<std::size_t>(opt.batch));
           ++i) {
        batch.push_back(&train[order[i]]);
      }
      Tape tape;
      auto [rows, row_labels] = forward_rows(tape, batch);
      TensorPtr logits = head_forward(tape, head, rows);
      TensorPtr loss;
      if (task.kind == TaskKind::kRegression) {
        std::vector<double> targets;
        for (const Example* ex : batch) targets.push_back(ex->target);
        loss = tape.mse_loss(logits, targets);
      } else {
        loss = tape.cross_entropy(logits, row_labels);
      }
      if (!std::isfinite(loss->values[0])) {
        throw Error("finetune: non-finite loss at step " +
                    std::to_string(step + 1));
      }
      tape.backward(loss);
      ++step;
      optim.lr =
          kernel::linear_warmup_decay(step, opt.lr, warmup, total_steps + 1);
      for (std::size_t i = 0; i < trainable.size(); ++i) {
        trainable[i]->ensure_grad();
        kernel::adamw_step(*trainable[i], moments[i], optim);
        trainable[i]->zero_grad();
      }
      epoch_loss += loss->values[0];
      batches++;
    }

    // Dev evaluation.
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = batches > 0 ? epoch_loss / batches : 0.0;
    if (!dev.empty()) {
      std::vector<int> pred_labels, gold_labels;
      std::vector<double> pred_values, gold_values;
      for (const Example& ex : dev) {
        Tape tape;
        auto [rows, row_labels] = forward_rows(tape, {&ex});
        TensorPtr logits = head_forward(tape, head, rows);
        if (task.kind == TaskKind::kRegression) {
          pred_values.push_back(logits->values[0]);
          gold_values.push_back(ex.target);
        } else {
          std::int64_t b = logits->shape[0], v = logits->shape[1];
          for (std::int64_t r = 0; r < b; ++r) {
            const double* x = logits->values.data() + r * v;
            int arg = 0;
            for (int c = 1; c < v; ++c) {
              if (x[c] > x[arg]) arg = c;
            }
            pred_labels.push_back(arg);
            gold_labels.push_back(static_cast<int>(row_labels[r]));
          }
        }
      }
      try {
        switch (task.metric) {
          case TaskMetric::kAccuracy:
            em.dev_metric = accuracy(pred_labels, gold_labels);
            break;
          case TaskMetric::kF1Micro:
            em.dev_metric =
                f1_micro(pred_labels, gold_labels, task.outside_label).f1;
            break;
          case TaskMetric::kPearson:
            em.dev_metric = pearson(pred_values, gold_values);
            break;
          case TaskMetric::kSpearman:
            em.dev_metric = spearman(pred_values, gold_values);
            break;
        }
      } catch (const ValidationError& e) {
        em.dev_metric = std::nan("");
        em.metric_error = e.what();
      }
      if (em.metric_error.empty() && em.dev_metric > result.best_metric) {
        result.best_metric = em.dev_metric;
        result.best_epoch = epoch;
      }
    }
    result.epochs.push_back(std::move(em));
  }
  return result;
}

}  // namespace morphlm::pipeline
