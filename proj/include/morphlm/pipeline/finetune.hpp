#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morphlm/encoder/model.hpp"
#include "morphlm/pipeline/corpus.hpp"

namespace morphlm::pipeline {

enum class TaskKind {
  kSentenceClassification,
  kSentencePair,
  kRegression,
  kSequenceLabeling,
};

enum class TaskMetric { kAccuracy, kF1Micro, kPearson, kSpearman };

TaskKind task_kind_from_string(const std::string& s);
TaskMetric task_metric_from_string(const std::string& s);

struct TaskSpec {
  TaskKind kind = TaskKind::kSentenceClassification;
  TaskMetric metric = TaskMetric::kAccuracy;
  std::vector<std::string> labels;  // classification / labeling inventory
  int outside_label = -1;           // labeling: index of the "O" label

  void validate() const;  // metric must be consistent with the kind
};

struct Example {
  Sentence tokens;               // pair tasks: a ++ [SEP] ++ b
  int label = -1;                // classification
  double target = 0.0;           // regression
  std::vector<int> word_labels;  // labeling, aligned with tokens
};

struct FinetuneOptions {
  std::int64_t epochs = 15;
  double lr = 1e-4;
  std::int64_t batch = 16;
  double warmup_proportion = 0.06;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  std::uint64_t seed = 42;
};

struct EpochMetrics {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
  std::string metric_error;  // non-empty when the metric was undefined
};

struct FinetuneResult {
  std::vector<EpochMetrics> epochs;
  double best_metric = 0.0;
  std::int64_t best_epoch = -1;
};

// AdamW fine-tuning of the whole model plus a fresh two-layer feed-forward
// head: on the CLS state for sentence-level tasks, on per-word states for
// sequence labeling. Reports the dev metric after every epoch.
FinetuneResult finetune(encoder::Model& model, const TaskSpec& task,
                        const std::vector<Example>& train,
                        const std::vector<Example>& dev,
                        const FinetuneOptions& opt);

}  // namespace morphlm::pipeline
