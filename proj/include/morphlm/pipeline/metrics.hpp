#pragma once

#include <vector>

namespace morphlm::pipeline {

double accuracy(const std::vector<int>& pred, const std::vector<int>& gold);

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Token-level micro-averaged F1 over entity labels; `outside_label` (pass -1
// for none) is excluded from both precision and recall.
F1Result f1_micro(const std::vector<int>& pred, const std::vector<int>& gold,
                  int outside_label);

// Throws ValidationError when either side has zero variance (undefined).
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Pearson on average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace morphlm::pipeline
