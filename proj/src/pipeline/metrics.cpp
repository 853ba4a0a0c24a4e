#include "morphlm/pipeline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "morphlm/common.hpp"

namespace morphlm::pipeline {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string(what) + ": length mismatch (" +
                          std::to_string(a) + " vs " + std::to_string(b) +
                          ")");
  }
  if (a == 0) {
    throw ValidationError(std::string(what) + ": empty input");
  }
}

}  // namespace

double accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
  check_aligned(pred.size(), gold.size(), "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == gold[i]) correct++;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

F1Result f1_micro(const std::vector<int>& pred, const std::vector<int>& gold,
                  int outside_label) {
  check_aligned(pred.size(), gold.size(), "f1_micro");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p_ent = pred[i] != outside_label;
    bool g_ent = gold[i] != outside_label;
    if (p_ent && g_ent && pred[i] == gold[i]) {
      tp++;
    } else {
      if (p_ent) fp++;
      if (g_ent) fn++;
    }
  }
  F1Result r;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  check_aligned(x.size(), y.size(), "pearson");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw ValidationError(
        "pearson: undefined for an input with zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) j++;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_aligned(x.size(), y.size(), "spearman");
  return pearson(average_ranks(x), average_ranks(y));
}

}  // namespace morphlm::pipeline
