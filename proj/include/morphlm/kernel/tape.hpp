#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "morphlm/kernel/tensor.hpp"

namespace morphlm::kernel {

// Reverse-mode autodiff tape. Ops execute eagerly and append their backward
// rule; records are replayed in reverse by backward(). Execution order is the
// topological order, so a tape is valid for exactly the chain it recorded.
// A tape is confined to one thread.
class Tape {
 public:
  // y = a + b (same shape)
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  // y = mat + bias broadcast over rows; mat [n,d], bias [d]
  TensorPtr add_bias(const TensorPtr& mat, const TensorPtr& bias);
  // y = a * b elementwise (same shape)
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  // y = c * a
  TensorPtr scale(const TensorPtr& a, double c);
  // y[m,n] = a[m,k] b[k,n]
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  // y[n,m] = a[m,n]^T
  TensorPtr transpose(const TensorPtr& a);
  // y[n,len] = a[n, start:start+len]
  TensorPtr slice_cols(const TensorPtr& a, std::int64_t start,
                       std::int64_t len);
  // y[1,d] = a[i, :]
  TensorPtr slice_row(const TensorPtr& a, std::int64_t i);
  // y[len,d] = a[start:start+len, :]
  TensorPtr slice_rows(const TensorPtr& a, std::int64_t start,
                       std::int64_t len);
  // y[n, Σdi]: column-wise concat of same-row-count blocks
  TensorPtr concat_cols(const std::vector<TensorPtr>& blocks);
  // y[Σni, d]: vertical concat of [ni,d] blocks
  TensorPtr stack_rows(const std::vector<TensorPtr>& rows);
  // y[1,d] = mean over rows of a[n,d]
  TensorPtr mean_rows(const TensorPtr& a);
  // y[1] = Σ a
  TensorPtr sum(const TensorPtr& a);
  // Stable softmax along `axis` (negative counts from the end).
  TensorPtr softmax(const TensorPtr& a, int axis = -1);
  // Stable log-softmax along the last axis.
  TensorPtr log_softmax(const TensorPtr& a);
  // Per-row standardization over the last axis, then affine gain/bias [d].
  TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                       const TensorPtr& bias, double eps = 1e-5);
  // Exact (erf-based) GELU.
  TensorPtr gelu(const TensorPtr& x);
  // Inverted dropout with an explicit seed; p == 0 is an exact identity.
  TensorPtr dropout(const TensorPtr& x, double p, std::uint64_t seed);
  // y[n,d] = table[ids, :]; gradient scatter-adds into table.
  TensorPtr embedding_lookup(const TensorPtr& table,
                             const std::vector<std::int64_t>& ids);
  // y[r,c] = scores[r,c] + bias[idx[r,c]]; idx is row-major, values < len(bias).
  TensorPtr add_indexed_bias(const TensorPtr& scores, const TensorPtr& bias,
                             const std::vector<std::int32_t>& idx);
  // Overrides row 0 with theta[0] and column 0 with theta[1] of a square
  // matrix; the interior passes through. Used for the untied CLS treatment.
  TensorPtr cls_overlay(const TensorPtr& square, const TensorPtr& theta);
  // Mean negative log-softmax probability of targets; logits [b,V].
  TensorPtr cross_entropy(const TensorPtr& logits,
                          const std::vector<std::int64_t>& targets);
  // Mean over rows of Σ_i t_i (ln t_i − lp_i); target rows must sum to 1.
  TensorPtr kl_divergence(const TensorPtr& target,
                          const TensorPtr& log_probs);
  // Mean squared error against constants; pred [b] or [b,1].
  TensorPtr mse_loss(const TensorPtr& pred, const std::vector<double>& targets);

  // Populates grad on every requires_grad tensor reachable from loss.
  void backward(const TensorPtr& loss);

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  struct Record {
    std::function<void()> backward;
  };
  std::vector<Record> records_;

  TensorPtr make_output(std::vector<std::int64_t> shape,
                        std::initializer_list<const TensorPtr*> inputs);
  void record(std::function<void()> fn) { records_.push_back({std::move(fn)}); }
};

}  // namespace morphlm::kernel
