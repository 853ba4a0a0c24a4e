#include "morphlm/kernel/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morphlm/common.hpp"
#include "morphlm/kernel/rng.hpp"

namespace morphlm::kernel {

namespace {

void check_same_shape(const TensorPtr& a, const TensorPtr& b,
                      const char* op) {
  if (a->shape != b->shape) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a->shape) +
                     " and " + shape_str(b->shape) + " differ");
  }
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

TensorPtr Tape::make_output(std::vector<std::int64_t> shape,
                            std::initializer_list<const TensorPtr*> inputs) {
  auto out = Tensor::zeros(std::move(shape));
  for (const TensorPtr* in : inputs) {
    if ((*in)->requires_grad) out->requires_grad = true;
  }
  return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  auto out = make_output(a->shape, {&a, &b});
  for (std::size_t i = 0; i < a->values.size(); ++i) {
    out->values[i] = a->values[i] + b->values[i];
  }
  if (out->requires_grad) {
    record([a, b, out]() {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->grad.size(); ++i)
          a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->grad.size(); ++i)
          b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr Tape::add_bias(const TensorPtr& mat, const TensorPtr& bias) {
  if (mat->shape.size() != 2 || bias->shape.size() != 1 ||
      mat->shape[1] != bias->shape[0]) {
    throw ShapeError("add_bias: shapes " + shape_str(mat->shape) + " and " +
                     shape_str(bias->shape) + " are incompatible");
  }
  std::int64_t n = mat->shape[0], d = mat->shape[1];
  auto out = make_output(mat->shape, {&mat, &bias});
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < d; ++c) {
      out->values[r * d + c] = mat->values[r * d + c] + bias->values[c];
    }
  }
  if (out->requires_grad) {
    record([mat, bias, out, n, d]() {
      if (out->grad.empty()) return;
      if (mat->requires_grad) {
        mat->ensure_grad();
        for (std::size_t i = 0; i < mat->grad.size(); ++i)
          mat->grad[i] += out->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (std::int64_t r = 0; r < n; ++r)
          for (std::int64_t c = 0; c < d; ++c)
            bias->grad[c] += out->grad[r * d + c];
      }
    });
  }
  return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "mul");
  auto out = make_output(a->shape, {&a, &b});
  for (std::size_t i = 0; i < a->values.size(); ++i) {
    out->values[i] = a->values[i] * b->values[i];
  }
  if (out->requires_grad) {
    record([a, b, out]() {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->grad.size(); ++i)
          a->grad[i] += out->grad[i] * b->values[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->grad.size(); ++i)
          b->grad[i] += out->grad[i] * a->values[i];
      }
    });
  }
  return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double c) {
  auto out = make_output(a->shape, {&a});
  for (std::size_t i = 0; i < a->values.size(); ++i) {
    out->values[i] = c * a->values[i];
  }
  if (out->requires_grad) {
    record([a, out, c]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->grad.size(); ++i)
        a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 ||
      a->shape[1] != b->shape[0]) {
    throw ShapeError("matmul: inner extents of " + shape_str(a->shape) +
                     " and " + shape_str(b->shape) + " do not match");
  }
  std::int64_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = make_output({m, n}, {&a, &b});
  const double* A = a->values.data();
  const double* B = b->values.data();
  double* C = out->values.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      double av = A[i * k + p];
      const double* Brow = B + p * n;
      double* Crow = C + i * n;
      for (std::int64_t j = 0; j < n; ++j) Crow[j] += av * Brow[j];
    }
  }
  if (out->requires_grad) {
    record([a, b, out, m, k, n]() {
      if (out->grad.empty()) return;
      const double* G = out->grad.data();
      if (a->requires_grad) {
        a->ensure_grad();
        double* dA = a->grad.data();
        const double* B = b->values.data();
        // dA[i,p] += Σ_j G[i,j] B[p,j]
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* Grow = G + i * n;
            const double* Brow = B + p * n;
            for (std::int64_t j = 0; j < n; ++j) acc += Grow[j] * Brow[j];
            dA[i * k + p] += acc;
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        double* dB = b->grad.data();
        const double* A = a->values.data();
        // dB[p,j] += Σ_i A[i,p] G[i,j]
        for (std::int64_t i = 0; i < m; ++i) {
          const double* Grow = G + i * n;
          for (std::int64_t p = 0; p < k; ++p) {
            double av = A[i * k + p];
            double* dBrow = dB + p * n;
            for (std::int64_t j = 0; j < n; ++j) dBrow[j] += av * Grow[j];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Tape::transpose(const TensorPtr& a) {
  if (a->shape.size() != 2) {
    throw ShapeError("transpose: expected 2-D tensor, got " +
                     shape_str(a->shape));
  }
  std::int64_t m = a->shape[0], n = a->shape[1];
  auto out = make_output({n, m}, {&a});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out->values[j * m + i] = a->values[i * n + j];
  if (out->requires_grad) {
    record([a, out, m, n]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
          a->grad[i * n + j] += out->grad[j * m + i];
    });
  }
  return out;
}

TensorPtr Tape::slice_cols(const TensorPtr& a, std::int64_t start,
                           std::int64_t len) {
  if (a->shape.size() != 2) {
    throw ShapeError("slice_cols: expected 2-D tensor");
  }
  std::int64_t n = a->shape[0], d = a->shape[1];
  if (start < 0 || len <= 0 || start + len > d) {
    throw IndexError("slice_cols: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of " +
                     std::to_string(d) + " columns");
  }
  auto out = make_output({n, len}, {&a});
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t c = 0; c < len; ++c)
      out->values[r * len + c] = a->values[r * d + start + c];
  if (out->requires_grad) {
    record([a, out, n, d, start, len]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < len; ++c)
          a->grad[r * d + start + c] += out->grad[r * len + c];
    });
  }
  return out;
}

TensorPtr Tape::slice_row(const TensorPtr& a, std::int64_t i) {
  if (a->shape.size() != 2) throw ShapeError("slice_row: expected 2-D tensor");
  std::int64_t n = a->shape[0], d = a->shape[1];
  if (i < 0 || i >= n) {
    throw IndexError("slice_row: row " + std::to_string(i) + " out of " +
                     std::to_string(n));
  }
  auto out = make_output({1, d}, {&a});
  std::copy_n(a->values.begin() + i * d, d, out->values.begin());
  if (out->requires_grad) {
    record([a, out, i, d]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::int64_t c = 0; c < d; ++c) a->grad[i * d + c] += out->grad[c];
    });
  }
  return out;
}

TensorPtr Tape::concat_cols(const std::vector<TensorPtr>& blocks) {
  if (blocks.empty()) throw ShapeError("concat_cols: no blocks");
  std::int64_t n = blocks[0]->shape.size() == 2 ? blocks[0]->shape[0] : -1;
  std::int64_t total = 0;
  for (const auto& b : blocks) {
    if (b->shape.size() != 2 || b->shape[0] != n) {
      throw ShapeError("concat_cols: blocks must be 2-D with equal row count");
    }
    total += b->shape[1];
  }
  auto out = Tensor::zeros({n, total});
  for (const auto& b : blocks)
    if (b->requires_grad) out->requires_grad = true;
  std::int64_t off = 0;
  for (const auto& b : blocks) {
    std::int64_t d = b->shape[1];
    for (std::int64_t r = 0; r < n; ++r)
      std::copy_n(b->values.begin() + r * d, d,
                  out->values.begin() + r * total + off);
    off += d;
  }
  if (out->requires_grad) {
    record([blocks, out, n, total]() {
      if (out->grad.empty()) return;
      std::int64_t off = 0;
      for (const auto& b : blocks) {
        std::int64_t d = b->shape[1];
        if (b->requires_grad) {
          b->ensure_grad();
          for (std::int64_t r = 0; r < n; ++r)
            for (std::int64_t c = 0; c < d; ++c)
              b->grad[r * d + c] += out->grad[r * total + off + c];
        }
        off += d;
      }
    });
  }
  return out;
}

TensorPtr Tape::slice_rows(const TensorPtr& a, std::int64_t start,
                           std::int64_t len) {
  if (a->shape.size() != 2) throw ShapeError("slice_rows: expected 2-D tensor");
  std::int64_t n = a->shape[0], d = a->shape[1];
  if (start < 0 || len <= 0 || start + len > n) {
    throw IndexError("slice_rows: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of " +
                     std::to_string(n) + " rows");
  }
  auto out = make_output({len, d}, {&a});
  std::copy_n(a->values.begin() + start * d, len * d, out->values.begin());
  if (out->requires_grad) {
    record([a, out, start, len, d]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::int64_t i = 0; i < len * d; ++i)
        a->grad[start * d + i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::stack_rows(const std::vector<TensorPtr>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no blocks");
  if (rows[0]->shape.size() != 2) {
    throw ShapeError("stack_rows: blocks must be 2-D");
  }
  std::int64_t d = rows[0]->shape[1];
  std::int64_t k = 0;
  for (const auto& r : rows) {
    if (r->shape.size() != 2 || r->shape[1] != d) {
      throw ShapeError("stack_rows: blocks must be 2-D with equal columns");
    }
    k += r->shape[0];
  }
  auto out = Tensor::zeros({k, d});
  for (const auto& r : rows)
    if (r->requires_grad) out->requires_grad = true;
  std::int64_t off = 0;
  for (const auto& r : rows) {
    std::copy_n(r->values.begin(), r->values.size(),
                out->values.begin() + off);
    off += static_cast<std::int64_t>(r->values.size());
  }
  if (out->requires_grad) {
    record([rows, out]() {
      if (out->grad.empty()) return;
      std::int64_t off = 0;
      for (const auto& r : rows) {
        if (r->requires_grad) {
          r->ensure_grad();
          for (std::size_t i = 0; i < r->grad.size(); ++i)
            r->grad[i] += out->grad[off + i];
        }
        off += static_cast<std::int64_t>(r->values.size());
      }
    });
  }
  return out;
}

TensorPtr Tape::mean_rows(const TensorPtr& a) {
  if (a->shape.size() != 2) throw ShapeError("mean_rows: expected 2-D tensor");
  std::int64_t n = a->shape[0], d = a->shape[1];
  auto out = make_output({1, d}, {&a});
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t c = 0; c < d; ++c)
      out->values[c] += a->values[r * d + c];
  for (std::int64_t c = 0; c < d; ++c) out->values[c] /= static_cast<double>(n);
  if (out->requires_grad) {
    record([a, out, n, d]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      double inv = 1.0 / static_cast<double>(n);
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < d; ++c)
          a->grad[r * d + c] += inv * out->grad[c];
    });
  }
  return out;
}

TensorPtr Tape::sum(const TensorPtr& a) {
  auto out = make_output({1}, {&a});
  double acc = 0.0;
  for (double v : a->values) acc += v;
  out->values[0] = acc;
  if (out->requires_grad) {
    record([a, out]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      double g = out->grad[0];
      for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
    });
  }
  return out;
}

TensorPtr Tape::softmax(const TensorPtr& a, int axis) {
  int nd = static_cast<int>(a->shape.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " invalid for shape " + shape_str(a->shape));
  }
  std::int64_t extent = a->shape[axis];
  std::int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < nd; ++i) inner *= a->shape[i];
  for (int i = 0; i < axis; ++i) outer *= a->shape[i];
  auto out = make_output(a->shape, {&a});
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      std::int64_t base = o * extent * inner + in;
      double mx = a->values[base];
      for (std::int64_t e = 1; e < extent; ++e)
        mx = std::max(mx, a->values[base + e * inner]);
      double z = 0.0;
      for (std::int64_t e = 0; e < extent; ++e) {
        double v = std::exp(a->values[base + e * inner] - mx);
        out->values[base + e * inner] = v;
        z += v;
      }
      for (std::int64_t e = 0; e < extent; ++e)
        out->values[base + e * inner] /= z;
    }
  }
  if (out->requires_grad) {
    record([a, out, outer, inner, extent]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
          std::int64_t base = o * extent * inner + in;
          double dot = 0.0;
          for (std::int64_t e = 0; e < extent; ++e) {
            std::int64_t idx = base + e * inner;
            dot += out->grad[idx] * out->values[idx];
          }
          for (std::int64_t e = 0; e < extent; ++e) {
            std::int64_t idx = base + e * inner;
            a->grad[idx] += (out->grad[idx] - dot) * out->values[idx];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Tape::log_softmax(const TensorPtr& a) {
  if (a->shape.empty()) throw ShapeError("log_softmax: scalar input");
  std::int64_t d = a->shape.back();
  std::int64_t rows = a->numel() / d;
  auto out = make_output(a->shape, {&a});
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = a->values.data() + r * d;
    double* y = out->values.data() + r * d;
    double mx = x[0];
    for (std::int64_t c = 1; c < d; ++c) mx = std::max(mx, x[c]);
    double z = 0.0;
    for (std::int64_t c = 0; c < d; ++c) z += std::exp(x[c] - mx);
    double lz = std::log(z) + mx;
    for (std::int64_t c = 0; c < d; ++c) y[c] = x[c] - lz;
  }
  if (out->requires_grad) {
    record([a, out, rows, d]() {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* g = out->grad.data() + r * d;
        const double* y = out->values.data() + r * d;
        double gsum = 0.0;
        for (std::int64_t c = 0; c < d; ++c) gsum += g[c];
        for (std::int64_t c = 0; c < d; ++c)
          a->grad[r * d + c] += g[c] - std::exp(y[c]) * gsum;
      }
    });
  }
  return out;
}

TensorPtr Tape::layer_norm(const TensorPtr& x, const TensorPtr& gain,
                           const TensorPtr& bias, double eps) {
  if (x->shape.empty()) throw ShapeError("layer_norm: scalar input");
  std::int64_t d = x->shape.back();
  if (gain->shape != std::vector<std::int64_t>{d} ||
      bias->shape != std::vector<std::int64_t>{d}) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) +
                     "]");
  }
  if (eps <= 0) throw ValidationError("layer_norm: eps must be positive");
  std::int64_t rows = x->numel() / d;
  auto out = make_output(x->shape, {&x, &gain, &bias});
  // Normalized values are stored for the backward pass.
  auto norm = std::make_shared<std::vector<double>>(x->values.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xv = x->values.data() + r * d;
    double mean = 0.0;
    for (std::int64_t c = 0; c < d; ++c) mean += xv[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::int64_t c = 0; c < d; ++c) {
      double dv = xv[c] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::int64_t c = 0; c < d; ++c) {
      double nv = (xv[c] - mean) * is;
      (*norm)[r * d + c] = nv;
      out->values[r * d + c] = nv * gain->values[c] + bias->values[c];
    }
  }
  if (out->requires_grad) {
    record([x, gain, bias, out, norm, inv_std, rows, d]() {
      if (out->grad.empty()) return;
      if (gain->requires_grad) gain->ensure_grad();
      if (bias->requires_grad) bias->ensure_grad();
      if (x->requires_grad) x->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* g = out->grad.data() + r * d;
        const double* nv = norm->data() + r * d;
        if (gain->requires_grad || bias->requires_grad) {
          for (std::int64_t c = 0; c < d; ++c) {
            if (gain->requires_grad) gain->grad[c] += g[c] * nv[c];
            if (bias->requires_grad) bias->grad[c] += g[c];
          }
        }
        if (x->requires_grad) {
          double m1 = 0.0, m2 = 0.0;
          for (std::int64_t c = 0; c < d; ++c) {
            double gg = g[c] * gain->values[c];
            m1 += gg;
            m2 += gg * nv[c];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          double is = (*inv_std)[r];
          for (std::int64_t c = 0; c < d; ++c) {
            double gg = g[c] * gain->values[c];
            x->grad[r * d + c] += is * (gg - m1 - nv[c] * m2);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Tape::gelu(const TensorPtr& x) {
  auto out = make_output(x->shape, {&x});
  for (std::size_t i = 0; i < x->values.size(); ++i) {
    double v = x->values[i];
    out->values[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  if (out->requires_grad) {
    record([x, out]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->values.size(); ++i) {
        double v = x->values[i];
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        x->grad[i] += out->grad[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

TensorPtr Tape::dropout(const TensorPtr& x, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) {
    throw ValidationError("dropout: p must be in [0,1)");
  }
  if (p == 0.0) return x;
  auto out = make_output(x->shape, {&x});
  auto mask = std::make_shared<std::vector<double>>(x->values.size());
  Rng rng(seed);
  double keep = 1.0 - p;
  for (std::size_t i = 0; i < x->values.size(); ++i) {
    double m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    (*mask)[i] = m;
    out->values[i] = x->values[i] * m;
  }
  if (out->requires_grad) {
    record([x, out, mask]() {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->grad.size(); ++i)
        x->grad[i] += out->grad[i] * (*mask)[i];
    });
  }
  return out;
}

TensorPtr Tape::embedding_lookup(const TensorPtr& table,
                                 const std::vector<std::int64_t>& ids) {
  if (table->shape.size() != 2) {
    throw ShapeError("embedding_lookup: table must be 2-D");
  }
  std::int64_t v = table->shape[0], d = table->shape[1];
  std::int64_t n = static_cast<std::int64_t>(ids.size());
  if (n == 0) throw ShapeError("embedding_lookup: empty id list");
  for (std::int64_t id : ids) {
    if (id < 0 || id >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) +
                       " out of vocabulary of size " + std::to_string(v));
    }
  }
  auto out = make_output({n, d}, {&table});
  for (std::int64_t r = 0; r < n; ++r)
    std::copy_n(table->values.begin() + ids[r] * d, d,
                out->values.begin() + r * d);
  if (out->requires_grad) {
    record([table, out, ids, d]() {
      if (out->grad.empty()) return;
      table->ensure_grad();
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::int64_t c = 0; c < d; ++c)
          table->grad[ids[r] * d + c] += out->grad[r * d + c];
    });
  }
  return out;
}

TensorPtr Tape::add_indexed_bias(const TensorPtr& scores,
                                 const TensorPtr& bias,
                                 const std::vector<std::int32_t>& idx) {
  if (scores->shape.size() != 2) {
    throw ShapeError("add_indexed_bias: expected 2-D scores");
  }
  if (static_cast<std::int64_t>(idx.size()) != scores->numel()) {
    throw ShapeError("add_indexed_bias: index matrix size mismatch");
  }
  std::int64_t nb = bias->numel();
  for (std::int32_t k : idx) {
    if (k < 0 || k >= nb) {
      throw IndexError("add_indexed_bias: bucket " + std::to_string(k) +
                       " out of " + std::to_string(nb));
    }
  }
  auto out = make_output(scores->shape, {&scores, &bias});
  for (std::size_t i = 0; i < out->values.size(); ++i)
    out->values[i] = scores->values[i] + bias->values[idx[i]];
  if (out->requires_grad) {
    record([scores, bias, out, idx]() {
      if (out->grad.empty()) return;
      if (scores->requires_grad) {
        scores->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i)
          scores->grad[i] += out->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (std::size_t i = 0; i < out->grad.size(); ++i)
          bias->grad[idx[i]] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr Tape::cls_overlay(const TensorPtr& square, const TensorPtr& theta) {
  if (square->shape.size() != 2 || square->shape[0] != square->shape[1]) {
    throw ShapeError("cls_overlay: expected a square matrix");
  }
  if (theta->numel() != 2) throw ShapeError("cls_overlay: theta must be [2]");
  std::int64_t L = square->shape[0];
  auto out = make_output(square->shape, {&square, &theta});
  out->values = square->values;
  for (std::int64_t j = 0; j < L; ++j) out->values[j] = theta->values[0];
  for (std::int64_t i = 1; i < L; ++i)
    out->values[i * L] = theta->values[1];
  if (out->requires_grad) {
    record([square, theta, out, L]() {
      if (out->grad.empty()) return;
      if (square->requires_grad) {
        square->ensure_grad();
        for (std::int64_t i = 1; i < L; ++i)
          for (std::int64_t j = 1; j < L; ++j)
            square->grad[i * L + j] += out->grad[i * L + j];
      }
      if (theta->requires_grad) {
        theta->ensure_grad();
        for (std::int64_t j = 0; j < L; ++j) theta->grad[0] += out->grad[j];
        for (std::int64_t i = 1; i < L; ++i)
          theta->grad[1] += out->grad[i * L];
      }
    });
  }
  return out;
}

TensorPtr Tape::cross_entropy(const TensorPtr& logits,
                              const std::vector<std::int64_t>& targets) {
  if (logits->shape.size() != 2) {
    throw ShapeError("cross_entropy: logits must be [batch, vocab]");
  }
  std::int64_t b = logits->shape[0], v = logits->shape[1];
  if (static_cast<std::int64_t>(targets.size()) != b) {
    throw ShapeError("cross_entropy: expected " + std::to_string(b) +
                     " targets, got " + std::to_string(targets.size()));
  }
  for (std::int64_t t : targets) {
    if (t < 0 || t >= v) {
      throw IndexError("cross_entropy: target " + std::to_string(t) +
                       " out of vocabulary of size " + std::to_string(v));
    }
  }
  auto out = make_output({1}, {&logits});
  // Softmax rows are cached for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(logits->values.size());
  double loss = 0.0;
  for (std::int64_t r = 0; r < b; ++r) {
    const double* x = logits->values.data() + r * v;
    double mx = x[0];
    for (std::int64_t c = 1; c < v; ++c) mx = std::max(mx, x[c]);
    double z = 0.0;
    for (std::int64_t c = 0; c < v; ++c) z += std::exp(x[c] - mx);
    double lz = std::log(z) + mx;
    for (std::int64_t c = 0; c < v; ++c)
      (*probs)[r * v + c] = std::exp(x[c] - lz);
    loss -= x[targets[r]] - lz;
  }
  out->values[0] = loss / static_cast<double>(b);
  if (out->requires_grad) {
    record([logits, out, probs, targets, b, v]() {
      if (out->grad.empty()) return;
      logits->ensure_grad();
      double g = out->grad[0] / static_cast<double>(b);
      for (std::int64_t r = 0; r < b; ++r) {
        for (std::int64_t c = 0; c < v; ++c)
          logits->grad[r * v + c] += g * (*probs)[r * v + c];
        logits->grad[r * v + targets[r]] -= g;
      }
    });
  }
  return out;
}

TensorPtr Tape::kl_divergence(const TensorPtr& target,
                              const TensorPtr& log_probs) {
  check_same_shape(target, log_probs, "kl_divergence");
  if (target->shape.size() != 2) {
    throw ShapeError("kl_divergence: expected [batch, n] tensors");
  }
  std::int64_t b = target->shape[0], n = target->shape[1];
  for (std::int64_t r = 0; r < b; ++r) {
    double s = 0.0;
    for (std::int64_t c = 0; c < n; ++c) {
      double t = target->values[r * n + c];
      if (t < 0.0) {
        throw ValidationError("kl_divergence: negative target entry in row " +
                              std::to_string(r));
      }
      s += t;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError("kl_divergence: target row " + std::to_string(r) +
                            " sums to " + std::to_string(s) +
                            ", expected 1 within 1e-9");
    }
  }
  auto out = make_output({1}, {&target, &log_probs});
  double loss = 0.0;
  for (std::int64_t r = 0; r < b; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      double t = target->values[r * n + c];
      if (t > 0.0) loss += t * (safe_log(t) - log_probs->values[r * n + c]);
    }
  }
  out->values[0] = loss / static_cast<double>(b);
  if (out->requires_grad) {
    record([target, log_probs, out, b, n]() {
      if (out->grad.empty()) return;
      double g = out->grad[0] / static_cast<double>(b);
      if (log_probs->requires_grad) {
        log_probs->ensure_grad();
        for (std::size_t i = 0; i < log_probs->grad.size(); ++i)
          log_probs->grad[i] -= g * target->values[i];
      }
      if (target->requires_grad) {
        target->ensure_grad();
        for (std::size_t i = 0; i < target->grad.size(); ++i) {
          double t = target->values[i];
          if (t > 0.0)
            target->grad[i] +=
                g * (safe_log(t) + 1.0 - log_probs->values[i]);
        }
      }
    });
  }
  return out;
}

TensorPtr Tape::mse_loss(const TensorPtr& pred,
                         const std::vector<double>& targets) {
  std::int64_t b = pred->numel();
  if (static_cast<std::int64_t>(targets.size()) != b) {
    throw ShapeError("mse_loss: prediction/target count mismatch");
  }
  auto out = make_output({1}, {&pred});
  double loss = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    double d = pred->values[i] - targets[i];
    loss += d * d;
  }
  out->values[0] = loss / static_cast<double>(b);
  if (out->requires_grad) {
    record([pred, out, targets, b]() {
      if (out->grad.empty()) return;
      pred->ensure_grad();
      double g = 2.0 * out->grad[0] / static_cast<double>(b);
      for (std::int64_t i = 0; i < b; ++i)
        pred->grad[i] += g * (pred->values[i] - targets[i]);
    });
  }
  return out;
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(loss->shape));
  }
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->backward();
  }
}

}  // namespace morphlm::kernel
