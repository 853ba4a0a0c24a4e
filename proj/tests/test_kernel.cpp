#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "morphlm/common.hpp"
#include "morphlm/kernel/optim.hpp"
#include "morphlm/kernel/rng.hpp"
#include "morphlm/kernel/tape.hpp"
#include "test_util.hpp"

using namespace morphlm;
using namespace morphlm::kernel;
using testutil::grad_check_op;
using testutil::random_tensor;

TEST_CASE("matmul identity and hand cases") {
  Tape tape;
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto b = Tensor::from({2, 2}, {5, 6, 7, 8});
  auto c = tape.matmul(eye, b);
  CHECK(c->values == std::vector<double>{5, 6, 7, 8});

  auto r = tape.matmul(Tensor::from({1, 2}, {1, 2}),
                       Tensor::from({2, 1}, {3, 4}));
  CHECK(r->values[0] == 11.0);

  CHECK_THROWS_AS(tape.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                  ShapeError);
}

TEST_CASE("matmul random vs triple-loop oracle") {
  Rng rng(101);
  auto a = random_tensor({4, 3}, rng, false);
  auto b = random_tensor({3, 2}, rng, false);
  Tape tape;
  auto c = tape.matmul(a, b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a->at(i, k) * b->at(k, j);
      CHECK(std::abs(c->at(i, j) - acc) <= 1e-12);
    }
  }
}

TEST_CASE("softmax symmetry, stability, extended-precision oracle") {
  Tape tape;
  auto s = tape.softmax(Tensor::from({3}, {0, 0, 0}), -1);
  for (double v : s->values) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto big = tape.softmax(Tensor::from({3}, {1000, 0, 0}), -1);
  CHECK(std::isfinite(big->values[0]));
  CHECK(big->values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big->values[1] <= 1e-300);

  auto x = tape.softmax(Tensor::from({3}, {1, 2, 3}), -1);
  long double z = 0.0L;
  for (long double v : {1.0L, 2.0L, 3.0L}) z += std::exp(v);
  for (int i = 0; i < 3; ++i) {
    long double expect = std::exp(static_cast<long double>(i + 1)) / z;
    CHECK(std::abs(x->values[i] - static_cast<double>(expect)) <= 1e-12);
  }
}

TEST_CASE("softmax rows sum to one over random inputs and axes") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({3, 4, 5}, rng, false, -30.0, 30.0);
    int axis = static_cast<int>(rng.uniform_int(3));
    Tape tape;
    auto s = tape.softmax(x, axis);
    std::int64_t extent = x->shape[axis];
    std::int64_t inner = 1, outer = 1;
    for (int i = axis + 1; i < 3; ++i) inner *= x->shape[i];
    for (int i = 0; i < axis; ++i) outer *= x->shape[i];
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t in = 0; in < inner; ++in) {
        double sum = 0.0;
        for (std::int64_t e = 0; e < extent; ++e) {
          sum += s->values[o * extent * inner + e * inner + in];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("layer_norm standardization cases") {
  Tape tape;
  auto gain = Tensor::from({4}, {1, 1, 1, 1});
  auto bias = Tensor::from({4}, {0, 0, 0, 0});

  auto constant = tape.layer_norm(Tensor::from({1, 4}, {3, 3, 3, 3}), gain,
                                  bias, 1e-5);
  for (double v : constant->values) CHECK(v == doctest::Approx(0.0));

  auto g2 = Tensor::from({2}, {1, 1});
  auto b2 = Tensor::from({2}, {0, 0});
  auto two = tape.layer_norm(Tensor::from({1, 2}, {1, 3}), g2, b2, 1e-12);
  CHECK(two->values[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(two->values[1] == doctest::Approx(1.0).epsilon(1e-6));

  Rng rng(7);
  auto x = random_tensor({3, 16}, rng, false);
  auto g16 = Tensor::full({16}, 1.0);
  auto b16 = Tensor::zeros({16});
  auto y = tape.layer_norm(x, g16, b16, 1e-5);
  for (int r = 0; r < 3; ++r) {
    double mean = 0.0, var = 0.0;
    for (int c = 0; c < 16; ++c) mean += x->at(r, c);
    mean /= 16;
    for (int c = 0; c < 16; ++c) {
      var += (x->at(r, c) - mean) * (x->at(r, c) - mean);
    }
    var /= 16;
    for (int c = 0; c < 16; ++c) {
      double expect = (x->at(r, c) - mean) / std::sqrt(var + 1e-5);
      CHECK(std::abs(y->at(r, c) - expect) <= 1e-10);
    }
  }
}

TEST_CASE("cross_entropy cases and oracle") {
  Tape tape;
  auto sharp = Tensor::from({1, 3}, {1e6, 0, 0});
  CHECK(tape.cross_entropy(sharp, {0})->values[0] ==
        doctest::Approx(0.0).epsilon(1e-12));

  auto uniform = Tensor::zeros({1, 4});
  CHECK(tape.cross_entropy(uniform, {2})->values[0] ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  CHECK_THROWS_AS(tape.cross_entropy(uniform, {4}), IndexError);
  CHECK_THROWS_AS(tape.cross_entropy(uniform, {-1}), IndexError);

  Rng rng(11);
  auto logits = random_tensor({2, 5}, rng, false, -3.0, 3.0);
  std::vector<std::int64_t> targets{3, 1};
  double got = tape.cross_entropy(logits, targets)->values[0];
  long double total = 0.0L;
  for (int r = 0; r < 2; ++r) {
    long double z = 0.0L;
    for (int c = 0; c < 5; ++c) {
      z += std::exp(static_cast<long double>(logits->at(r, c)));
    }
    total -= static_cast<long double>(logits->at(r, targets[r])) -
             std::log(z);
  }
  CHECK(std::abs(got - static_cast<double>(total / 2.0L)) <= 1e-10);
}

TEST_CASE("kl_divergence cases, oracle and validation") {
  Tape tape;
  auto logits = Tensor::from({1, 3}, {0.3, -1.2, 2.0});
  auto p = tape.softmax(logits, -1);
  auto lp = tape.log_softmax(logits);
  auto zero = tape.kl_divergence(Tensor::from({1, 3}, p->values), lp);
  CHECK(std::abs(zero->values[0]) <= 1e-10);

  auto t = Tensor::from({1, 2}, {1, 0});
  auto halves = Tensor::from({1, 2}, {std::log(0.5), std::log(0.5)});
  CHECK(tape.kl_divergence(t, halves)->values[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto bad = Tensor::from({1, 2}, {0.7, 0.2});
  CHECK_THROWS_AS(tape.kl_divergence(bad, halves), ValidationError);
  auto neg = Tensor::from({1, 2}, {1.5, -0.5});
  CHECK_THROWS_AS(tape.kl_divergence(neg, halves), ValidationError);

  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto traw = random_tensor({2, 6}, rng, false, 0.01, 1.0);
    for (int r = 0; r < 2; ++r) {
      double z = 0.0;
      for (int c = 0; c < 6; ++c) z += traw->at(r, c);
      for (int c = 0; c < 6; ++c) traw->at(r, c) /= z;
    }
    auto praw = random_tensor({2, 6}, rng, false, -2.0, 2.0);
    auto logp = tape.log_softmax(praw);
    double got = tape.kl_divergence(traw, logp)->values[0];
    long double expect = 0.0L;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 6; ++c) {
        long double tv = traw->at(r, c);
        if (tv > 0) {
          expect += tv * (std::log(tv) -
                          static_cast<long double>(logp->at(r, c)));
        }
      }
    }
    expect /= 2.0L;
    CHECK(std::abs(got - static_cast<double>(expect)) <= 1e-10);
    CHECK(got >= -1e-15);
  }
}

TEST_CASE("backward linear and quadratic cases") {
  Tape tape;
  auto x = Tensor::from({4}, {1, -2, 3, 0.5}, true);
  auto loss = tape.sum(x);
  tape.backward(loss);
  for (double g : x->grad) CHECK(g == 1.0);

  Tape tape2;
  auto y = Tensor::from({3}, {1.5, -2.0, 0.25}, true);
  auto loss2 = tape2.sum(tape2.mul(y, y));
  tape2.backward(loss2);
  for (int i = 0; i < 3; ++i) {
    CHECK(y->grad[i] == doctest::Approx(2.0 * y->values[i]).epsilon(1e-15));
  }

  CHECK_THROWS_AS(tape2.backward(y), ShapeError);
}

TEST_CASE("gelu cases and oracle") {
  Tape tape;
  auto zero = tape.gelu(Tensor::from({1}, {0.0}));
  CHECK(zero->values[0] == doctest::Approx(0.0));
  auto large = tape.gelu(Tensor::from({1}, {50.0}));
  CHECK(large->values[0] == doctest::Approx(50.0).epsilon(1e-12));
  auto one = tape.gelu(Tensor::from({1}, {1.0}));
  long double expect = 0.5L * (1.0L + std::erf(1.0L / std::sqrt(2.0L)));
  CHECK(one->values[0] ==
        doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
}

TEST_CASE("embedding_lookup cases") {
  Tape tape;
  auto table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  auto out = tape.embedding_lookup(table, {2, 0, 2});
  CHECK(out->values == std::vector<double>{5, 6, 1, 2, 5, 6});
  CHECK_THROWS_AS(tape.embedding_lookup(table, {3}), IndexError);

  // Repeated ids accumulate gradient on the shared row.
  auto loss = tape.sum(out);
  tape.backward(loss);
  CHECK(table->grad[2 * 2 + 0] == doctest::Approx(2.0));
  CHECK(table->grad[0] == doctest::Approx(1.0));
  CHECK(table->grad[1 * 2 + 0] == doctest::Approx(0.0));
}

TEST_CASE("dropout determinism, identity and inverted scaling") {
  Rng rng(3);
  auto x = random_tensor({64, 8}, rng, false);
  Tape tape;
  auto same = tape.dropout(x, 0.0, 9);
  CHECK(same.get() == x.get());  // exact identity

  auto a = tape.dropout(x, 0.25, 1234);
  auto b = tape.dropout(x, 0.25, 1234);
  CHECK(a->values == b->values);  // bit-identical under one seed
  auto c = tape.dropout(x, 0.25, 1235);
  CHECK(a->values != c->values);

  int kept = 0;
  for (std::size_t i = 0; i < x->values.size(); ++i) {
    if (a->values[i] != 0.0) {
      kept++;
      CHECK(a->values[i] ==
            doctest::Approx(x->values[i] / 0.75).epsilon(1e-12));
    }
  }
  double rate = static_cast<double>(kept) / x->values.size();
  CHECK(rate > 0.6);
  CHECK(rate < 0.9);
}

TEST_CASE("adamw identity, hand and oracle cases") {
  OptimUpdate u;
  u.lr = 0.1;
  u.beta1 = 0.9;
  u.beta2 = 0.99;
  u.eps = 1e-8;
  u.weight_decay = 0.0;

  Tensor p;
  p.shape = {1};
  p.values = {1.0};
  p.grad = {0.5};
  MomentState s;
  adamw_step(p, s, u);
  // mhat = 0.5, vhat = 0.25 after bias correction at step 1.
  CHECK(p.values[0] ==
        doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));

  OptimUpdate wd;
  wd.lr = 0.1;
  wd.weight_decay = 0.5;
  Tensor q;
  q.shape = {1};
  q.values = {2.0};
  q.grad = {0.0};
  MomentState s2;
  adamw_step(q, s2, wd);
  CHECK(q.values[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0).epsilon(1e-12));

  Rng rng(77);
  Tensor w;
  w.shape = {4};
  w.values = {0.3, -0.6, 1.2, 0.05};
  MomentState s3;
  std::vector<long double> ref(w.values.begin(), w.values.end());
  std::vector<long double> m(4, 0.0L), v(4, 0.0L);
  OptimUpdate u3;
  u3.lr = 0.01;
  u3.weight_decay = 0.01;
  for (int step = 1; step <= 5; ++step) {
    std::vector<double> g(4);
    for (auto& x : g) x = rng.uniform(-1, 1);
    w.grad = g;
    adamw_step(w, s3, u3);
    for (int i = 0; i < 4; ++i) {
      m[i] = 0.9L * m[i] + 0.1L * g[i];
      v[i] = 0.98L * v[i] + 0.02L * g[i] * g[i];
      long double mh = m[i] / (1.0L - std::pow(0.9L, step));
      long double vh = v[i] / (1.0L - std::pow(0.98L, step));
      ref[i] -= 0.01L * (mh / (std::sqrt(vh) + 1e-6L) + 0.01L * ref[i]);
    }
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(w.values[i] - static_cast<double>(ref[i])) <= 1e-12);
  }

  Tensor nograd;
  nograd.shape = {1};
  nograd.values = {1.0};
  MomentState s4;
  CHECK_THROWS_AS(adamw_step(nograd, s4, u), ShapeError);
}

TEST_CASE("lamb trust ratio cases") {
  OptimUpdate u;
  u.lr = 0.1;
  u.weight_decay = 0.0;
  u.eps = 1e-8;

  // With w = 0 the trust ratio collapses to 1: identical to adamw.
  Tensor a, b;
  a.shape = b.shape = std::vector<std::int64_t>{2};
  a.values = {0.0, 0.0};
  b.values = {0.0, 0.0};
  a.grad = b.grad = std::vector<double>{0.3, -0.4};
  MomentState sa, sb;
  lamb_step(a, sa, u);
  adamw_step(b, sb, u);
  CHECK(a.values == b.values);

  // Hand case: trust = |w| / |dir| exactly cancels, so the step moves the
  // weight by lr * |w| in the update direction's sign.
  Tensor w;
  w.shape = {1};
  w.values = {3.0};
  w.grad = {1.0};
  MomentState sw;
  lamb_step(w, sw, u);
  double dir = 1.0 / (1.0 + 1e-8);
  CHECK(w.values[0] ==
        doctest::Approx(3.0 - 0.1 * (3.0 / dir) * dir).epsilon(1e-12));

  // Weight decay enters the rescaled direction too.
  OptimUpdate u2 = u;
  u2.weight_decay = 0.1;
  Tensor w2;
  w2.shape = {1};
  w2.values = {2.0};
  w2.grad = {1.0};
  MomentState sw2;
  lamb_step(w2, sw2, u2);
  double d2 = 1.0 / (1.0 + 1e-8) + 0.1 * 2.0;
  CHECK(w2.values[0] ==
        doctest::Approx(2.0 - 0.1 * (2.0 / d2) * d2).epsilon(1e-12));
}

TEST_CASE("learning rate schedule") {
  CHECK(linear_warmup_decay(1, 1.0, 10, 110) == doctest::Approx(0.1));
  CHECK(linear_warmup_decay(10, 1.0, 10, 110) == doctest::Approx(1.0));
  CHECK(linear_warmup_decay(60, 1.0, 10, 110) == doctest::Approx(0.5));
  CHECK(linear_warmup_decay(110, 1.0, 10, 110) == doctest::Approx(0.0));
  CHECK(linear_warmup_decay(500, 1.0, 10, 110) == doctest::Approx(0.0));
}

TEST_CASE("rng reproducibility is bit exact") {
  Rng a(42), b(42), c(43);
  std::vector<double> va, vb, vc;
  for (int i = 0; i < 100; ++i) {
    va.push_back(a.uniform());
    vb.push_back(b.uniform());
    vc.push_back(c.uniform());
  }
  CHECK(va == vb);
  CHECK(va != vc);

  Rng n1(9), n2(9);
  for (int i = 0; i < 50; ++i) {
    CHECK(n1.normal(0, 1) == n2.normal(0, 1));
  }

  CHECK(derive_seed(1, "x", 0) == derive_seed(1, "x", 0));
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "x", 1));
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "y", 0));
  CHECK(derive_seed(1, "x", 0) != derive_seed(2, "x", 0));
}

TEST_CASE("finite differences validate every differentiable op") {
  Rng rng(2024);

  auto check = [&](const char* name, std::vector<TensorPtr> inputs,
                   std::function<TensorPtr(Tape&)> build) {
    double err = grad_check_op(inputs, build);
    INFO(name);
    CHECK(err <= 1e-4);
  };

  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    check("add", {a, b}, [&](Tape& t) { return t.add(a, b); });
  }
  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
    check("add_bias", {a, b}, [&](Tape& t) { return t.add_bias(a, b); });
  }
  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    check("mul", {a, b}, [&](Tape& t) { return t.mul(a, b); });
  }
  {
    auto a = random_tensor({2, 5}, rng);
    check("scale", {a}, [&](Tape& t) { return t.scale(a, -1.7); });
  }
  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    check("matmul", {a, b}, [&](Tape& t) { return t.matmul(a, b); });
  }
  {
    auto a = random_tensor({3, 4}, rng);
    check("transpose", {a}, [&](Tape& t) { return t.transpose(a); });
  }
  {
    auto a = random_tensor({3, 6}, rng);
    check("slice_cols", {a}, [&](Tape& t) { return t.slice_cols(a, 1, 3); });
    check("slice_row", {a}, [&](Tape& t) { return t.slice_row(a, 2); });
    check("slice_rows", {a}, [&](Tape& t) { return t.slice_rows(a, 1, 2); });
    check("mean_rows", {a}, [&](Tape& t) { return t.mean_rows(a); });
  }
  {
    auto a = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
    check("concat_cols", {a, b},
          [&](Tape& t) { return t.concat_cols({a, b}); });
    auto c = random_tensor({1, 3}, rng);
    check("stack_rows", {a, c},
          [&](Tape& t) { return t.stack_rows({a, c}); });
  }
  {
    auto a = random_tensor({2, 5}, rng);
    check("softmax", {a}, [&](Tape& t) { return t.softmax(a, -1); });
    check("log_softmax", {a}, [&](Tape& t) { return t.log_softmax(a); });
    check("gelu", {a}, [&](Tape& t) { return t.gelu(a); });
  }
  {
    auto x = random_tensor({3, 8}, rng);
    auto g = random_tensor({8}, rng, true, 0.5, 1.5);
    auto b = random_tensor({8}, rng);
    check("layer_norm", {x, g, b},
          [&](Tape& t) { return t.layer_norm(x, g, b, 1e-5); });
  }
  {
    auto table = random_tensor({5, 3}, rng);
    check("embedding_lookup", {table}, [&](Tape& t) {
      return t.embedding_lookup(table, {4, 0, 4, 2});
    });
  }
  {
    auto s = random_tensor({3, 3}, rng);
    auto bias = random_tensor({4}, rng);
    std::vector<std::int32_t> idx{0, 1, 2, 1, 0, 3, 2, 3, 0};
    check("add_indexed_bias", {s, bias},
          [&](Tape& t) { return t.add_indexed_bias(s, bias, idx); });
    auto theta = random_tensor({2}, rng);
    check("cls_overlay", {s, theta},
          [&](Tape& t) { return t.cls_overlay(s, theta); });
  }
  {
    auto x = random_tensor({4, 6}, rng);
    check("dropout", {x}, [&](Tape& t) { return t.dropout(x, 0.3, 999); });
  }

  // Scalar losses are checked directly (no reduction wrapper).
  {
    auto logits = random_tensor({3, 5}, rng);
    std::vector<std::int64_t> targets{4, 0, 2};
    auto eval = [&](bool record) {
      Tape tape;
      auto loss = tape.cross_entropy(logits, targets);
      if (record) {
        logits->zero_grad();
        tape.backward(loss);
      }
      return loss->values[0];
    };
    CHECK(testutil::max_grad_rel_err({logits}, eval, [] {}) <= 1e-4);
  }
  {
    auto target = Tensor::from({2, 3}, {0.2, 0.5, 0.3, 0.7, 0.0, 0.3});
    auto pre = random_tensor({2, 3}, rng);
    auto eval = [&](bool record) {
      Tape tape;
      auto loss = tape.kl_divergence(target, tape.log_softmax(pre));
      if (record) {
        pre->zero_grad();
        tape.backward(loss);
      }
      return loss->values[0];
    };
    CHECK(testutil::max_grad_rel_err({pre}, eval, [] {}) <= 1e-4);
  }
  {
    auto pred = random_tensor({4}, rng);
    std::vector<double> targets{0.5, -1.0, 2.0, 0.0};
    auto eval = [&](bool record) {
      Tape tape;
      auto loss = tape.mse_loss(pred, targets);
      if (record) {
        pred->zero_grad();
        tape.backward(loss);
      }
      return loss->values[0];
    };
    CHECK(testutil::max_grad_rel_err({pred}, eval, [] {}) <= 1e-4);
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
  auto t = Tensor::zeros({2, 3}, true);
  CHECK(t->numel() == 6);
  t->ensure_grad();
  CHECK(t->grad.size() == t->values.size());
}
