#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "noisere/gradcheck.hpp"
#include "noisere/params.hpp"
#include "noisere/rng.hpp"
#include "noisere/tape.hpp"

using namespace noisere;

namespace {

Tensor mat(int r, int c, std::vector<double> vals) { return Tensor({r, c}, std::move(vals)); }
Tensor vec(std::vector<double> vals) {
  const int n = static_cast<int>(vals.size());
  return Tensor({n}, std::move(vals));
}

Tensor random_tensor(Shape shape, Rng& rng, double range = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
  return t;
}

}  // namespace

TEST_CASE("matmul matches hand oracles", "[grad-core]") {
  Tape tape;
  SECTION("identity times vector") {
    auto a = tape.leaf(Tensor::identity(3));
    auto b = tape.leaf(mat(3, 1, {0.2, 0.3, 0.5}));
    auto c = tape.matmul(a, b);
    CHECK(tape.value(c)[0] == 0.2);
    CHECK(tape.value(c)[1] == 0.3);
    CHECK(tape.value(c)[2] == 0.5);
  }
  SECTION("hand multiplication") {
    auto a = tape.leaf(mat(2, 2, {1, 2, 3, 4}));
    auto b = tape.leaf(mat(2, 1, {0, 1}));
    auto c = tape.matmul(a, b);
    CHECK(tape.value(c)[0] == 2.0);
    CHECK(tape.value(c)[1] == 4.0);
  }
  SECTION("zero annihilates") {
    auto a = tape.leaf(Tensor({2, 3}));
    auto b = tape.leaf(mat(3, 2, {1, 2, 3, 4, 5, 6}));
    auto c = tape.matmul(a, b);
    for (int64_t i = 0; i < tape.value(c).size(); ++i) CHECK(tape.value(c)[i] == 0.0);
  }
  SECTION("shape mismatch names both shapes") {
    auto a = tape.leaf(Tensor({2, 3}));
    auto b = tape.leaf(Tensor({2, 2}));
    CHECK_THROWS_MATCHES(tape.matmul(a, b), DimensionError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("[2x3]") &&
                             Catch::Matchers::ContainsSubstring("[2x2]")));
  }
}

TEST_CASE("matmul associativity against oracle", "[grad-core]") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    auto a = tape.leaf(random_tensor({3, 3}, rng));
    auto b = tape.leaf(random_tensor({3, 3}, rng));
    auto c = tape.leaf(random_tensor({3, 3}, rng));
    auto left = tape.matmul(tape.matmul(a, b), c);
    auto right = tape.matmul(a, tape.matmul(b, c));
    CHECK(tape.value(left).max_abs_diff(tape.value(right)) < 1e-10);
  }
}

TEST_CASE("row_softmax values and safety", "[grad-core]") {
  Tape tape;
  SECTION("symmetric input is uniform") {
    auto y = tape.row_softmax(tape.leaf(vec({0, 0, 0})));
    for (int i = 0; i < 3; ++i) CHECK(tape.value(y)[i] == Catch::Approx(1.0 / 3).epsilon(1e-12));
  }
  SECTION("scalar oracle for [1,2,3]") {
    auto y = tape.row_softmax(tape.leaf(vec({1, 2, 3})));
    CHECK(tape.value(y)[0] == Catch::Approx(0.09003).margin(1e-5));
    CHECK(tape.value(y)[1] == Catch::Approx(0.24473).margin(1e-5));
    CHECK(tape.value(y)[2] == Catch::Approx(0.66524).margin(1e-5));
  }
  SECTION("huge logit does not overflow") {
    auto y = tape.row_softmax(tape.leaf(vec({1000, 0, 0})));
    CHECK(tape.value(y)[0] == Catch::Approx(1.0).margin(1e-9));
    CHECK(tape.value(y)[1] == Catch::Approx(0.0).margin(1e-9));
    CHECK(tape.value(y).all_finite());
  }
  SECTION("rows sum to one on random matrices") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      Tape t2;
      auto y = t2.row_softmax(t2.leaf(random_tensor({4, 5}, rng, 10.0)));
      const Tensor& v = t2.value(y);
      for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int c = 0; c < 5; ++c) {
          double e = v.at(r, c);
          CHECK(e >= 0.0);
          CHECK(e <= 1.0);
          s += e;
        }
        CHECK(s == Catch::Approx(1.0).margin(1e-9));
      }
    }
  }
}

TEST_CASE("segment_max_pool follows the split rule", "[grad-core]") {
  Tape tape;
  SECTION("hand max oracle") {
    auto fm = tape.leaf(mat(1, 7, {1, 5, 2, 0, 3, 9, 4}));
    auto y = tape.segment_max_pool(fm, 1, 4);
    CHECK(tape.value(y)[0] == 5.0);
    CHECK(tape.value(y)[1] == 3.0);
    CHECK(tape.value(y)[2] == 9.0);
  }
  SECTION("constant map") {
    auto fm = tape.leaf(Tensor({2, 6}, 3.25));
    auto y = tape.segment_max_pool(fm, 1, 3);
    for (int64_t i = 0; i < 6; ++i) CHECK(tape.value(y)[i] == 3.25);
  }
  SECTION("singleton segments pass through") {
    auto fm = tape.leaf(mat(1, 3, {7, 8, 9}));
    auto y = tape.segment_max_pool(fm, 0, 1);
    CHECK(tape.value(y)[0] == 7.0);
    CHECK(tape.value(y)[1] == 8.0);
    CHECK(tape.value(y)[2] == 9.0);
  }
  SECTION("empty segment is an input error") {
    auto fm = tape.leaf(mat(1, 3, {7, 8, 9}));
    CHECK_THROWS_AS(tape.segment_max_pool(fm, 2, 2), DataError);
    CHECK_THROWS_AS(tape.segment_max_pool(fm, 0, 0), DataError);
  }
}

TEST_CASE("backward analytic examples", "[grad-core]") {
  SECTION("sum of squares") {
    ParameterStore store;
    Parameter& x = store.add("x", vec({1, 2}));
    Tape tape;
    auto xv = tape.param(x);
    auto loss = tape.dot(xv, xv);
    tape.backward(loss);
    CHECK(x.grad[0] == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(x.grad[1] == Catch::Approx(4.0).epsilon(1e-12));
  }
  SECTION("log softmax picks half/minus-half at the origin") {
    ParameterStore store;
    Parameter& x = store.add("x", vec({0, 0}));
    Tape tape;
    auto p = tape.row_softmax(tape.param(x));
    auto loss = tape.log_clamped(tape.pick(p, 0));
    tape.backward(loss);
    CHECK(x.grad[0] == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(x.grad[1] == Catch::Approx(-0.5).epsilon(1e-12));
  }
  SECTION("non-scalar loss is a usage error") {
    Tape tape;
    auto v = tape.leaf(vec({1, 2}));
    CHECK_THROWS_AS(tape.backward(v), UsageError);
  }
}

TEST_CASE("backward is deterministic bit-for-bit", "[grad-core]") {
  Rng rng(99);
  Tensor m = random_tensor({3, 3}, rng);
  Tensor v = random_tensor({3}, rng);
  auto run = [&](std::vector<double>& out) {
    ParameterStore store;
    Parameter& M = store.add("M", m);
    Parameter& x = store.add("x", v);
    Tape tape;
    auto T = tape.row_softmax(tape.param(M));
    auto y = tape.matvec_t(T, tape.tanh(tape.param(x)));
    auto loss = tape.add(tape.trace(T), tape.log_clamped(tape.pick(tape.normalize_sum(y), 1)));
    tape.backward(loss);
    for (auto& p : store.all())
      for (int64_t i = 0; i < p->grad.size(); ++i) out.push_back(p->grad[i]);
  };
  std::vector<double> g1, g2;
  run(g1);
  run(g2);
  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("finite differences on a linear map are exact", "[grad-core]") {
  ParameterStore store;
  Parameter& x = store.add("x", vec({0.3, -0.7, 1.1}));
  Tensor c = vec({2.0, -1.0, 0.5});
  auto loss_fn = [&](bool with_grad) {
    Tape tape;
    auto xv = tape.param(x);
    auto loss = tape.dot(xv, tape.leaf(c));
    if (with_grad) {
      store.zero_grads();
      tape.backward(loss);
    }
    return tape.value(loss)[0];
  };
  auto report = finite_diff_check(loss_fn, {&x});
  CHECK(report.max_rel_error < 1e-10);
}

TEST_CASE("trace-of-softmax composite matches finite differences", "[grad-core]") {
  Rng rng(3);
  ParameterStore store;
  Parameter& M = store.add("M", random_tensor({3, 3}, rng));
  auto loss_fn = [&](bool with_grad) {
    Tape tape;
    auto T = tape.row_softmax(tape.param(M));
    auto loss = tape.trace(T);
    if (with_grad) {
      store.zero_grads();
      tape.backward(loss);
    }
    return tape.value(loss)[0];
  };
  auto report = finite_diff_check(loss_fn, {&M});
  CHECK(report.passes(1e-4));
}

// Every differentiable op appears in one of the two composites below; both
// are checked against central differences on 20 random seeds.
TEST_CASE("all ops pass finite-difference checks over random seeds", "[grad-core]") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 7919 + 13);

    // Dense composite: matvec, add, tanh, row_softmax, matvec_t, matmul,
    // matmul_nt, normalize_sum, log_clamped, pick, trace, dot, scale,
    // add_n, add_scalar_broadcast, add_col_broadcast, reshape.
    {
      ParameterStore store;
      Parameter& A = store.add("A", random_tensor({3, 4}, rng));
      Parameter& x = store.add("x", random_tensor({4}, rng));
      Parameter& b = store.add("b", random_tensor({3}, rng));
      Parameter& M = store.add("M", random_tensor({3, 3}, rng));
      Parameter& B = store.add("B", random_tensor({3, 4}, rng));
      Parameter& s = store.add("s", random_tensor({1}, rng));
      Tensor probe1 = random_tensor({3}, rng);
      Tensor probe2 = random_tensor({3, 3}, rng);
      Tensor probe3 = random_tensor({9}, rng);
      auto loss_fn = [&](bool with_grad) {
        Tape tape;
        auto Av = tape.param(A);
        auto xv = tape.param(x);
        auto bv = tape.param(b);
        auto Mv = tape.param(M);
        auto Bv = tape.param(B);
        auto sv = tape.param(s);
        auto h = tape.tanh(tape.add(tape.matvec(Av, xv), bv));
        auto T = tape.row_softmax(tape.add_col_broadcast(
            tape.add_scalar_broadcast(tape.matmul_nt(Av, Bv), sv), bv));
        auto o = tape.normalize_sum(tape.matvec_t(T, tape.row_softmax(h)));
        auto prod = tape.matmul(Mv, tape.reshape(o, {3, 1}));
        auto parts = std::vector<Var>{
            tape.scale(tape.trace(T), 0.3),
            tape.log_clamped(tape.pick(o, 1)),
            tape.dot(tape.flatten(prod), tape.leaf(probe1)),
            tape.dot(tape.flatten(tape.matmul(Mv, tape.leaf(probe2))), tape.leaf(probe3))};
        auto loss = tape.add_n(parts);
        if (with_grad) {
          store.zero_grads();
          tape.backward(loss);
        }
        return tape.value(loss)[0];
      };
      auto report = finite_diff_check(loss_fn, {&A, &x, &b, &M, &B, &s});
      INFO("dense composite, seed " << seed);
      CHECK(report.passes(1e-4));
    }

    // Encoder-shaped composite: embed_concat, conv1d_valid,
    // segment_max_pool, flatten, concat, stack_rows, mean_rows.
    {
      ParameterStore store;
      Parameter& W = store.add("word", random_tensor({5, 3}, rng));
      Parameter& P1 = store.add("pos1", random_tensor({4, 2}, rng));
      Parameter& P2 = store.add("pos2", random_tensor({4, 2}, rng));
      Parameter& F = store.add("filters", random_tensor({2, 3 * 7}, rng));
      Parameter& cb = store.add("conv_bias", random_tensor({2}, rng));
      std::vector<int> words = {0, 2, 1, 4, 3, 2, 0, 1};
      std::vector<int> d1 = {0, 1, 2, 3, 0, 1, 2, 3};
      std::vector<int> d2 = {3, 2, 1, 0, 3, 2, 1, 0};
      Tensor probe = random_tensor({6}, rng);
      Tensor probe_row = random_tensor({12}, rng);
      auto loss_fn = [&](bool with_grad) {
        Tape tape;
        auto in = tape.embed_concat(tape.param(W), tape.param(P1), tape.param(P2), words, d1, d2);
        auto fm = tape.conv1d_valid(in, tape.param(F), tape.param(cb), 3);  // 2 x 6
        auto pooled = tape.segment_max_pool(fm, 1, 3);                      // 2 x 3
        auto xa = tape.tanh(tape.flatten(pooled));                          // 6
        auto xb = tape.scale(xa, 0.5);
        auto stacked = tape.stack_rows({xa, xb});  // 2 x 6
        auto meaned = tape.mean_rows(stacked);     // 6
        auto joined = tape.concat({meaned, xa});   // 12
        auto loss = tape.add(tape.dot(joined, tape.leaf(probe_row)),
                             tape.dot(meaned, tape.leaf(probe)));
        if (with_grad) {
          store.zero_grads();
          tape.backward(loss);
        }
        return tape.value(loss)[0];
      };
      auto report = finite_diff_check(loss_fn, {&W, &P1, &P2, &F, &cb});
      INFO("encoder composite, seed " << seed);
      CHECK(report.passes(1e-4));
    }
  }
}

TEST_CASE("normalize_sum rejects degenerate input", "[grad-core]") {
  Tape tape;
  auto v = tape.leaf(vec({0.0, 0.0}));
  CHECK_THROWS_AS(tape.normalize_sum(v), NumericError);
}

TEST_CASE("sgd_step updates and zeroes", "[grad-core]") {
  ParameterStore store;
  Parameter& x = store.add("x", vec({1.0}));
  x.grad[0] = 2.0;
  store.sgd_step(0.1);
  CHECK(x.value[0] == Catch::Approx(0.8).epsilon(1e-12));
  CHECK(x.grad[0] == 0.0);

  SECTION("zero gradient leaves value unchanged") {
    store.sgd_step(0.5);
    CHECK(x.value[0] == Catch::Approx(0.8).epsilon(1e-12));
  }
  SECTION("non-finite gradient aborts naming the parameter") {
    x.grad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_MATCHES(store.sgd_step(0.1), NumericError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("x")));
  }
}
