#include <catch2/catch_amalgamated.hpp>

#include "hanet/rng.hpp"
#include "hanet/tensor.hpp"

using namespace hanet;

TEST_CASE("matmul by identity is a no-op") {
  Tensor a = Tensor::of({{1, 2}, {3, 4}});
  Tensor id = Tensor::of({{1, 0}, {0, 1}});
  Tensor out = matmul(a, id);
  CHECK(out.bit_equal(a));
}

TEST_CASE("matmul against a hand sum") {
  Tensor a = Tensor::of({{1, 2}, {3, 4}});
  Tensor ones = Tensor::of({{1}, {1}});
  Tensor out = matmul(a, ones);
  CHECK(out.at(0, 0) == 3.0);
  CHECK(out.at(1, 0) == 7.0);
}

TEST_CASE("matmul names both shapes on mismatch") {
  Tensor a(2, 3), b(4, 2);
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("elementwise basics") {
  Tensor z = Tensor::row({0, 0});
  Tensor s = sigmoid(z);
  CHECK(s.at(0, 0) == 0.5);
  CHECK(s.at(0, 1) == 0.5);
  CHECK(tanh(Tensor::row({0})).at(0, 0) == 0.0);
  Tensor prod = hadamard(Tensor::row({1, 2}), Tensor::row({3, 4}));
  CHECK(prod.at(0, 0) == 3.0);
  CHECK(prod.at(0, 1) == 8.0);
  CHECK_THROWS_AS(add(Tensor(2, 2), Tensor(2, 3)), DimensionError);
}

TEST_CASE("tanh and sigmoid stay strictly inside their codomains") {
  const double xs[] = {-1e308, -745.0, -50.0, -1.0, 0.0, 1.0, 50.0, 745.0, 1e308};
  for (double x : xs) {
    const double s = sigmoid_scalar(x);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    const double th = tanh_scalar(x);
    CHECK(th > -1.0);
    CHECK(th < 1.0);
  }
}

TEST_CASE("softmax_masked trivial cases") {
  SECTION("uniform on zero logits") {
    Tensor out = softmax_masked(Tensor::row({0, 0, 0}), Tensor::row({1, 1, 1}));
    for (int j = 0; j < 3; ++j) CHECK(out.at(0, j) == Catch::Approx(1.0 / 3));
  }
  SECTION("single survivor") {
    Tensor out = softmax_masked(Tensor::row({5, 7}), Tensor::row({1, 0}));
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(0, 1) == 0.0);
  }
  SECTION("exp ratio") {
    Tensor out = softmax_masked(Tensor::row({std::log(2.0), std::log(1.0)}),
                                Tensor::row({1, 1}));
    CHECK(out.at(0, 0) == Catch::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(out.at(0, 1) == Catch::Approx(1.0 / 3).epsilon(1e-12));
  }
  SECTION("all-zero mask is degenerate") {
    CHECK_THROWS_AS(softmax_masked(Tensor::row({1, 2}), Tensor::row({0, 0})),
                    DegenerateInputError);
  }
}

TEST_CASE("softmax_masked properties on arbitrary finite logits") {
  SeededRng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(8));
    Tensor logits(1, n), mask(1, n);
    int kept = 0;
    for (int j = 0; j < n; ++j) {
      logits.at(0, j) = rng.uniform(-1000.0, 1000.0);
      mask.at(0, j) = rng.next_double() < 0.6 ? 1.0 : 0.0;
      kept += mask.at(0, j) != 0.0;
    }
    if (kept == 0) {
      mask.at(0, 0) = 1.0;
      kept = 1;
    }
    Tensor out = softmax_masked(logits, mask);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mask.at(0, j) == 0.0) {
        CHECK(out.at(0, j) == 0.0);
      } else {
        CHECK(out.at(0, j) >= 0.0);
        sum += out.at(0, j);
      }
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(all_finite(out));
  }
}

TEST_CASE("accumulating matmul helpers agree with the plain ones") {
  SeededRng rng(99);
  auto rand_tensor = [&](int r, int c) {
    Tensor t(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2, 2);
    return t;
  };
  Tensor a = rand_tensor(3, 4), b = rand_tensor(4, 2);
  Tensor ab = matmul(a, b);

  Tensor acc(3, 2);
  acc_matmul(acc, a, b);
  CHECK(max_abs_diff(acc, ab) == 0.0);

  Tensor at = transpose(a);
  Tensor acc_tn(3, 2);
  acc_matmul_tn(acc_tn, at, b);
  CHECK(max_abs_diff(acc_tn, ab) < 1e-15);

  Tensor bt = transpose(b);
  Tensor acc_nt(3, 2);
  acc_matmul_nt(acc_nt, a, bt);
  CHECK(max_abs_diff(acc_nt, ab) < 1e-15);
}

TEST_CASE("seeded rng streams are reproducible and fork independently") {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  SeededRng f1 = SeededRng::forked(42, "weights");
  SeededRng f2 = SeededRng::forked(42, "weights");
  SeededRng f3 = SeededRng::forked(42, "other");
  CHECK(f1.next_u64() == f2.next_u64());
  CHECK(f1.next_u64() != f3.next_u64());
}
