#include <catch2/catch_amalgamated.hpp>

#include "armcast/adam.hpp"
#include "armcast/grad_check.hpp"
#include "armcast/linalg.hpp"
#include "armcast/matrix.hpp"
#include "armcast/rng.hpp"

using namespace armcast;

TEST_CASE("matmul against hand-computed product") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == Catch::Approx(58.0));
  CHECK(c(0, 1) == Catch::Approx(64.0));
  CHECK(c(1, 0) == Catch::Approx(139.0));
  CHECK(c(1, 1) == Catch::Approx(154.0));
  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("solve_least_squares identity system") {
  Matrix a = identity(2);
  Matrix b(2, 1, {1, 2});
  Matrix x = solve_least_squares(a, b, 0.0);
  CHECK(x(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(x(1, 0) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("solve_least_squares overdetermined mean") {
  // Normal-equations oracle: AᵀA x = AᵀB with A = [1;1] gives the mean.
  Matrix a(2, 1, {1, 1});
  Matrix b(2, 1, {0, 2});
  Matrix x = solve_least_squares(a, b, 0.0);
  CHECK(x(0, 0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("solve_least_squares ridge closed form") {
  Matrix a = identity(2);
  Matrix b(2, 1, {1, 1});
  Matrix x = solve_least_squares(a, b, 1.0);  // (I + I)^-1 B
  CHECK(x(0, 0) == Catch::Approx(0.5).margin(1e-12));
  CHECK(x(1, 0) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("solve_least_squares all-zero A returns zero") {
  Matrix a(3, 2);
  Matrix b(3, 1, {1, 2, 3});
  Matrix x = solve_least_squares(a, b, 0.0);
  CHECK(x.frobenius_norm() == 0.0);
}

TEST_CASE("solve_least_squares rejects bad input") {
  Matrix a(3, 2);
  Matrix b(2, 1);
  CHECK_THROWS_AS(solve_least_squares(a, b, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_least_squares(identity(2), identity(2), -1.0), std::invalid_argument);
}

TEST_CASE("least squares satisfies normal equations on random systems") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = rng.normal_matrix(20, 5);
    Matrix b = rng.normal_matrix(20, 3);
    Matrix x = solve_least_squares(a, b, 0.0);
    Matrix lhs = matmul(matmul(a.transposed(), a), x);
    Matrix rhs = matmul(a.transposed(), b);
    CHECK((lhs - rhs).frobenius_norm() / rhs.frobenius_norm() < 1e-8);
  }
}

TEST_CASE("ridge norm is non-increasing in lambda") {
  Rng rng(11);
  Matrix a = rng.normal_matrix(30, 6);
  Matrix b = rng.normal_matrix(30, 2);
  double prev = solve_least_squares(a, b, 1e-6).frobenius_norm();
  for (double lambda : {1e-3, 1.0, 1e3}) {
    const double cur = solve_least_squares(a, b, lambda).frobenius_norm();
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("adam zero gradient leaves params bit-identical") {
  Matrix params(2, 2, {0.1, -0.2, 0.3, 0.4});
  Matrix zero(2, 2);
  AdamState state = AdamState::for_params(params, 1e-3);
  Matrix before = params;
  for (int i = 0; i < 5; ++i) adam_step(params, zero, state);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i] == before[i]);
  CHECK(state.t == 5);
}

TEST_CASE("adam first step magnitude is lr-scaled sign of gradient") {
  // Step 1 closed form: -lr * g / (|g| + eps'), virtually -lr * sign(g).
  Matrix p1(1, 1, {0.0});
  Matrix g1(1, 1, {1.0});
  AdamState s1 = AdamState::for_params(p1, 1e-4);
  adam_step(p1, g1, s1);
  CHECK(p1(0, 0) == Catch::Approx(-9.9999e-5).epsilon(1e-3));

  Matrix p2(1, 1, {0.0});
  Matrix g2(1, 1, {-2.0});
  AdamState s2 = AdamState::for_params(p2, 1e-4);
  adam_step(p2, g2, s2);
  CHECK(p2(0, 0) == Catch::Approx(1e-4).epsilon(1e-3));
}

TEST_CASE("adam shape mismatch throws") {
  Matrix p(2, 2);
  Matrix g(2, 1);
  AdamState s = AdamState::for_params(p, 1e-3);
  CHECK_THROWS_AS(adam_step(p, g, s), std::invalid_argument);
}

TEST_CASE("finite_diff_grad against analytic derivatives") {
  // f(x) = x^2 at x = 3.
  Matrix x(1, 1, {3.0});
  Matrix g = finite_diff_grad([](const Matrix& m) { return m[0] * m[0]; }, x, 1e-5);
  CHECK(g(0, 0) == Catch::Approx(6.0).margin(1e-8));

  // Constant function.
  Matrix g2 = finite_diff_grad([](const Matrix&) { return 42.0; }, x, 1e-5);
  CHECK(g2(0, 0) == 0.0);

  // f(x) = x1 * x2 at (2, 5).
  Matrix x3(1, 2, {2.0, 5.0});
  Matrix g3 = finite_diff_grad([](const Matrix& m) { return m[0] * m[1]; }, x3, 1e-5);
  CHECK(g3(0, 0) == Catch::Approx(5.0).margin(1e-7));
  CHECK(g3(0, 1) == Catch::Approx(2.0).margin(1e-7));

  CHECK_THROWS_AS(finite_diff_grad([](const Matrix& m) { return m[0]; }, x, 0.0),
                  std::invalid_argument);
}

TEST_CASE("rng determinism") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("rng uniform sample mean") {
  Rng rng(123);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += rng.uniform();
  CHECK(acc / n == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("rng normal sample variance") {
  Rng rng(321);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(sum2 / n - mean * mean == Catch::Approx(1.0).margin(0.05));
  CHECK(mean == Catch::Approx(0.0).margin(0.02));
}

TEST_CASE("splitmix64 sub-seeds differ per index") {
  CHECK(splitmix64_at(1, 0) != splitmix64_at(1, 1));
  CHECK(splitmix64_at(1, 0) != splitmix64_at(2, 0));
  CHECK(splitmix64_at(1, 5) == splitmix64_at(1, 5));
}
