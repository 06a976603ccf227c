/*
 * Copyright 2026 The GSC Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "gsc/numerics.hpp"
#include "gsc/rng.hpp"
#include "oracles.hpp"

using gsc::Matrix;

TEST_CASE("softmax_rows: single element, equal values, analytic ratio") {
  CHECK(gsc::softmax_rows(Matrix::from_rows({{3.7}}), 0.5)(0, 0) == 1.0);

  const Matrix eq = gsc::softmax_rows(Matrix(1, 4, 2.5), 0.07);
  for (std::size_t j = 0; j < 4; ++j) CHECK(eq(0, j) == doctest::Approx(0.25).epsilon(1e-15));

  const Matrix r = gsc::softmax_rows(Matrix::from_rows({{0.0, std::log(2.0)}}), 1.0);
  CHECK(r(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(r(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax_rows: rejects bad temperature and non-finite input") {
  const Matrix m(2, 2, 0.0);
  CHECK_THROWS_AS(gsc::softmax_rows(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gsc::softmax_rows(m, -1.0), std::invalid_argument);
  Matrix bad(1, 2, 0.0);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gsc::softmax_rows(bad, 1.0), std::invalid_argument);
}

TEST_CASE("softmax_rows: row-stochastic and shift invariant on random inputs") {
  gsc::Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(9);
    const double scale = trial % 2 == 0 ? 1e4 : 3.0;
    const Matrix m = oracle::random_matrix(rows, cols, rng, -scale, scale);
    const double tau = rng.uniform(0.05, 2.0);
    const Matrix p = gsc::softmax_rows(m, tau);
    Matrix shifted = m;
    for (std::size_t i = 0; i < rows; ++i) {
      const double c = rng.uniform(-50.0, 50.0);
      for (double& x : shifted.row(i)) x += c;
    }
    const Matrix ps = gsc::softmax_rows(shifted, tau);
    for (std::size_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        sum += p(i, j);
        CHECK(std::abs(p(i, j) - ps(i, j)) <= 1e-9);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("cosine: identity, orthogonality, analytic value, degenerate input") {
  const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0}, d{1.0, 1.0}, zero{0.0, 0.0};
  CHECK(gsc::cosine(e1, e1).value == doctest::Approx(1.0));
  CHECK(gsc::cosine(e1, e2).value == 0.0);
  CHECK(gsc::cosine(e1, d).value == doctest::Approx(std::numbers::sqrt2 / 2.0).epsilon(1e-15));
  const auto z = gsc::cosine(zero, d);
  CHECK(z.value == 0.0);
  CHECK(z.degenerate);
  CHECK_FALSE(gsc::cosine(e1, d).degenerate);
  CHECK_THROWS_AS(gsc::cosine(e1, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("cosine: symmetric and positive-scale invariant") {
  gsc::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    auto u = oracle::random_vector(n, rng, -1, 1);
    auto v = oracle::random_vector(n, rng, -1, 1);
    const double c = gsc::cosine(u, v).value;
    CHECK(c == gsc::cosine(v, u).value);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    const double a = rng.uniform(0.1, 100.0);
    for (double& x : u) x *= a;
    CHECK(gsc::cosine(u, v).value == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("logsumexp") {
  CHECK(gsc::logsumexp(std::vector<double>{4.2}) == 4.2);
  CHECK(gsc::logsumexp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double big = gsc::logsumexp(std::vector<double>{1000.0, 1000.0});
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(gsc::logsumexp(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("adam_step: first step moves by about lr against the gradient") {
  std::vector<double> p{1.0};
  gsc::AdamState st(1);
  gsc::adam_step(p, std::vector<double>{0.3}, st, 0.01);
  CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(st.step == 1);
}

TEST_CASE("adam_step: zero gradients leave parameters unchanged") {
  std::vector<double> p{0.5, -2.0, 3.0};
  const auto before = p;
  gsc::AdamState st(3);
  for (int i = 0; i < 10; ++i) gsc::adam_step(p, std::vector<double>(3, 0.0), st, 0.1);
  CHECK(p == before);
  CHECK(st.step == 10);
}

TEST_CASE("adam_step: deterministic and validates shapes") {
  gsc::Rng rng(5);
  const auto grads = oracle::random_vector(6, rng, -1, 1);
  std::vector<double> a(6, 0.25), b(6, 0.25);
  gsc::AdamState sa(6), sb(6);
  for (int i = 0; i < 5; ++i) {
    gsc::adam_step(a, grads, sa, 1e-3);
    gsc::adam_step(b, grads, sb, 1e-3);
  }
  CHECK(a == b);
  CHECK(sa == sb);

  std::vector<double> p(3, 0.0);
  gsc::AdamState st(3);
  CHECK_THROWS_AS(gsc::adam_step(p, std::vector<double>(2, 0.0), st, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(gsc::adam_step(p, std::vector<double>(3, 0.0), st, 0.0), std::invalid_argument);
}

TEST_CASE("Matrix basics") {
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.transposed()(2, 1) == 6);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), std::invalid_argument);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), std::invalid_argument);
}

TEST_CASE("Rng: reproducible streams and independent splits") {
  gsc::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  // A child stream does not depend on how far the parent has advanced.
  gsc::Rng fresh(42);
  CHECK(fresh.split("x").next_u64() == a.split("x").next_u64());
  CHECK(fresh.split(1).next_u64() != fresh.split(2).next_u64());

  gsc::Rng r(9);
  double mean = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    mean += x;
    sq += x * x;
  }
  mean /= n;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.below(7);
    CHECK(k < 7);
  }
}
