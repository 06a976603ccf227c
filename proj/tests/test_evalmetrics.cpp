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

#include "gsc/evalmetrics.hpp"
#include "oracles.hpp"

using gsc::Matrix;

namespace {

std::vector<std::size_t> identity_perm(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  return p;
}

}  // namespace

TEST_CASE("recall_at_k: identity and constant similarity") {
  const auto gt = identity_perm(10);
  CHECK(gsc::recall_at_k(Matrix::identity(10), gt, 1) == 100.0);
  for (std::size_t k : {1u, 3u, 5u, 10u})
    CHECK(gsc::recall_at_k(Matrix(10, 10, 0.2), gt, k) == doctest::Approx(100.0 * k / 10.0));
}

TEST_CASE("recall_at_k: matches the sort oracle") {
  gsc::Rng rng(1);
  {
    const Matrix s = oracle::random_matrix(4, 4, rng);
    const auto gt = rng.permutation(4);
    for (std::size_t k = 1; k <= 4; ++k) CHECK(gsc::recall_at_k(s, gt, k) == oracle::recall(s, gt, k));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    Matrix s = oracle::random_matrix(n, n, rng);
    // Coarse values force ties.
    if (trial % 3 == 0)
      for (double& v : s.flat()) v = std::round(v * 2.0) / 2.0;
    const auto gt = rng.permutation(n);
    const std::size_t k = 1 + rng.below(n);
    CHECK(gsc::recall_at_k(s, gt, k) == oracle::recall(s, gt, k));
  }
}

TEST_CASE("recall_at_k: monotone in K and invariant under increasing transforms") {
  gsc::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(25);
    const Matrix s = oracle::random_matrix(n, n, rng);
    const auto gt = rng.permutation(n);
    double prev = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const double r = gsc::recall_at_k(s, gt, k);
      CHECK(r >= prev);
      prev = r;
    }
    CHECK(prev == 100.0);
    Matrix t = s;
    for (double& v : t.flat()) v = std::exp(3.0 * v) + 1.0;
    for (std::size_t k : {std::size_t{1}, n / 2 + 1, n}) CHECK(gsc::recall_at_k(t, gt, k) == gsc::recall_at_k(s, gt, k));
  }
}

TEST_CASE("recall_at_k: errors") {
  const auto gt = identity_perm(3);
  CHECK_THROWS_AS(gsc::recall_at_k(Matrix::identity(3), gt, 4), std::invalid_argument);
  CHECK_THROWS_AS(gsc::recall_at_k(Matrix::identity(3), gt, 0), std::invalid_argument);
  CHECK_THROWS_AS(gsc::recall_at_k(Matrix::identity(3), identity_perm(2), 1), std::invalid_argument);
}

TEST_CASE("evaluate_retrieval: both directions against the oracle") {
  gsc::Rng rng(3);
  const Matrix s = oracle::random_matrix(12, 12, rng);
  const auto gt = rng.permutation(12);
  const auto r = gsc::evaluate_retrieval(s, gt);
  const auto inv = gsc::inverse_permutation(gt);
  CHECK(r.i2t.r5 == oracle::recall(s, gt, 5));
  CHECK(r.t2i.r1 == oracle::recall(s.transposed(), inv, 1));
  CHECK(r.t2i.r10 == oracle::recall(s.transposed(), inv, 10));
  CHECK(r.recall_sum == doctest::Approx(r.i2t.r1 + r.i2t.r5 + r.i2t.r10 + r.t2i.r1 + r.t2i.r5 + r.t2i.r10));

  const auto tiny = gsc::evaluate_retrieval(Matrix::identity(3), identity_perm(3));
  CHECK(tiny.recall_sum == 600.0);
}

TEST_CASE("detection: perfect separation, constant scores, single class") {
  const std::vector<bool> mask{false, false, true, true};
  const auto perfect = gsc::detection_metrics(std::vector<double>{0.9, 0.8, 0.1, 0.2}, mask);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.auc.value() == 1.0);
  CHECK(perfect.mean_clean.value() == doctest::Approx(0.85));
  CHECK(perfect.mean_noisy.value() == doctest::Approx(0.15));

  CHECK(gsc::detection_auc(std::vector<double>(4, 0.5), mask).value() == 0.5);

  const auto clean_only = gsc::detection_metrics(std::vector<double>{0.9, 0.2}, {false, false});
  CHECK_FALSE(clean_only.auc.has_value());
  CHECK_FALSE(clean_only.mean_noisy.has_value());
  CHECK(clean_only.accuracy == 0.5);
  CHECK_THROWS_AS(gsc::detection_metrics(std::vector<double>{0.9}, {false, true}), std::invalid_argument);
}

TEST_CASE("detection_auc: matches the pairwise oracle") {
  const std::vector<double> y{0.9, 0.4, 0.4, 0.7, 0.1, 0.65, 0.4, 0.3, 0.95, 0.2};
  const std::vector<bool> mask{false, true, false, false, true, true, true, false, false, true};
  CHECK(std::abs(gsc::detection_auc(y, mask).value() - oracle::auc(y, mask)) <= 1e-12);

  gsc::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    auto v = oracle::random_vector(n, rng);
    if (trial % 2 == 0)
      for (double& x : v) x = std::round(x * 4.0) / 4.0;
    std::vector<bool> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < 0.4;
    m[0] = false;
    m[1] = true;
    CHECK(std::abs(gsc::detection_auc(v, m).value() - oracle::auc(v, m)) <= 1e-12);
  }
}

TEST_CASE("report: assembly, JSON round trip and CSV") {
  const gsc::DirectionRecall d{10.0, 20.0, 30.0};
  const auto r = gsc::assemble_report(d, d, std::nullopt, {{"mode", "gsc"}});
  CHECK(r.retrieval.recall_sum == 120.0);
  CHECK_FALSE(r.detection.has_value());
  CHECK(gsc::report_from_json(gsc::to_json(r)) == r);

  gsc::DetectionReport det{0.9, 0.95, 0.8, 0.2};
  const auto full = gsc::assemble_report(d, {1.0, 2.0, 3.0}, det, {{"rho", 0.4}});
  CHECK(gsc::report_from_json(gsc::to_json(full)) == full);

  CHECK(gsc::summary_csv_header() == "mode,noise,r1_i2t,r5_i2t,r10_i2t,r1_t2i,r5_t2i,r10_t2i,rsum,det_acc,det_auc");
  CHECK(gsc::summary_csv_row("gsc", 0.4, full) == "gsc,0.40,10.00,20.00,30.00,1.00,2.00,3.00,66.00,0.9000,0.9500");
  CHECK(gsc::summary_csv_row("baseline", 0.0, r) == "baseline,0.00,10.00,20.00,30.00,10.00,20.00,30.00,120.00,NA,NA");
}

TEST_CASE("detection_auc: invariant under increasing transforms of the scores") {
  gsc::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    auto v = oracle::random_vector(n, rng);
    if (trial % 2 == 0)
      for (double& x : v) x = std::round(x * 4.0) / 4.0;
    std::vector<bool> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() < 0.5;
    m[0] = false;
    m[1] = true;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(2.0 * v[i]) - 3.0;
    CHECK(gsc::detection_auc(t, m).value() == gsc::detection_auc(v, m).value());
  }
}
