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

#include "gsc/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsc::kernels {
namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 16;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void softmax_row_inplace(std::span<const double> in, std::span<double> out, double inv_t) {
  double hi = in[0];
  for (double x : in) hi = std::max(hi, x);
  double sum = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std::exp((in[j] - hi) * inv_t);
    sum += out[j];
  }
  for (double& x : out) x /= sum;
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_abt: inner dimension mismatch");
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  Matrix out(n, m);
  const bool par = n * m * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i).data();
    double* oi = out.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.row(j).data();
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      oi[j] = acc;
    }
  }
  return out;
}

Matrix matmul_ab(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul_ab: inner dimension mismatch");
  const std::size_t n = a.rows(), m = b.cols(), k = a.cols();
  Matrix out(n, m);
  const bool par = n * m * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    double* oi = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) oi[j] += aip * bp[j];
    }
  }
  return out;
}

Matrix matmul_atb(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_atb: inner dimension mismatch");
  const std::size_t n = a.cols(), m = b.cols(), k = a.rows();
  Matrix out(n, m);
  const bool par = n * m * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    double* oi = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a(p, i);
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) oi[j] += api * bp[j];
    }
  }
  return out;
}

Matrix softmax_rows(const Matrix& m, double temperature) {
  Matrix out(m.rows(), m.cols());
  if (m.cols() == 0) return out;
  const double inv_t = 1.0 / temperature;
  const bool par = m.size() >= kParallelWork / 8;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m.rows(); ++i) softmax_row_inplace(m.row(i), out.row(i), inv_t);
  return out;
}

namespace serial {

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_abt: inner dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(j, p);
      out(i, j) = acc;
    }
  return out;
}

Matrix matmul_ab(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul_ab: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
      out(i, j) = acc;
    }
  return out;
}

Matrix matmul_atb(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_atb: inner dimension mismatch");
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) acc += a(p, i) * b(p, j);
      out(i, j) = acc;
    }
  return out;
}

Matrix softmax_rows(const Matrix& m, double temperature) {
  Matrix out(m.rows(), m.cols());
  if (m.cols() == 0) return out;
  for (std::size_t i = 0; i < m.rows(); ++i)
    softmax_row_inplace(m.row(i), out.row(i), 1.0 / temperature);
  return out;
}

}  // namespace serial
}  // namespace gsc::kernels
