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

#pragma once

// Dense kernels used by the encoders, the similarity structures and the loss
// gradients. The functions in gsc::kernels are OpenMP-parallel over output
// rows; gsc::kernels::serial holds the plain reference loops. Both accumulate
// each output element in the same order, so their results are bitwise equal
// and the thread count never changes a training run.

#include "gsc/numerics.hpp"

namespace gsc::kernels {

/// a * b^T for a (n x k), b (m x k).
Matrix matmul_abt(const Matrix& a, const Matrix& b);
/// a * b for a (n x k), b (k x m).
Matrix matmul_ab(const Matrix& a, const Matrix& b);
/// a^T * b for a (k x n), b (k x m).
Matrix matmul_atb(const Matrix& a, const Matrix& b);
/// Row softmax of m / temperature. No argument validation.
Matrix softmax_rows(const Matrix& m, double temperature);

int max_threads();

namespace serial {
Matrix matmul_abt(const Matrix& a, const Matrix& b);
Matrix matmul_ab(const Matrix& a, const Matrix& b);
Matrix matmul_atb(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m, double temperature);
}  // namespace serial

}  // namespace gsc::kernels
