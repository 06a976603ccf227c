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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsc/model.hpp"
#include "gsc/numerics.hpp"

namespace gsc {

/// Soft-label weighted bidirectional InfoNCE over a square similarity matrix
/// whose diagonal holds the positive pairs.
double loss_cm(const Matrix& sim, std::span<const double> y, double tau);

/// Contrastive loss over structure agreement: w_ij = sum_k y_k^2 P_ik Q_jk
/// for image structure P and text structure Q, softmax over j, target j = i.
double loss_im(const Matrix& img_sim, const Matrix& txt_sim, std::span<const double> y, double tau);

/// The structure agreement matrix w used by loss_im.
Matrix structure_agreement(const Matrix& img_sim, const Matrix& txt_sim, std::span<const double> y);

struct LossReport {
  double l_cm = 0.0;
  double l_im = 0.0;
  double total = 0.0;
  double gamma = 0.0;
};

LossReport total_loss(double l_cm, double l_im, double gamma);

struct LossConfig {
  double tau_cm = 0.07;
  double tau_im = 1.0;
  double gamma = 0.01;
};

struct NetworkGrad {
  EncoderGrad img;
  EncoderGrad txt;

  bool all_finite() const { return img.all_finite() && txt.all_finite(); }
};

/// Gradients of the batch loss w.r.t. the two embedding matrices.
struct EmbeddingGrad {
  LossReport report;
  Matrix img;
  Matrix txt;
};

/// Loss and its gradient w.r.t. unit-norm image and text embeddings.
EmbeddingGrad embedding_loss_grad(const Matrix& img_emb, const Matrix& txt_emb,
                                  std::span<const double> y, const LossConfig& cfg);

struct BatchLoss {
  LossReport report;
  NetworkGrad grad;
};

/// Forward, loss and full backward pass for one batch. Row i of txt_x is the
/// text paired with row i of img_x. Labels are constants.
BatchLoss loss_and_grad(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                        std::span<const double> y, const LossConfig& cfg);

NetworkGrad grad_total(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                       std::span<const double> y, const LossConfig& cfg);

/// Forward-only batch loss.
LossReport batch_loss(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                      std::span<const double> y, const LossConfig& cfg);

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Relative error with a floor on the denominator so that coordinates whose
/// true gradient is ~0 are judged on absolute error.
double fd_relative_error(double analytic, double numeric);

/// Compares `analytic` against central differences of batch_loss.
FdReport fd_check_gradient(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                           std::span<const double> y, const LossConfig& cfg,
                           const NetworkGrad& analytic, double h, double tol);

FdReport fd_check(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                  std::span<const double> y, const LossConfig& cfg, double h, double tol);

}  // namespace gsc
