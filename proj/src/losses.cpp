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

#include "gsc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gsc/kernels.hpp"

namespace gsc {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
}

void require_labels(std::span<const double> y, std::size_t n, const char* what) {
  if (y.size() != n) throw std::invalid_argument(std::string(what) + ": label length mismatch");
}

void check_finite(const Matrix& m, const char* stage) {
  if (!m.all_finite()) throw NumericalError(std::string("non-finite values in ") + stage);
}

std::vector<double> row_lse(const Matrix& m, double inv_t) {
  std::vector<double> out(m.rows());
  std::vector<double> buf(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) buf[j] = m(i, j) * inv_t;
    out[i] = logsumexp(buf);
  }
  return out;
}

std::vector<double> col_lse(const Matrix& m, double inv_t) {
  std::vector<double> out(m.cols());
  std::vector<double> buf(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) buf[i] = m(i, j) * inv_t;
    out[j] = logsumexp(buf);
  }
  return out;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// -log softmax(m * inv_t)[i, i] for every row, written as softplus of the
// off-diagonal log-sum-exp taken relative to the diagonal. Stays accurate when
// the diagonal probability is close to 1.
std::vector<double> diag_nll(const Matrix& m, double inv_t, bool by_column) {
  const std::size_t n = m.rows();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<double> buf(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      buf[k++] = ((by_column ? m(j, i) : m(i, j)) - m(i, i)) * inv_t;
    }
    out[i] = softplus(logsumexp(buf));
  }
  return out;
}

Matrix scale_columns(Matrix m, std::span<const double> w) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= w[j];
  return m;
}

std::vector<double> squared(std::span<const double> y) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * y[i];
  return out;
}

double im_from_agreement(const Matrix& w, double tau) {
  const auto nll = diag_nll(w, 1.0 / tau, false);
  double acc = 0.0;
  for (double v : nll) acc += v;
  return acc / static_cast<double>(w.rows());
}

double cm_from_similarity(const Matrix& sim, std::span<const double> y, double inv_t) {
  const auto rn = diag_nll(sim, inv_t, false);
  const auto cn = diag_nll(sim, inv_t, true);
  double acc = 0.0;
  for (std::size_t i = 0; i < sim.rows(); ++i) acc += y[i] * rn[i] + y[i] * cn[i];
  return acc / (2.0 * static_cast<double>(sim.rows()));
}

}  // namespace

double loss_cm(const Matrix& sim, std::span<const double> y, double tau) {
  require_square(sim, "loss_cm");
  require_labels(y, sim.rows(), "loss_cm");
  if (!(tau > 0.0)) throw std::invalid_argument("loss_cm: temperature must be positive");
  const std::size_t n = sim.rows();
  if (n == 0) return 0.0;
  return cm_from_similarity(sim, y, 1.0 / tau);
}

Matrix structure_agreement(const Matrix& img_sim, const Matrix& txt_sim, std::span<const double> y) {
  require_square(img_sim, "structure_agreement");
  require_square(txt_sim, "structure_agreement");
  if (img_sim.rows() != txt_sim.rows()) throw std::invalid_argument("structure_agreement: size mismatch");
  require_labels(y, img_sim.rows(), "structure_agreement");
  return kernels::matmul_abt(scale_columns(img_sim, squared(y)), txt_sim);
}

double loss_im(const Matrix& img_sim, const Matrix& txt_sim, std::span<const double> y, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("loss_im: temperature must be positive");
  const Matrix w = structure_agreement(img_sim, txt_sim, y);
  if (w.rows() == 0) return 0.0;
  return im_from_agreement(w, tau);
}

LossReport total_loss(double l_cm, double l_im, double gamma) {
  return {l_cm, l_im, l_cm + gamma * l_im, gamma};
}

EmbeddingGrad embedding_loss_grad(const Matrix& img_emb, const Matrix& txt_emb,
                                  std::span<const double> y, const LossConfig& cfg) {
  const std::size_t n = img_emb.rows();
  if (txt_emb.rows() != n || img_emb.cols() != txt_emb.cols()) {
    throw std::invalid_argument("embedding_loss_grad: embedding shapes differ");
  }
  require_labels(y, n, "embedding_loss_grad");
  const double bn = static_cast<double>(n);

  // Cross-modal part. dL/dS_ij = (y_i (R_ij - d_ij) + y_j (C_ij - d_ij)) / (2 B tau)
  const Matrix sim = kernels::matmul_abt(img_emb, txt_emb);
  check_finite(sim, "cross-modal similarity");
  const double inv_cm = 1.0 / cfg.tau_cm;
  const auto rl = row_lse(sim, inv_cm);
  const auto cl = col_lse(sim, inv_cm);
  Matrix g_sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = sim(i, j) * inv_cm;
      const double delta = i == j ? 1.0 : 0.0;
      const double r = std::exp(s - rl[i]);
      const double c = std::exp(s - cl[j]);
      g_sim(i, j) = (y[i] * (r - delta) + y[j] * (c - delta)) * inv_cm / (2.0 * bn);
    }
  }
  const double l_cm = cm_from_similarity(sim, y, inv_cm);

  // Intra-modal part. W = P D Q^T with D = diag(y^2); dL/dW = (M - I) / (B tau2).
  const Matrix img_sim = kernels::matmul_abt(img_emb, img_emb);
  const Matrix txt_sim = kernels::matmul_abt(txt_emb, txt_emb);
  const auto y2 = squared(y);
  const Matrix w = kernels::matmul_abt(scale_columns(img_sim, y2), txt_sim);
  check_finite(w, "structure agreement");
  const double l_im = im_from_agreement(w, cfg.tau_im);

  Matrix g_w = kernels::softmax_rows(w, cfg.tau_im);
  for (std::size_t i = 0; i < n; ++i) g_w(i, i) -= 1.0;
  for (double& v : g_w.flat()) v /= bn * cfg.tau_im;
  const Matrix g_img_sim = scale_columns(kernels::matmul_ab(g_w, txt_sim), y2);
  const Matrix g_txt_sim = scale_columns(kernels::matmul_atb(g_w, img_sim), y2);

  // P = U U^T gives dU = (G_P + G_P^T) U; S = U V^T gives dU = G_S V, dV = G_S^T U.
  auto symmetrized = [&](const Matrix& g) {
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s(i, j) = cfg.gamma * (g(i, j) + g(j, i));
    return s;
  };
  Matrix d_img = kernels::matmul_ab(g_sim, txt_emb);
  Matrix d_txt = kernels::matmul_atb(g_sim, img_emb);
  const Matrix d_img_im = kernels::matmul_ab(symmetrized(g_img_sim), img_emb);
  const Matrix d_txt_im = kernels::matmul_ab(symmetrized(g_txt_sim), txt_emb);
  for (std::size_t i = 0; i < d_img.size(); ++i) {
    d_img.flat()[i] += d_img_im.flat()[i];
    d_txt.flat()[i] += d_txt_im.flat()[i];
  }
  check_finite(d_img, "image embedding gradient");
  check_finite(d_txt, "text embedding gradient");
  return {total_loss(l_cm, l_im, cfg.gamma), std::move(d_img), std::move(d_txt)};
}

BatchLoss loss_and_grad(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                        std::span<const double> y, const LossConfig& cfg) {
  const Encoded img = encode(net.img, img_x, Modality::image);
  const Encoded txt = encode(net.txt, txt_x, Modality::text);
  check_finite(img.embedding.rows, "image embeddings");
  check_finite(txt.embedding.rows, "text embeddings");
  EmbeddingGrad eg = embedding_loss_grad(img.embedding.rows, txt.embedding.rows, y, cfg);
  BatchLoss out{eg.report, {backprop(net.img, img.cache, eg.img), backprop(net.txt, txt.cache, eg.txt)}};
  if (!out.grad.all_finite()) throw NumericalError("non-finite values in parameter gradients");
  return out;
}

NetworkGrad grad_total(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                       std::span<const double> y, const LossConfig& cfg) {
  return loss_and_grad(net, img_x, txt_x, y, cfg).grad;
}

LossReport batch_loss(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                      std::span<const double> y, const LossConfig& cfg) {
  const Encoded img = encode(net.img, img_x, Modality::image);
  const Encoded txt = encode(net.txt, txt_x, Modality::text);
  const Matrix sim = sim_matrix(img.embedding, txt.embedding);
  const double l_cm = loss_cm(sim, y, cfg.tau_cm);
  const double l_im = loss_im(sim_matrix(img.embedding, img.embedding),
                              sim_matrix(txt.embedding, txt.embedding), y, cfg.tau_im);
  return total_loss(l_cm, l_im, cfg.gamma);
}

double fd_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

FdReport fd_check_gradient(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                           std::span<const double> y, const LossConfig& cfg,
                           const NetworkGrad& analytic, double h, double tol) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_check: step must be positive");
  FdReport report;
  Network probe = net;

  auto visit = [&](Encoder& enc, const EncoderGrad& grad, const std::string& name) {
    auto& layers = enc.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto check_tensor = [&](std::span<double> params, std::span<const double> g,
                              const std::string& tensor) {
        for (std::size_t p = 0; p < params.size(); ++p) {
          const double saved = params[p];
          params[p] = saved + h;
          const double up = batch_loss(probe, img_x, txt_x, y, cfg).total;
          params[p] = saved - h;
          const double down = batch_loss(probe, img_x, txt_x, y, cfg).total;
          params[p] = saved;
          const double numeric = (up - down) / (2.0 * h);
          const double err = fd_relative_error(g[p], numeric);
          ++report.checked;
          if (err > report.max_rel_error || report.worst_parameter.empty()) {
            report.max_rel_error = err;
            report.worst_parameter = name + ".layer" + std::to_string(l) + "." + tensor + "[" +
                                     std::to_string(p) + "]";
            report.worst_analytic = g[p];
            report.worst_numeric = numeric;
          }
        }
      };
      check_tensor(layers[l].weight.flat(), grad.weight.at(l).flat(), "weight");
      check_tensor(layers[l].bias, grad.bias.at(l), "bias");
    }
  };
  visit(probe.img, analytic.img, "img");
  visit(probe.txt, analytic.txt, "txt");
  report.passed = (std::isinf(tol) && tol > 0.0) || report.max_rel_error < tol;
  return report;
}

FdReport fd_check(const Network& net, const Matrix& img_x, const Matrix& txt_x,
                  std::span<const double> y, const LossConfig& cfg, double h, double tol) {
  return fd_check_gradient(net, img_x, txt_x, y, cfg, grad_total(net, img_x, txt_x, y, cfg), h, tol);
}

}  // namespace gsc
