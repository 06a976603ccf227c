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

#include "gsc/discrimination.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gsc {

std::vector<double> cross_modal_indicator(const Matrix& sim, double tau) {
  if (sim.rows() != sim.cols()) throw std::invalid_argument("cross_modal_indicator: matrix not square");
  if (!(tau > 0.0)) throw std::invalid_argument("cross_modal_indicator: temperature must be positive");
  if (!sim.all_finite()) throw std::invalid_argument("cross_modal_indicator: non-finite input");
  const std::size_t n = sim.rows();
  std::vector<double> scaled(n);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) scaled[j] = sim(i, j) / tau;
    const double row_lse = logsumexp(scaled);
    for (std::size_t j = 0; j < n; ++j) scaled[j] = sim(j, i) / tau;
    const double col_lse = logsumexp(scaled);
    const double diag = sim(i, i) / tau;
    out[i] = 0.5 * (std::exp(diag - row_lse) + std::exp(diag - col_lse));
  }
  return out;
}

StructureScores intra_structure_score(const Matrix& img_sim, const Matrix& txt_sim,
                                      std::span<const double> weight) {
  const std::size_t n = img_sim.rows();
  if (img_sim.cols() != n || txt_sim.rows() != n || txt_sim.cols() != n) {
    throw std::invalid_argument("intra_structure_score: structures must be square and equal-sized");
  }
  if (weight.size() != n) throw std::invalid_argument("intra_structure_score: weight length mismatch");

  StructureScores out{std::vector<double>(n, 0.0), std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) {
    double num = 0.0, img_sq = 0.0, txt_sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = weight[j] * img_sim(i, j);
      const double b = weight[j] * txt_sim(i, j);
      num += a * b;
      img_sq += a * a;
      txt_sq += b * b;
    }
    if (img_sq == 0.0 || txt_sq == 0.0) {
      out.degenerate[i] = true;
      continue;
    }
    out.score[i] = std::clamp(num / (std::sqrt(img_sq) * std::sqrt(txt_sq)), -1.0, 1.0);
  }
  return out;
}

namespace {

double log_component(const GmmModel& g, std::size_t k, double s) {
  const double d = s - g.mean[k];
  return std::log(g.weight[k]) - 0.5 * std::log(2.0 * std::numbers::pi * g.variance[k]) -
         0.5 * d * d / g.variance[k];
}

double log_mix(const GmmModel& g, double s) {
  const std::array<double, 2> lp{log_component(g, 0, s), log_component(g, 1, s)};
  return logsumexp(lp);
}

void set_clean_component(GmmModel& g) { g.clean = g.mean[1] > g.mean[0] ? 1 : 0; }

}  // namespace

double gmm_log_likelihood(const GmmModel& g, std::span<const double> scores) {
  double ll = 0.0;
  for (double s : scores) ll += log_mix(g, s);
  return ll;
}

GmmModel gmm_fit(std::span<const double> scores, const GmmOptions& options) {
  if (scores.size() < 4) throw std::invalid_argument("gmm_fit: need at least 4 scores");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("gmm_fit: non-finite score");
  if (!(options.variance_floor > 0.0)) throw std::invalid_argument("gmm_fit: variance floor must be positive");

  const std::size_t n = scores.size();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::ranges::sort(sorted);

  GmmModel g;
  const std::size_t half = n / 2;
  const std::array<std::span<const double>, 2> halves{std::span<const double>(sorted).first(half),
                                                      std::span<const double>(sorted).subspan(half)};
  for (std::size_t k = 0; k < 2; ++k) {
    double mu = 0.0;
    for (double s : halves[k]) mu += s;
    mu /= static_cast<double>(halves[k].size());
    double var = 0.0;
    for (double s : halves[k]) var += (s - mu) * (s - mu);
    var /= static_cast<double>(halves[k].size());
    g.mean[k] = mu;
    g.variance[k] = std::max(var, options.variance_floor);
    g.weight[k] = 0.5;
  }

  std::vector<double> resp(n);  // responsibility of component 1
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 2> lp{log_component(g, 0, scores[i]), log_component(g, 1, scores[i])};
      const double lse = logsumexp(lp);
      ll += lse;
      resp[i] = std::exp(lp[1] - lse);
    }
    if (!g.log_likelihood.empty() && ll - g.log_likelihood.back() < options.tolerance) {
      g.log_likelihood.push_back(ll);
      break;
    }
    g.log_likelihood.push_back(ll);

    std::array<double, 2> mass{0.0, 0.0}, first{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 2> r{1.0 - resp[i], resp[i]};
      for (std::size_t k = 0; k < 2; ++k) {
        mass[k] += r[k];
        first[k] += r[k] * scores[i];
      }
    }
    for (std::size_t k = 0; k < 2; ++k) {
      // An empty component keeps its previous location.
      if (mass[k] <= 1e-12) continue;
      g.mean[k] = first[k] / mass[k];
    }
    std::array<double, 2> second{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 2> r{1.0 - resp[i], resp[i]};
      for (std::size_t k = 0; k < 2; ++k) {
        const double d = scores[i] - g.mean[k];
        second[k] += r[k] * d * d;
      }
    }
    for (std::size_t k = 0; k < 2; ++k) {
      if (mass[k] > 1e-12) g.variance[k] = std::max(second[k] / mass[k], options.variance_floor);
      g.weight[k] = std::max(mass[k] / static_cast<double>(n), 1e-12);
    }
    const double total = g.weight[0] + g.weight[1];
    g.weight[0] /= total;
    g.weight[1] /= total;
    ++g.iterations;
  }
  if (g.log_likelihood.size() == g.iterations) g.log_likelihood.push_back(gmm_log_likelihood(g, scores));
  set_clean_component(g);
  return g;
}

double gmm_posterior(const GmmModel& g, double s) {
  const std::array<double, 2> lp{log_component(g, 0, s), log_component(g, 1, s)};
  return std::exp(lp[g.clean] - logsumexp(lp));
}

std::vector<double> combine_labels(std::span<const double> y_cm, std::span<const double> y_im) {
  if (y_cm.size() != y_im.size()) throw std::invalid_argument("combine_labels: length mismatch");
  std::vector<double> y(y_cm.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(y_cm[i], y_im[i]);
  return y;
}

SoftLabels SoftLabels::ones(std::size_t n, std::string source) {
  return from_estimates(std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), std::move(source));
}

SoftLabels SoftLabels::from_estimates(std::vector<double> y_cm, std::vector<double> y_im,
                                      std::string source) {
  SoftLabels labels;
  labels.y = combine_labels(y_cm, y_im);
  labels.prev_cm = y_cm;
  labels.prev_im = y_im;
  labels.y_cm = std::move(y_cm);
  labels.y_im = std::move(y_im);
  labels.source = std::move(source);
  return labels;
}

SoftLabels ensemble_update(const SoftLabels& labels, std::span<const double> new_cm,
                           std::span<const double> new_im, double beta_cm, double beta_im) {
  if (!(beta_cm >= 0.0 && beta_cm <= 1.0) || !(beta_im >= 0.0 && beta_im <= 1.0)) {
    throw std::invalid_argument("ensemble_update: momentum must lie in [0, 1]");
  }
  const std::size_t n = labels.size();
  if (new_cm.size() != n || new_im.size() != n) throw std::invalid_argument("ensemble_update: length mismatch");

  SoftLabels out;
  out.prev_cm = labels.y_cm;
  out.prev_im = labels.y_im;
  out.y_cm.resize(n);
  out.y_im.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.y_cm[i] = beta_cm * new_cm[i] + (1.0 - beta_cm) * labels.y_cm[i];
    out.y_im[i] = beta_im * new_im[i] + (1.0 - beta_im) * labels.y_im[i];
  }
  out.y = combine_labels(out.y_cm, out.y_im);
  out.epoch = labels.epoch + 1;
  out.source = labels.source;
  return out;
}

}  // namespace gsc
