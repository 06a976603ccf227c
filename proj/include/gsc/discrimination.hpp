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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsc/numerics.hpp"

namespace gsc {

/// Bidirectional correspondence indicator of a square similarity matrix whose
/// diagonal holds the positive pairs: the mean of the row-softmax and the
/// column-softmax probability of each diagonal entry at temperature tau.
std::vector<double> cross_modal_indicator(const Matrix& sim, double tau);

struct StructureScores {
  std::vector<double> score;
  std::vector<bool> degenerate;  // weighted structure row had zero norm; score set to 0
};

/// Cosine between row i of the image-image and text-text similarity matrices,
/// with entry j of both rows scaled by weight[j].
StructureScores intra_structure_score(const Matrix& img_sim, const Matrix& txt_sim,
                                      std::span<const double> weight);

/// Two-component 1-D Gaussian mixture.
struct GmmModel {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> variance{1.0, 1.0};
  std::size_t clean = 0;  // index of the higher-mean component
  std::vector<double> log_likelihood;  // total log-likelihood before each M-step, then final
  std::size_t iterations = 0;
};

struct GmmOptions {
  std::size_t max_iters = 50;
  double variance_floor = 1e-4;
  double tolerance = 1e-8;
};

/// EM fit initialised by splitting the sorted scores at the median.
GmmModel gmm_fit(std::span<const double> scores, const GmmOptions& options = {});

double gmm_log_likelihood(const GmmModel& g, std::span<const double> scores);

/// Posterior probability that s was drawn from the clean component.
double gmm_posterior(const GmmModel& g, double s);

std::vector<double> combine_labels(std::span<const double> y_cm, std::span<const double> y_im);

/// Per-sample soft correspondence labels and their previous-epoch values.
struct SoftLabels {
  std::vector<double> y_cm;
  std::vector<double> y_im;
  std::vector<double> y;
  std::vector<double> prev_cm;
  std::vector<double> prev_im;
  std::size_t epoch = 0;
  std::string source;  // network whose outputs produced the estimates

  static SoftLabels ones(std::size_t n, std::string source);
  static SoftLabels from_estimates(std::vector<double> y_cm, std::vector<double> y_im,
                                   std::string source);

  std::size_t size() const noexcept { return y.size(); }
};

/// Momentum blend of new estimates into the stored labels, followed by the
/// elementwise minimum.
SoftLabels ensemble_update(const SoftLabels& labels, std::span<const double> new_cm,
                           std::span<const double> new_im, double beta_cm, double beta_im);

}  // namespace gsc
