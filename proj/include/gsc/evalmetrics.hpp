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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsc/numerics.hpp"

namespace gsc {

/// Percentage of queries (rows of sim) whose ground-truth column ranks within
/// the top k. Ties go to the lower column index.
double recall_at_k(const Matrix& sim, std::span<const std::size_t> gt, std::size_t k);

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm);

struct DirectionRecall {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;

  bool operator==(const DirectionRecall&) const = default;
};

struct RetrievalReport {
  DirectionRecall i2t;
  DirectionRecall t2i;
  double recall_sum = 0.0;

  bool operator==(const RetrievalReport&) const = default;
};

/// Both retrieval directions for an image x text similarity matrix where
/// gt[i] is the text matched to image i. K is capped at N for tiny sets.
RetrievalReport evaluate_retrieval(const Matrix& sim, std::span<const std::size_t> gt);

struct DetectionReport {
  double accuracy = 0.0;
  std::optional<double> auc;  // empty when only one class is present
  std::optional<double> mean_clean;
  std::optional<double> mean_noisy;

  bool operator==(const DetectionReport&) const = default;
};

/// Area under the ROC curve of y with clean (mask == false) as the positive
/// class; tied scores count one half.
std::optional<double> detection_auc(std::span<const double> y, const std::vector<bool>& noise_mask);

DetectionReport detection_metrics(std::span<const double> y, const std::vector<bool>& noise_mask);

struct Report {
  nlohmann::json meta = nlohmann::json::object();
  RetrievalReport retrieval;
  std::optional<DetectionReport> detection;

  bool operator==(const Report&) const = default;
};

Report assemble_report(const DirectionRecall& i2t, const DirectionRecall& t2i,
                       std::optional<DetectionReport> detection, nlohmann::json meta);

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

std::string summary_csv_header();
std::string summary_csv_row(const std::string& mode, double noise, const Report& report);

}  // namespace gsc
