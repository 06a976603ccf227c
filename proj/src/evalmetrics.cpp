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

#include "gsc/evalmetrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace gsc {

double recall_at_k(const Matrix& sim, std::span<const std::size_t> gt, std::size_t k) {
  const std::size_t n = sim.rows();
  if (sim.cols() != n) throw std::invalid_argument("recall_at_k: similarity matrix not square");
  if (gt.size() != n) throw std::invalid_argument("recall_at_k: ground truth length mismatch");
  if (k == 0 || k > n) throw std::invalid_argument("recall_at_k: K must lie in [1, N]");
  if (n == 0) return 0.0;

  long hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static) if (n * n >= (1 << 16))
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t target = gt[i];
    const double s = sim(i, target);
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = sim(i, j);
      if (v > s || (v == s && j < target)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size(), perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || inv[perm[i]] != perm.size()) {
      throw std::invalid_argument("inverse_permutation: not a permutation");
    }
    inv[perm[i]] = i;
  }
  return inv;
}

RetrievalReport evaluate_retrieval(const Matrix& sim, std::span<const std::size_t> gt) {
  const std::size_t n = sim.rows();
  auto at = [n](std::size_t k) { return std::min(k, n); };
  const Matrix sim_t = sim.transposed();
  const auto gt_t = inverse_permutation(gt);
  RetrievalReport r;
  r.i2t = {recall_at_k(sim, gt, at(1)), recall_at_k(sim, gt, at(5)), recall_at_k(sim, gt, at(10))};
  r.t2i = {recall_at_k(sim_t, gt_t, at(1)), recall_at_k(sim_t, gt_t, at(5)),
           recall_at_k(sim_t, gt_t, at(10))};
  r.recall_sum = r.i2t.r1 + r.i2t.r5 + r.i2t.r10 + r.t2i.r1 + r.t2i.r5 + r.t2i.r10;
  return r;
}

std::optional<double> detection_auc(std::span<const double> y, const std::vector<bool>& noise_mask) {
  const std::size_t n = y.size();
  if (noise_mask.size() != n) throw std::invalid_argument("detection_auc: length mismatch");
  const auto n_noisy = static_cast<std::size_t>(std::count(noise_mask.begin(), noise_mask.end(), true));
  const std::size_t n_clean = n - n_noisy;
  if (n_noisy == 0 || n_clean == 0) return std::nullopt;

  // Mann-Whitney U from mid-ranks.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  double clean_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && y[order[hi]] == y[order[lo]]) ++hi;
    const double mid_rank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t t = lo; t < hi; ++t)
      if (!noise_mask[order[t]]) clean_rank_sum += mid_rank;
    lo = hi;
  }
  const double nc = static_cast<double>(n_clean);
  const double u = clean_rank_sum - nc * (nc + 1.0) / 2.0;
  return u / (nc * static_cast<double>(n_noisy));
}

DetectionReport detection_metrics(std::span<const double> y, const std::vector<bool>& noise_mask) {
  if (noise_mask.size() != y.size()) throw std::invalid_argument("detection_metrics: length mismatch");
  if (y.empty()) throw std::invalid_argument("detection_metrics: empty input");
  DetectionReport r;
  std::size_t correct = 0, n_clean = 0, n_noisy = 0;
  double sum_clean = 0.0, sum_noisy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool clean = !noise_mask[i];
    if ((y[i] >= 0.5) == clean) ++correct;
    if (clean) {
      ++n_clean;
      sum_clean += y[i];
    } else {
      ++n_noisy;
      sum_noisy += y[i];
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
  if (n_clean > 0) r.mean_clean = sum_clean / static_cast<double>(n_clean);
  if (n_noisy > 0) r.mean_noisy = sum_noisy / static_cast<double>(n_noisy);
  r.auc = detection_auc(y, noise_mask);
  return r;
}

Report assemble_report(const DirectionRecall& i2t, const DirectionRecall& t2i,
                       std::optional<DetectionReport> detection, nlohmann::json meta) {
  Report r;
  r.meta = std::move(meta);
  r.retrieval.i2t = i2t;
  r.retrieval.t2i = t2i;
  r.retrieval.recall_sum = i2t.r1 + i2t.r5 + i2t.r10 + t2i.r1 + t2i.r5 + t2i.r10;
  r.detection = std::move(detection);
  return r;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::json direction_json(const DirectionRecall& d) {
  return {{"r1", d.r1}, {"r5", d.r5}, {"r10", d.r10}};
}

DirectionRecall direction_from(const nlohmann::json& j) {
  return {j.at("r1").get<double>(), j.at("r5").get<double>(), j.at("r10").get<double>()};
}

std::string csv_number(const std::optional<double>& v) {
  return v ? fmt::format("{:.4f}", *v) : std::string("NA");
}

}  // namespace

nlohmann::json to_json(const Report& report) {
  nlohmann::json j;
  j["meta"] = report.meta;
  j["retrieval"] = {{"i2t", direction_json(report.retrieval.i2t)},
                    {"t2i", direction_json(report.retrieval.t2i)},
                    {"recall_sum", report.retrieval.recall_sum}};
  if (report.detection) {
    const auto& d = *report.detection;
    j["detection"] = {{"accuracy", d.accuracy},
                      {"auc", optional_json(d.auc)},
                      {"mean_clean", optional_json(d.mean_clean)},
                      {"mean_noisy", optional_json(d.mean_noisy)}};
  } else {
    j["detection"] = nullptr;
  }
  return j;
}

Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.meta = j.value("meta", nlohmann::json::object());
    const auto& ret = j.at("retrieval");
    r.retrieval.i2t = direction_from(ret.at("i2t"));
    r.retrieval.t2i = direction_from(ret.at("t2i"));
    r.retrieval.recall_sum = ret.at("recall_sum").get<double>();
    if (j.contains("detection") && !j.at("detection").is_null()) {
      const auto& d = j.at("detection");
      r.detection = DetectionReport{d.at("accuracy").get<double>(), optional_from(d, "auc"),
                                    optional_from(d, "mean_clean"), optional_from(d, "mean_noisy")};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("report json: ") + e.what());
  }
}

std::string summary_csv_header() {
  return "mode,noise,r1_i2t,r5_i2t,r10_i2t,r1_t2i,r5_t2i,r10_t2i,rsum,det_acc,det_auc";
}

std::string summary_csv_row(const std::string& mode, double noise, const Report& report) {
  const auto& r = report.retrieval;
  std::optional<double> acc, auc;
  if (report.detection) {
    acc = report.detection->accuracy;
    auc = report.detection->auc;
  }
  return fmt::format("{},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{},{}", mode, noise,
                     r.i2t.r1, r.i2t.r5, r.i2t.r10, r.t2i.r1, r.t2i.r5, r.t2i.r10, r.recall_sum,
                     csv_number(acc), csv_number(auc));
}

}  // namespace gsc
