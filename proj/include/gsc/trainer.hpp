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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsc/discrimination.hpp"
#include "gsc/evalmetrics.hpp"
#include "gsc/losses.hpp"
#include "gsc/model.hpp"
#include "gsc/synthdata.hpp"

namespace gsc {

enum class Mode { gsc, baseline, cm_only, im_only, single_net, no_ensemble };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
  double tau_cm = 0.07;
  double tau_im = 1.0;
  double gamma = 0.01;
  double beta_cm = 0.7;
  double beta_im = 0.7;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  double lr = 1e-2;
  double lr_decay = 0.2;
  std::size_t lr_decay_epoch = 15;
  std::size_t warmup_epochs = 1;
  std::uint64_t seed = 0;
  Mode mode = Mode::gsc;
  std::size_t embed_dim = 32;
  std::vector<std::size_t> hidden{64};
  GmmOptions gmm;

  void validate() const;
  /// Applies the fixed per-mode overrides (no_ensemble: momentum 1 and five
  /// warm-up epochs).
  TrainConfig resolved() const;
  LossConfig loss() const { return {tau_cm, tau_im, gamma}; }
  std::size_t network_count() const { return mode == Mode::single_net ? 1 : 2; }
};

/// Learning rate for 1-based training epoch `epoch`; warm-up uses epoch 0.
double lr_for_epoch(const TrainConfig& cfg, std::size_t epoch);

nlohmann::json to_json(const TrainConfig& cfg);
/// Reads flat keys over `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Index batches over a fresh shuffle. A trailing batch with fewer than two
/// samples is merged into the one before it.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng);

/// One network and the labels it trains with.
struct NetSlot {
  std::string name;
  Network net;
  SoftLabels labels;  // labels.source names the network that estimated them
};

struct EpochMetrics {
  std::size_t epoch = 0;
  Mode mode = Mode::gsc;
  double loss_cm = 0.0;
  double loss_im = 0.0;
  double lr = 0.0;
  double dev_r1_i2t = 0.0;
  double dev_r1_t2i = 0.0;
  double recall_sum = 0.0;
  double det_acc = 0.0;
  std::optional<double> det_auc;

  bool operator==(const EpochMetrics&) const = default;
};

nlohmann::json to_json(const EpochMetrics& m);

struct RunState {
  std::vector<NetSlot> slots;
  std::size_t epoch = 0;  // completed training epochs after warm-up
  bool warmed_up = false;
  std::vector<EpochMetrics> history;
};

/// Paired training features: row i of txt is the text paired with image i.
struct TrainData {
  Matrix img;
  Matrix txt;
  std::vector<bool> noise_mask;

  static TrainData from(const PairDataset& ds);
  std::size_t size() const { return img.rows(); }
};

/// Raw per-sample estimates from one pass of a network.
struct Estimates {
  std::vector<double> y_cm;
  std::vector<double> structure;  // intra-modal structure scores
  std::vector<double> y_im;       // GMM posterior of structure
  std::optional<GmmModel> gmm;
};

RunState init_state(const TrainConfig& cfg, const TrainData& data);

/// Trains every network with y = 1 for cfg.warmup_epochs, then initialises the
/// label stores from one estimation pass (all-ones when warmup_epochs is 0).
void warmup(RunState& state, const TrainData& data, const TrainConfig& cfg);

/// One epoch over all networks; label stores are updated at the end.
void train_epoch(RunState& state, const TrainData& data, const TrainConfig& cfg);

/// Estimates for every training sample from `net` using `weights` to purify
/// the structure score; batches drawn from rng.
Estimates estimate_labels(const Network& net, const TrainData& data, std::span<const double> weights,
                          const TrainConfig& cfg, Rng& rng);

/// Similarity between every image and every text averaged over the networks.
Matrix ensemble_similarity(const std::vector<NetSlot>& slots, const Matrix& img, const Matrix& txt);

RetrievalReport evaluate(const std::vector<NetSlot>& slots, const PairDataset& ds);

/// Label vector reported for detection: mean over the networks' combined labels.
std::vector<double> consensus_labels(const std::vector<NetSlot>& slots);

struct RunResult {
  std::vector<EpochMetrics> history;
  std::vector<NetSlot> best;  // checkpoint with the highest dev recall sum
  std::size_t best_epoch = 0;
  std::vector<NetSlot> final;
  std::vector<double> final_labels;
};

using EpochObserver = std::function<void(const RunState&, const EpochMetrics&)>;

/// Warm-up, cfg.epochs training epochs, dev evaluation after each (epoch 0
/// is the warm-up state) and best-checkpoint selection.
RunResult run(const TrainConfig& cfg, const PairDataset& train, const PairDataset& dev,
              const EpochObserver& observer = {});

}  // namespace gsc
