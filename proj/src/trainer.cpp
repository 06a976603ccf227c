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

#include "gsc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsc/kernels.hpp"

namespace gsc {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::gsc: return "gsc";
    case Mode::baseline: return "baseline";
    case Mode::cm_only: return "cm_only";
    case Mode::im_only: return "im_only";
    case Mode::single_net: return "single_net";
    case Mode::no_ensemble: return "no_ensemble";
  }
  return "gsc";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::gsc, Mode::baseline, Mode::cm_only, Mode::im_only, Mode::single_net,
                 Mode::no_ensemble}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown mode: " + s);
}

void TrainConfig::validate() const {
  if (!(tau_cm > 0.0) || !(tau_im > 0.0)) throw std::invalid_argument("temperatures must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
  if (!(beta_cm >= 0.0 && beta_cm <= 1.0) || !(beta_im >= 0.0 && beta_im <= 1.0)) {
    throw std::invalid_argument("momentum values must lie in [0, 1]");
  }
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("learning-rate decay must be positive");
  if (embed_dim == 0) throw std::invalid_argument("embedding dim must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw std::invalid_argument("hidden dims must be positive");
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig out = *this;
  if (mode == Mode::no_ensemble) {
    out.beta_cm = 1.0;
    out.beta_im = 1.0;
    out.warmup_epochs = 5;
  }
  out.validate();
  return out;
}

double lr_for_epoch(const TrainConfig& cfg, std::size_t epoch) {
  return epoch > cfg.lr_decay_epoch ? cfg.lr * cfg.lr_decay : cfg.lr;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"tau_cm", cfg.tau_cm},
          {"tau_im", cfg.tau_im},
          {"gamma", cfg.gamma},
          {"beta_cm", cfg.beta_cm},
          {"beta_im", cfg.beta_im},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"lr", cfg.lr},
          {"lr_decay", cfg.lr_decay},
          {"lr_decay_epoch", cfg.lr_decay_epoch},
          {"warmup_epochs", cfg.warmup_epochs},
          {"seed", cfg.seed},
          {"mode", to_string(cfg.mode)},
          {"embed_dim", cfg.embed_dim},
          {"hidden", cfg.hidden},
          {"gmm_max_iters", cfg.gmm.max_iters},
          {"gmm_variance_floor", cfg.gmm.variance_floor},
          {"gmm_tolerance", cfg.gmm.tolerance}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "tau_cm") cfg.tau_cm = value.get<double>();
      else if (key == "tau_im") cfg.tau_im = value.get<double>();
      else if (key == "gamma") cfg.gamma = value.get<double>();
      else if (key == "beta_cm") cfg.beta_cm = value.get<double>();
      else if (key == "beta_im") cfg.beta_im = value.get<double>();
      else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
      else if (key == "lr") cfg.lr = value.get<double>();
      else if (key == "lr_decay") cfg.lr_decay = value.get<double>();
      else if (key == "lr_decay_epoch") cfg.lr_decay_epoch = value.get<std::size_t>();
      else if (key == "warmup_epochs") cfg.warmup_epochs = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "mode") cfg.mode = mode_from_string(value.get<std::string>());
      else if (key == "embed_dim") cfg.embed_dim = value.get<std::size_t>();
      else if (key == "hidden") cfg.hidden = value.get<std::vector<std::size_t>>();
      else if (key == "gmm_max_iters") cfg.gmm.max_iters = value.get<std::size_t>();
      else if (key == "gmm_variance_floor") cfg.gmm.variance_floor = value.get<double>();
      else if (key == "gmm_tolerance") cfg.gmm.tolerance = value.get<double>();
      else throw std::invalid_argument("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be positive");
  const std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

nlohmann::json to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"mode", to_string(m.mode)},
          {"loss_cm", m.loss_cm},
          {"loss_im", m.loss_im},
          {"lr", m.lr},
          {"dev_r1_i2t", m.dev_r1_i2t},
          {"dev_r1_t2i", m.dev_r1_t2i},
          {"recall_sum", m.recall_sum},
          {"det_acc", m.det_acc},
          {"det_auc", m.det_auc ? nlohmann::json(*m.det_auc) : nlohmann::json(nullptr)}};
}

TrainData TrainData::from(const PairDataset& ds) {
  ds.validate();
  return {ds.img, ds.paired_text(), ds.noise_mask};
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) std::ranges::copy(m.row(idx[r]), out.row(r).begin());
  return out;
}

std::vector<double> gather(std::span<const double> v, const std::vector<std::size_t>& idx) {
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[idx[r]];
  return out;
}

std::string slot_name(std::size_t k) { return k == 0 ? "net_a" : "net_b"; }

// Index of the network whose labels are estimated from network k's outputs.
std::size_t label_target(std::size_t k, std::size_t n_slots) { return n_slots == 1 ? k : 1 - k; }

bool uses_cross_modal(Mode m) { return m != Mode::im_only; }
bool uses_intra_modal(Mode m) { return m != Mode::cm_only; }

// Per-batch estimates scattered into sample-indexed buffers.
struct EstimateBuffers {
  std::vector<double> y_cm;
  std::vector<double> structure;
};

void estimate_batch(const Matrix& img_emb, const Matrix& txt_emb, std::span<const double> weights,
                    const TrainConfig& cfg, const std::vector<std::size_t>& idx, EstimateBuffers& out) {
  const Matrix sim = kernels::matmul_abt(img_emb, txt_emb);
  const auto cm = cross_modal_indicator(sim, cfg.tau_cm);
  const auto st = intra_structure_score(kernels::matmul_abt(img_emb, img_emb),
                                        kernels::matmul_abt(txt_emb, txt_emb), weights);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.y_cm[idx[r]] = cm[r];
    out.structure[idx[r]] = st.score[r];
  }
}

Estimates finish_estimates(EstimateBuffers buf, const TrainConfig& cfg) {
  Estimates est;
  const std::size_t n = buf.y_cm.size();
  est.structure = std::move(buf.structure);
  if (uses_intra_modal(cfg.mode)) {
    GmmModel g = gmm_fit(est.structure, cfg.gmm);
    est.y_im.resize(n);
    for (std::size_t i = 0; i < n; ++i) est.y_im[i] = gmm_posterior(g, est.structure[i]);
    est.gmm = std::move(g);
  } else {
    est.y_im.assign(n, 1.0);
  }
  est.y_cm = uses_cross_modal(cfg.mode) ? std::move(buf.y_cm) : std::vector<double>(n, 1.0);
  return est;
}

struct EpochLoss {
  double cm = 0.0;
  double im = 0.0;
  std::size_t batches = 0;
};

// One pass of network `slot` over shuffled batches with Adam updates. When
// `estimates` is set, pre-update embeddings of every batch feed the label
// estimators.
void train_pass(NetSlot& slot, const TrainData& data, std::span<const double> y, const TrainConfig& cfg,
                double lr, Rng& batch_rng, EstimateBuffers* estimates, EpochLoss& loss,
                const std::string& where) {
  const auto batches = make_batches(data.size(), cfg.batch_size, batch_rng);
  const LossConfig loss_cfg = cfg.loss();
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& idx = batches[b];
    try {
      const Matrix xi = gather_rows(data.img, idx);
      const Matrix xt = gather_rows(data.txt, idx);
      const auto yb = gather(y, idx);
      const Encoded img = encode(slot.net.img, xi, Modality::image);
      const Encoded txt = encode(slot.net.txt, xt, Modality::text);
      if (!img.embedding.rows.all_finite() || !txt.embedding.rows.all_finite()) {
        throw NumericalError("non-finite embeddings");
      }
      if (estimates != nullptr) estimate_batch(img.embedding.rows, txt.embedding.rows, yb, cfg, idx, *estimates);
      const EmbeddingGrad eg = embedding_loss_grad(img.embedding.rows, txt.embedding.rows, yb, loss_cfg);
      if (!std::isfinite(eg.report.total)) throw NumericalError("non-finite loss");
      const EncoderGrad g_img = backprop(slot.net.img, img.cache, eg.img);
      const EncoderGrad g_txt = backprop(slot.net.txt, txt.cache, eg.txt);
      if (!g_img.all_finite() || !g_txt.all_finite()) throw NumericalError("non-finite parameter gradients");
      apply_adam(slot.net.img, g_img, lr);
      apply_adam(slot.net.txt, g_txt, lr);
      loss.cm += eg.report.l_cm;
      loss.im += eg.report.l_im;
      ++loss.batches;
    } catch (const NumericalError& e) {
      throw NumericalError(where + ", " + slot.name + ", batch " + std::to_string(b) + ": " + e.what());
    }
  }
}

EpochMetrics epoch_metrics(const RunState& state, const TrainData& data, const PairDataset* dev,
                           const TrainConfig& cfg, const EpochLoss& loss, double lr) {
  EpochMetrics m;
  m.epoch = state.epoch;
  m.mode = cfg.mode;
  m.lr = lr;
  if (loss.batches > 0) {
    m.loss_cm = loss.cm / static_cast<double>(loss.batches);
    m.loss_im = loss.im / static_cast<double>(loss.batches);
  }
  if (dev != nullptr && dev->size() > 0) {
    const RetrievalReport r = evaluate(state.slots, *dev);
    m.dev_r1_i2t = r.i2t.r1;
    m.dev_r1_t2i = r.t2i.r1;
    m.recall_sum = r.recall_sum;
  }
  const auto y = consensus_labels(state.slots);
  const DetectionReport det = detection_metrics(y, data.noise_mask);
  m.det_acc = det.accuracy;
  m.det_auc = det.auc;
  return m;
}

std::string epoch_label(const char* phase, std::size_t e, std::size_t k) {
  return std::string(phase) + "/" + std::to_string(e) + "/" + std::to_string(k);
}

}  // namespace

RunState init_state(const TrainConfig& cfg, const TrainData& data) {
  cfg.validate();
  if (data.size() < 2) throw std::invalid_argument("training set needs at least two pairs");
  const Rng root(cfg.seed);
  RunState state;
  const std::size_t n_slots = cfg.network_count();
  for (std::size_t k = 0; k < n_slots; ++k) {
    Rng init = root.split("init/" + slot_name(k));
    NetSlot slot;
    slot.name = slot_name(k);
    slot.net = make_network(data.img.cols(), data.txt.cols(), cfg.hidden, cfg.embed_dim, init);
    state.slots.push_back(std::move(slot));
  }
  for (std::size_t k = 0; k < n_slots; ++k) {
    state.slots[label_target(k, n_slots)].labels = SoftLabels::ones(data.size(), slot_name(k));
  }
  return state;
}

Estimates estimate_labels(const Network& net, const TrainData& data, std::span<const double> weights,
                          const TrainConfig& cfg, Rng& rng) {
  if (weights.size() != data.size()) throw std::invalid_argument("estimate_labels: weight length mismatch");
  EstimateBuffers buf{std::vector<double>(data.size(), 0.0), std::vector<double>(data.size(), 0.0)};
  for (const auto& idx : make_batches(data.size(), cfg.batch_size, rng)) {
    const Encoded img = encode(net.img, gather_rows(data.img, idx), Modality::image);
    const Encoded txt = encode(net.txt, gather_rows(data.txt, idx), Modality::text);
    estimate_batch(img.embedding.rows, txt.embedding.rows, gather(weights, idx), cfg, idx, buf);
  }
  return finish_estimates(std::move(buf), cfg);
}

void warmup(RunState& state, const TrainData& data, const TrainConfig& cfg) {
  if (state.warmed_up) throw std::logic_error("warmup: state already warmed up");
  const Rng root(cfg.seed);
  const std::vector<double> ones(data.size(), 1.0);
  const std::size_t n_slots = state.slots.size();
  for (std::size_t e = 1; e <= cfg.warmup_epochs; ++e) {
    for (std::size_t k = 0; k < n_slots; ++k) {
      Rng batch_rng = root.split(epoch_label("batches/warmup", e, k));
      EpochLoss loss;
      train_pass(state.slots[k], data, ones, cfg, lr_for_epoch(cfg, 0), batch_rng, nullptr, loss,
                 "warm-up epoch " + std::to_string(e));
    }
  }
  if (cfg.warmup_epochs > 0 && cfg.mode != Mode::baseline) {
    std::vector<Estimates> produced;
    for (std::size_t k = 0; k < n_slots; ++k) {
      Rng est_rng = root.split(epoch_label("estimate/warmup", 0, k));
      produced.push_back(estimate_labels(state.slots[k].net, data, ones, cfg, est_rng));
    }
    for (std::size_t k = 0; k < n_slots; ++k) {
      state.slots[label_target(k, n_slots)].labels =
          SoftLabels::from_estimates(produced[k].y_cm, produced[k].y_im, state.slots[k].name);
    }
  }
  state.warmed_up = true;
}

void train_epoch(RunState& state, const TrainData& data, const TrainConfig& cfg) {
  if (!state.warmed_up) throw std::logic_error("train_epoch: warm up first");
  const std::size_t epoch = state.epoch + 1;
  const double lr = lr_for_epoch(cfg, epoch);
  const Rng root(cfg.seed);
  const std::size_t n_slots = state.slots.size();
  const bool estimating = cfg.mode != Mode::baseline;

  // Labels are frozen for the whole epoch; updates land at the end.
  std::vector<Estimates> produced(n_slots);
  EpochLoss loss;
  for (std::size_t k = 0; k < n_slots; ++k) {
    NetSlot& slot = state.slots[k];
    const std::vector<double> y =
        estimating ? slot.labels.y : std::vector<double>(data.size(), 1.0);
    EstimateBuffers buf{std::vector<double>(data.size(), 0.0), std::vector<double>(data.size(), 0.0)};
    Rng batch_rng = root.split(epoch_label("batches/epoch", epoch, k));
    train_pass(slot, data, y, cfg, lr, batch_rng, estimating ? &buf : nullptr, loss,
               "epoch " + std::to_string(epoch));
    if (estimating) produced[k] = finish_estimates(std::move(buf), cfg);
  }

  if (estimating) {
    for (std::size_t k = 0; k < n_slots; ++k) {
      SoftLabels& target = state.slots[label_target(k, n_slots)].labels;
      target = ensemble_update(target, produced[k].y_cm, produced[k].y_im, cfg.beta_cm, cfg.beta_im);
      target.source = state.slots[k].name;
    }
  }
  state.epoch = epoch;
  state.history.push_back(epoch_metrics(state, data, nullptr, cfg, loss, lr));
}

Matrix ensemble_similarity(const std::vector<NetSlot>& slots, const Matrix& img, const Matrix& txt) {
  if (slots.empty()) throw std::invalid_argument("ensemble_similarity: no networks");
  Matrix total;
  for (const auto& slot : slots) {
    const Encoded u = encode(slot.net.img, img, Modality::image);
    const Encoded v = encode(slot.net.txt, txt, Modality::text);
    Matrix s = sim_matrix(u.embedding, v.embedding);
    if (total.empty()) {
      total = std::move(s);
    } else {
      for (std::size_t i = 0; i < total.size(); ++i) total.flat()[i] += s.flat()[i];
    }
  }
  const double scale = 1.0 / static_cast<double>(slots.size());
  for (double& x : total.flat()) x *= scale;
  return total;
}

RetrievalReport evaluate(const std::vector<NetSlot>& slots, const PairDataset& ds) {
  return evaluate_retrieval(ensemble_similarity(slots, ds.img, ds.txt), ds.match_perm);
}

std::vector<double> consensus_labels(const std::vector<NetSlot>& slots) {
  if (slots.empty()) return {};
  std::vector<double> y(slots.front().labels.size(), 0.0);
  for (const auto& slot : slots)
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += slot.labels.y[i];
  for (double& v : y) v /= static_cast<double>(slots.size());
  return y;
}

RunResult run(const TrainConfig& config, const PairDataset& train, const PairDataset& dev,
              const EpochObserver& observer) {
  const TrainConfig cfg = config.resolved();
  const TrainData data = TrainData::from(train);
  RunState state = init_state(cfg, data);
  warmup(state, data, cfg);

  RunResult result;
  auto record = [&](EpochMetrics m) {
    const bool better = result.history.empty() || m.recall_sum > result.history[result.best_epoch].recall_sum;
    result.history.push_back(m);
    if (better) {
      result.best_epoch = result.history.size() - 1;
      result.best = state.slots;
    }
    if (observer) observer(state, m);
  };

  record(epoch_metrics(state, data, &dev, cfg, EpochLoss{}, lr_for_epoch(cfg, 0)));
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    train_epoch(state, data, cfg);
    EpochMetrics m = state.history.back();
    const RetrievalReport r = evaluate(state.slots, dev);
    m.dev_r1_i2t = r.i2t.r1;
    m.dev_r1_t2i = r.t2i.r1;
    m.recall_sum = r.recall_sum;
    state.history.back() = m;
    record(m);
  }
  result.final = state.slots;
  result.final_labels = consensus_labels(state.slots);
  return result;
}

}  // namespace gsc
