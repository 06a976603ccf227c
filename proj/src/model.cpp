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

#include "gsc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gsc/kernels.hpp"

namespace gsc {

Encoder::Encoder(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Encoder: need at least input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw std::invalid_argument("Encoder: zero dimension");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer;
    layer.weight = Matrix(fan_out, fan_in);
    for (double& w : layer.weight.flat()) w = rng.uniform(-bound, bound);
    layer.bias.resize(fan_out);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    layer.weight_state = AdamState(layer.weight.size());
    layer.bias_state = AdamState(fan_out);
    layers_.push_back(std::move(layer));
  }
}

Encoder::Encoder(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("Encoder: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw std::invalid_argument("Encoder: bias length does not match layer width");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw std::invalid_argument("Encoder: layer dims do not chain");
    }
    if (layer.weight_state.first_moment.empty()) layer.weight_state = AdamState(layer.weight.size());
    if (layer.bias_state.first_moment.empty()) layer.bias_state = AdamState(layer.bias.size());
  }
}

std::size_t Encoder::input_dim() const { return layers_.front().weight.cols(); }
std::size_t Encoder::output_dim() const { return layers_.back().weight.rows(); }

std::vector<std::size_t> Encoder::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& layer : layers_) d.push_back(layer.weight.rows());
  return d;
}

std::size_t Encoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

Encoded encode(const Encoder& enc, const Matrix& x, Modality modality) {
  if (x.cols() != enc.input_dim()) throw std::invalid_argument("encode: input dim mismatch");
  Encoded out;
  out.cache.layer_inputs.push_back(x);
  const auto& layers = enc.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix h = kernels::matmul_abt(out.cache.layer_inputs.back(), layers[l].weight);
    for (std::size_t r = 0; r < h.rows(); ++r) {
      auto row = h.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += layers[l].bias[c];
    }
    if (l + 1 < layers.size()) {
      for (double& v : h.flat()) v = std::tanh(v);
      out.cache.layer_inputs.push_back(std::move(h));
    } else {
      out.cache.pre_norm = std::move(h);
    }
  }

  const Matrix& h = out.cache.pre_norm;
  out.cache.norms.resize(h.rows());
  out.embedding.rows = Matrix(h.rows(), h.cols());
  out.embedding.modality = modality;
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const double norm = std::max(std::sqrt(dot(h.row(r), h.row(r))), 1e-12);
    out.cache.norms[r] = norm;
    auto dst = out.embedding.rows.row(r);
    for (std::size_t c = 0; c < h.cols(); ++c) dst[c] = h(r, c) / norm;
  }
  return out;
}

Matrix sim_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  if (a.rows.cols() != b.rows.cols()) throw std::invalid_argument("sim_matrix: embedding dim mismatch");
  return kernels::matmul_abt(a.rows, b.rows);
}

EncoderGrad EncoderGrad::zeros_like(const Encoder& enc) {
  EncoderGrad g;
  for (const auto& layer : enc.layers()) {
    g.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void EncoderGrad::add_scaled(const EncoderGrad& other, double scale) {
  if (other.weight.size() != weight.size()) throw std::invalid_argument("EncoderGrad: layer mismatch");
  for (std::size_t l = 0; l < weight.size(); ++l) {
    auto dst = weight[l].flat();
    auto src = other.weight[l].flat();
    if (dst.size() != src.size()) throw std::invalid_argument("EncoderGrad: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += scale * other.bias[l][i];
  }
}

bool EncoderGrad::all_finite() const {
  for (const auto& w : weight)
    if (!w.all_finite()) return false;
  for (const auto& b : bias)
    for (double x : b)
      if (!std::isfinite(x)) return false;
  return true;
}

EncoderGrad backprop(const Encoder& enc, const ForwardCache& cache, const Matrix& grad_embedding) {
  const Matrix& h = cache.pre_norm;
  if (grad_embedding.rows() != h.rows() || grad_embedding.cols() != h.cols()) {
    throw std::invalid_argument("backprop: gradient shape does not match the cached batch");
  }

  // Through row normalization e = h / |h|: dh = (de - e <e, de>) / |h|.
  Matrix dh(h.rows(), h.cols());
  for (std::size_t r = 0; r < h.rows(); ++r) {
    const double norm = cache.norms[r];
    double proj = 0.0;
    for (std::size_t c = 0; c < h.cols(); ++c) proj += (h(r, c) / norm) * grad_embedding(r, c);
    for (std::size_t c = 0; c < h.cols(); ++c) {
      dh(r, c) = (grad_embedding(r, c) - (h(r, c) / norm) * proj) / norm;
    }
  }

  const auto& layers = enc.layers();
  EncoderGrad grad = EncoderGrad::zeros_like(enc);
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& input = cache.layer_inputs[l];
    grad.weight[l] = kernels::matmul_atb(dh, input);
    for (std::size_t r = 0; r < dh.rows(); ++r)
      for (std::size_t c = 0; c < dh.cols(); ++c) grad.bias[l][c] += dh(r, c);
    if (l == 0) break;
    Matrix da = kernels::matmul_ab(dh, layers[l].weight);
    // input = tanh(previous pre-activation)
    for (std::size_t i = 0; i < da.size(); ++i) {
      const double a = input.flat()[i];
      da.flat()[i] *= 1.0 - a * a;
    }
    dh = std::move(da);
  }
  return grad;
}

void apply_adam(Encoder& enc, const EncoderGrad& grad, double lr) {
  auto& layers = enc.layers();
  if (grad.weight.size() != layers.size()) throw std::invalid_argument("apply_adam: layer mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_step(layers[l].weight.flat(), grad.weight[l].flat(), layers[l].weight_state, lr);
    adam_step(layers[l].bias, grad.bias[l], layers[l].bias_state, lr);
  }
}

Network make_network(std::size_t img_dim, std::size_t txt_dim,
                     const std::vector<std::size_t>& hidden, std::size_t embed_dim, Rng& rng) {
  auto dims_for = [&](std::size_t input) {
    std::vector<std::size_t> dims{input};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(embed_dim);
    return dims;
  };
  Rng img_rng = rng.split("img-encoder");
  Rng txt_rng = rng.split("txt-encoder");
  return {Encoder(dims_for(img_dim), img_rng), Encoder(dims_for(txt_dim), txt_rng)};
}

namespace {

nlohmann::json adam_json(const AdamState& s) {
  return {{"m", s.first_moment}, {"v", s.second_moment}, {"step", s.step},
          {"beta1", s.beta1},    {"beta2", s.beta2},     {"eps", s.epsilon}};
}

AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.first_moment = j.at("m").get<std::vector<double>>();
  s.second_moment = j.at("v").get<std::vector<double>>();
  s.step = j.at("step").get<std::uint64_t>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("eps").get<double>();
  return s;
}

}  // namespace

nlohmann::json to_json(const Encoder& enc) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  nlohmann::json adam = nlohmann::json::array();
  std::uint64_t step = 0;
  for (const auto& layer : enc.layers()) {
    weights.push_back(layer.weight.values());
    biases.push_back(layer.bias);
    adam.push_back({{"weight", adam_json(layer.weight_state)}, {"bias", adam_json(layer.bias_state)}});
    step = layer.weight_state.step;
  }
  return {{"dims", enc.dims()}, {"weights", weights}, {"biases", biases},
          {"adam_state", adam}, {"step", step}};
}

Encoder encoder_from_json(const nlohmann::json& j) {
  try {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (dims.size() < 2 || weights.size() != dims.size() - 1 || biases.size() != weights.size()) {
      throw std::invalid_argument("encoder json: layer count mismatch");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      DenseLayer layer;
      layer.weight = Matrix(dims[l + 1], dims[l], weights[l].get<std::vector<double>>());
      layer.bias = biases[l].get<std::vector<double>>();
      if (j.contains("adam_state")) {
        layer.weight_state = adam_from_json(j["adam_state"].at(l).at("weight"));
        layer.bias_state = adam_from_json(j["adam_state"].at(l).at("bias"));
      }
      layers.push_back(std::move(layer));
    }
    return Encoder(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("encoder json: ") + e.what());
  }
}

void save_encoder(const Encoder& enc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(enc).dump() << '\n';
}

Encoder load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read checkpoint " + path.string());
  return encoder_from_json(nlohmann::json::parse(in));
}

}  // namespace gsc
