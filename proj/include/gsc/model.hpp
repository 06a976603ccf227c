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
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "gsc/numerics.hpp"
#include "gsc/rng.hpp"

namespace gsc {

enum class Modality { image, text };

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  AdamState weight_state;
  AdamState bias_state;

  bool operator==(const DenseLayer&) const = default;
};

/// Affine layers with tanh in between; the last layer is linear and its
/// output rows are L2-normalized.
class Encoder {
 public:
  Encoder() = default;
  /// dims = {input, hidden..., output}; uniform(+-1/sqrt(fan_in)) init.
  Encoder(const std::vector<std::size_t>& dims, Rng& rng);
  explicit Encoder(std::vector<DenseLayer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  bool operator==(const Encoder&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct EmbeddingBatch {
  Matrix rows;  // unit-norm rows
  Modality modality = Modality::image;
};

/// Activations kept from a forward pass for backpropagation.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to each layer; [0] is the raw features
  Matrix pre_norm;                   // last layer output before normalization
  std::vector<double> norms;         // row norms of pre_norm
};

struct Encoded {
  EmbeddingBatch embedding;
  ForwardCache cache;
};

Encoded encode(const Encoder& enc, const Matrix& x, Modality modality = Modality::image);

/// Entry (i, j) is the dot product of row i of a with row j of b.
Matrix sim_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b);

struct EncoderGrad {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  static EncoderGrad zeros_like(const Encoder& enc);
  void add_scaled(const EncoderGrad& other, double scale);
  bool all_finite() const;
};

/// Gradient of a scalar loss w.r.t. the encoder parameters, given the
/// gradient w.r.t. the normalized embedding rows.
EncoderGrad backprop(const Encoder& enc, const ForwardCache& cache, const Matrix& grad_embedding);

void apply_adam(Encoder& enc, const EncoderGrad& grad, double lr);

/// Image and text encoder trained together.
struct Network {
  Encoder img;
  Encoder txt;

  bool operator==(const Network&) const = default;
};

Network make_network(std::size_t img_dim, std::size_t txt_dim,
                     const std::vector<std::size_t>& hidden, std::size_t embed_dim, Rng& rng);

nlohmann::json to_json(const Encoder& enc);
Encoder encoder_from_json(const nlohmann::json& j);
void save_encoder(const Encoder& enc, const std::filesystem::path& path);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace gsc
