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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsc/numerics.hpp"
#include "gsc/rng.hpp"

namespace gsc {

enum class SplitTag { train, dev, test };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

/// Parameters of the clustered two-view generator.
struct GenSpec {
  std::size_t n = 2000;
  std::size_t latent_dim = 16;
  std::size_t img_dim = 48;
  std::size_t txt_dim = 32;
  std::size_t n_clusters = 10;
  double cluster_spread = 0.6;
  double view_noise = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Two feature matrices plus the pairing between them. Pair i is
/// (img row i, txt row match_perm[i]); noise_mask[i] marks a pair whose text
/// was shuffled away from its own image.
struct PairDataset {
  Matrix img;
  Matrix txt;
  std::vector<std::size_t> match_perm;
  std::vector<bool> noise_mask;
  std::vector<int> cluster_ids;
  SplitTag split = SplitTag::train;
  std::uint64_t seed = 0;
  double rho = 0.0;

  std::size_t size() const noexcept { return match_perm.size(); }
  std::size_t noisy_count() const noexcept;
  bool is_clean() const noexcept;
  /// Text rows reordered so that row i is the text paired with image i.
  Matrix paired_text() const;
  /// Throws std::invalid_argument when any structural invariant is broken.
  void validate() const;

  bool operator==(const PairDataset&) const = default;
};

/// Latent variables and projection maps behind a generated dataset.
struct GroundTruth {
  Matrix centers;  // n_clusters x latent_dim
  Matrix latent;   // n x latent_dim
  Matrix img_map;  // img_dim x latent_dim
  Matrix txt_map;  // txt_dim x latent_dim
};

struct Generated {
  PairDataset data;
  GroundTruth truth;
};

Generated generate_with_truth(const GenSpec& spec);
PairDataset generate(const GenSpec& spec);

/// Number of pairs inject_noise corrupts for a given rate.
std::size_t noisy_pair_count(std::size_t n, double rho);

/// Shuffles the texts of exactly noisy_pair_count(N, rho) pairs among
/// themselves with no fixed points. Input must be clean.
PairDataset inject_noise(PairDataset ds, double rho, Rng& rng);

struct Splits {
  PairDataset train;
  PairDataset dev;
  PairDataset test;
};

/// Random disjoint partition of a clean dataset; dev and test take
/// floor(f * N) samples each and the remainder goes to train.
Splits split(const PairDataset& ds, double f_train, double f_dev, double f_test, Rng& rng);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

/// generate -> split -> inject_noise(train only), each step on its own
/// stream derived from spec.seed.
Splits make_experiment_data(const GenSpec& spec, double rho, const SplitFractions& fractions = {});

/// Desk-scale experiment preset: 3000 pairs split 2000 / 500 / 500.
GenSpec desk_spec(std::uint64_t seed);
SplitFractions desk_fractions();

/// Rows `idx` of a clean dataset, in the given order.
PairDataset subset(const PairDataset& ds, const std::vector<std::size_t>& idx, SplitTag tag);

nlohmann::json to_json(const PairDataset& ds);
PairDataset dataset_from_json(const nlohmann::json& j);
void save_dataset(const PairDataset& ds, const std::filesystem::path& path);
PairDataset load_dataset(const std::filesystem::path& path);

}  // namespace gsc
