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

#include "gsc/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace gsc {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::dev: return "dev";
    case SplitTag::test: return "test";
  }
  return "train";
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "dev") return SplitTag::dev;
  if (s == "test") return SplitTag::test;
  throw std::invalid_argument("unknown split tag: " + s);
}

void GenSpec::validate() const {
  if (n == 0 || latent_dim == 0 || img_dim == 0 || txt_dim == 0 || n_clusters == 0) {
    throw std::invalid_argument("GenSpec: sizes and dims must be at least 1");
  }
  if (n_clusters > n) throw std::invalid_argument("GenSpec: more clusters than samples");
  if (!(cluster_spread >= 0.0) || !(view_noise >= 0.0) || !std::isfinite(cluster_spread) ||
      !std::isfinite(view_noise)) {
    throw std::invalid_argument("GenSpec: spreads must be finite and non-negative");
  }
}

std::size_t PairDataset::noisy_count() const noexcept {
  return static_cast<std::size_t>(std::count(noise_mask.begin(), noise_mask.end(), true));
}

bool PairDataset::is_clean() const noexcept {
  for (std::size_t i = 0; i < match_perm.size(); ++i)
    if (match_perm[i] != i) return false;
  return true;
}

Matrix PairDataset::paired_text() const {
  Matrix out(size(), txt.cols());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto src = txt.row(match_perm[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void PairDataset::validate() const {
  const std::size_t n = size();
  if (img.rows() != n || txt.rows() != n || noise_mask.size() != n || cluster_ids.size() != n) {
    throw std::invalid_argument("PairDataset: inconsistent lengths");
  }
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = match_perm[i];
    if (p >= n || seen[p]) throw std::invalid_argument("PairDataset: match_perm is not a permutation");
    seen[p] = true;
    if (noise_mask[i] != (p != i)) {
      throw std::invalid_argument("PairDataset: noise_mask disagrees with match_perm");
    }
  }
  if (!img.all_finite() || !txt.all_finite()) {
    throw std::invalid_argument("PairDataset: non-finite features");
  }
}

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.flat()) x = rng.normal(0.0, stddev);
  return m;
}

// out_row = map * z + noise
void project_row(const Matrix& map, std::span<const double> z, double noise, Rng& rng,
                 std::span<double> out_row) {
  for (std::size_t r = 0; r < map.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < map.cols(); ++c) acc += map(r, c) * z[c];
    out_row[r] = acc + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
  }
}

}  // namespace

Generated generate_with_truth(const GenSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  Rng center_rng = root.split("centers");
  Rng map_rng = root.split("maps");
  Rng latent_rng = root.split("latent");
  Rng img_rng = root.split("img-noise");
  Rng txt_rng = root.split("txt-noise");

  GroundTruth truth;
  truth.centers = gaussian_matrix(spec.n_clusters, spec.latent_dim, 1.0, center_rng);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  truth.img_map = gaussian_matrix(spec.img_dim, spec.latent_dim, map_scale, map_rng);
  truth.txt_map = gaussian_matrix(spec.txt_dim, spec.latent_dim, map_scale, map_rng);
  truth.latent = Matrix(spec.n, spec.latent_dim);

  PairDataset ds;
  ds.img = Matrix(spec.n, spec.img_dim);
  ds.txt = Matrix(spec.n, spec.txt_dim);
  ds.match_perm.resize(spec.n);
  std::iota(ds.match_perm.begin(), ds.match_perm.end(), std::size_t{0});
  ds.noise_mask.assign(spec.n, false);
  ds.cluster_ids.resize(spec.n);
  ds.seed = spec.seed;

  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.n_clusters;
    ds.cluster_ids[i] = static_cast<int>(c);
    auto z = truth.latent.row(i);
    for (std::size_t d = 0; d < spec.latent_dim; ++d) {
      z[d] = truth.centers(c, d) +
             (spec.cluster_spread > 0.0 ? latent_rng.normal(0.0, spec.cluster_spread) : 0.0);
    }
    project_row(truth.img_map, z, spec.view_noise, img_rng, ds.img.row(i));
    project_row(truth.txt_map, z, spec.view_noise, txt_rng, ds.txt.row(i));
  }
  return {std::move(ds), std::move(truth)};
}

PairDataset generate(const GenSpec& spec) { return generate_with_truth(spec).data; }

std::size_t noisy_pair_count(std::size_t n, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("noise rate must lie in [0, 1]");
  // The small offset keeps products like 0.4 * 1000 from rounding up to 401.
  auto k = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
  k = std::min(k, n);
  // A single pair cannot be mismatched on its own.
  if (k == 1) k = n >= 2 ? 2 : 0;
  return k;
}

PairDataset inject_noise(PairDataset ds, double rho, Rng& rng) {
  const std::size_t k = noisy_pair_count(ds.size(), rho);
  if (!ds.is_clean()) throw std::invalid_argument("inject_noise: dataset already carries noise");

  ds.rho = rho;
  if (k == 0) return ds;

  std::vector<std::size_t> chosen = rng.permutation(ds.size());
  chosen.resize(k);
  std::sort(chosen.begin(), chosen.end());

  // Uniform derangement by rejection; the acceptance rate tends to 1/e.
  std::vector<std::size_t> sigma;
  bool has_fixed_point = true;
  while (has_fixed_point) {
    sigma = rng.permutation(k);
    has_fixed_point = false;
    for (std::size_t a = 0; a < k; ++a) {
      if (sigma[a] == a) {
        has_fixed_point = true;
        break;
      }
    }
  }
  for (std::size_t a = 0; a < k; ++a) {
    ds.match_perm[chosen[a]] = chosen[sigma[a]];
    ds.noise_mask[chosen[a]] = true;
  }
  return ds;
}

PairDataset subset(const PairDataset& ds, const std::vector<std::size_t>& idx, SplitTag tag) {
  if (!ds.is_clean()) throw std::invalid_argument("subset: dataset must be clean");
  PairDataset out;
  out.img = Matrix(idx.size(), ds.img.cols());
  out.txt = Matrix(idx.size(), ds.txt.cols());
  out.match_perm.resize(idx.size());
  std::iota(out.match_perm.begin(), out.match_perm.end(), std::size_t{0});
  out.noise_mask.assign(idx.size(), false);
  out.cluster_ids.resize(idx.size());
  out.split = tag;
  out.seed = ds.seed;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t src = idx.at(r);
    if (src >= ds.size()) throw std::invalid_argument("subset: index out of range");
    std::ranges::copy(ds.img.row(src), out.img.row(r).begin());
    std::ranges::copy(ds.txt.row(src), out.txt.row(r).begin());
    out.cluster_ids[r] = ds.cluster_ids[src];
  }
  return out;
}

Splits split(const PairDataset& ds, double f_train, double f_dev, double f_test, Rng& rng) {
  for (double f : {f_train, f_dev, f_test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("split: fractions must lie in [0, 1]");
  }
  if (std::abs(f_train + f_dev + f_test - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  const auto n_dev = static_cast<std::size_t>(std::floor(f_dev * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(f_test * static_cast<double>(n) + 1e-9));

  const std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_dev),
                                order.begin() + static_cast<std::ptrdiff_t>(n_dev + n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_dev + n_test),
                                 order.end());
  std::ranges::sort(train);
  std::ranges::sort(dev);
  std::ranges::sort(test);
  return {subset(ds, train, SplitTag::train), subset(ds, dev, SplitTag::dev),
          subset(ds, test, SplitTag::test)};
}

Splits make_experiment_data(const GenSpec& spec, double rho, const SplitFractions& fractions) {
  noisy_pair_count(1, rho);  // validates rho before any work
  const Rng root(spec.seed);
  Rng split_rng = root.split("split");
  Rng noise_rng = root.split("noise");
  Splits s = split(generate(spec), fractions.train, fractions.dev, fractions.test, split_rng);
  s.train = inject_noise(std::move(s.train), rho, noise_rng);
  return s;
}

GenSpec desk_spec(std::uint64_t seed) {
  GenSpec spec;
  spec.n = 3000;
  spec.seed = seed;
  return spec;
}

SplitFractions desk_fractions() { return {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}; }

namespace {

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix matrix_from_rows(const nlohmann::json& rows, std::size_t n, std::size_t cols) {
  if (rows.size() != n) throw std::invalid_argument("dataset json: row count mismatch");
  Matrix m(n, cols);
  for (std::size_t r = 0; r < n; ++r) {
    const auto values = rows[r].get<std::vector<double>>();
    if (values.size() != cols) throw std::invalid_argument("dataset json: column count mismatch");
    std::ranges::copy(values, m.row(r).begin());
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const PairDataset& ds) {
  nlohmann::json j;
  j["meta"] = {{"N", ds.size()},
               {"dims", {{"img", ds.img.cols()}, {"txt", ds.txt.cols()}}},
               {"seed", ds.seed},
               {"rho", ds.rho},
               {"split", to_string(ds.split)}};
  j["img"] = matrix_rows(ds.img);
  j["txt"] = matrix_rows(ds.txt);
  j["perm"] = ds.match_perm;
  j["mask"] = ds.noise_mask;
  j["clusters"] = ds.cluster_ids;
  return j;
}

PairDataset dataset_from_json(const nlohmann::json& j) {
  try {
    const auto& meta = j.at("meta");
    const auto n = meta.at("N").get<std::size_t>();
    PairDataset ds;
    ds.img = matrix_from_rows(j.at("img"), n, meta.at("dims").at("img").get<std::size_t>());
    ds.txt = matrix_from_rows(j.at("txt"), n, meta.at("dims").at("txt").get<std::size_t>());
    ds.match_perm = j.at("perm").get<std::vector<std::size_t>>();
    ds.noise_mask = j.at("mask").get<std::vector<bool>>();
    ds.cluster_ids = j.at("clusters").get<std::vector<int>>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.rho = meta.at("rho").get<double>();
    ds.split = split_tag_from_string(meta.value("split", std::string("train")));
    ds.validate();
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("dataset json: ") + e.what());
  }
}

void save_dataset(const PairDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(ds).dump() << '\n';
}

PairDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read dataset " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("dataset " + path.string() + ": " + e.what());
  }
  return dataset_from_json(j);
}

}  // namespace gsc
