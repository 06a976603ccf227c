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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include <fmt/core.h>

#include "gsc/cli.hpp"
#include "gsc/trainer.hpp"
#include "oracles.hpp"

namespace {

using gsc::Matrix;
using gsc::Mode;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double got, oracle::Real want) {
  const oracle::Real scale = std::max<oracle::Real>(std::abs(want), 1e-300L);
  return static_cast<double>(std::abs(static_cast<oracle::Real>(got) - want) / scale);
}

Matrix sim_of(const Matrix& a, const Matrix& b) {
  return gsc::sim_matrix({a, gsc::Modality::image}, {b, gsc::Modality::text});
}

// 1 ------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    gsc::Rng rng(seed);
    const auto net = gsc::make_network(8, 7, {10}, 4, rng);
    const Matrix xi = oracle::random_matrix(6, 8, rng, -2, 2);
    const Matrix xt = oracle::random_matrix(6, 7, rng, -2, 2);
    const auto y = oracle::random_vector(6, rng, 0.1, 1.0);
    const auto r = gsc::fd_check(net, xi, xt, y, {}, 1e-5, 1e-4);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = r.worst_parameter;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt::format("3 seeds, B=6, dims 8/7->10->4, max rel err {:.2e} at {} (< 1e-4), {:.2f} s (< 60 s)", worst,
                      where, secs)};
}

// 2 ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  gsc::Rng rng(2024);
  std::map<std::string, double> worst;
  const std::map<std::string, double> tol{{"loss_cm", 1e-12},   {"loss_im", 1e-12},  {"indicator", 1e-10},
                                          {"structure", 1e-12}, {"posterior", 1e-12}, {"recall", 1e-10},
                                          {"auc", 1e-10}};
  auto note = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    const Matrix u = oracle::random_embeddings(n, 5, rng);
    const Matrix v = oracle::random_embeddings(n, 5, rng);
    const Matrix s = sim_of(u, v), p = sim_of(u, u), q = sim_of(v, v);
    const auto y = oracle::random_vector(n, rng, 0.05, 1.0);

    note("loss_cm", rel_err(gsc::loss_cm(s, y, 0.07), oracle::loss_cm(s, y, 0.07L)));
    note("loss_im", rel_err(gsc::loss_im(p, q, y, 1.0), oracle::loss_im(p, q, y, 1.0L)));
    const auto ind = gsc::cross_modal_indicator(s, 0.07);
    const auto ind_o = oracle::indicator(s, 0.07L);
    const auto st = gsc::intra_structure_score(p, q, y).score;
    for (std::size_t i = 0; i < n; ++i) {
      note("indicator", rel_err(ind[i], ind_o[i]));
      note("structure", rel_err(st[i], oracle::weighted_cosine(p, q, y, i)));
    }

    gsc::GmmModel g;
    g.weight = {rng.uniform(0.1, 0.9), 0.0};
    g.weight[1] = 1.0 - g.weight[0];
    g.mean = {rng.uniform(0.0, 0.5), rng.uniform(0.5, 1.0)};
    g.variance = {rng.uniform(0.001, 0.05), rng.uniform(0.001, 0.05)};
    g.clean = 1;
    const double x = rng.uniform(0.2, 0.8);
    const oracle::Real pc = g.weight[1] * oracle::gaussian_pdf(x, g.mean[1], g.variance[1]);
    const oracle::Real pn = g.weight[0] * oracle::gaussian_pdf(x, g.mean[0], g.variance[0]);
    note("posterior", rel_err(gsc::gmm_posterior(g, x), pc / (pc + pn)));

    const std::size_t m = 3 + rng.below(20);
    const Matrix r = oracle::random_matrix(m, m, rng);
    const auto gt = rng.permutation(m);
    const std::size_t k = 1 + rng.below(m);
    note("recall", rel_err(gsc::recall_at_k(r, gt, k), oracle::recall(r, gt, k)));

    auto scores = oracle::random_vector(m, rng);
    if (trial % 2 == 0)
      for (double& z : scores) z = std::round(z * 5.0) / 5.0;
    std::vector<bool> mask(m);
    for (std::size_t i = 0; i < m; ++i) mask[i] = rng.uniform() < 0.4;
    mask[0] = false;
    mask[1] = true;
    note("auc", rel_err(gsc::detection_auc(scores, mask).value(), oracle::auc(scores, mask)));
  }
  Outcome o;
  std::string parts;
  for (const auto& [name, err] : worst) {
    o.pass = o.pass && err <= tol.at(name);
    parts += fmt::format("{}{} {:.1e}/{:.0e}", parts.empty() ? "" : ", ", name, err, tol.at(name));
  }
  o.detail = "200 instances each; worst rel err/tol: " + parts;
  return o;
}

// 3 ------------------------------------------------------------------------

Outcome em_soundness() {
  double worst_drop = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    gsc::Rng rng(seed);
    std::vector<double> s;
    const double frac = rng.uniform(0.2, 0.8);
    for (int i = 0; i < 300; ++i)
      s.push_back(rng.uniform() < frac ? 0.35 + 0.12 * rng.normal() : 0.75 + 0.1 * rng.normal());
    const auto g = gsc::gmm_fit(s);
    for (std::size_t t = 1; t < g.log_likelihood.size(); ++t)
      worst_drop = std::max(worst_drop, g.log_likelihood[t - 1] - g.log_likelihood[t]);
  }
  std::vector<double> two;
  for (int i = 0; i < 50; ++i) two.push_back(0.1 + 0.01 * std::sin(i));
  for (int i = 0; i < 50; ++i) two.push_back(0.9 + 0.01 * std::cos(i));
  const auto g = gsc::gmm_fit(two);
  const double e_lo = std::abs(g.mean[1 - g.clean] - 0.1), e_hi = std::abs(g.mean[g.clean] - 0.9);
  return {worst_drop <= 1e-9 && e_lo <= 0.02 && e_hi <= 0.02,
          fmt::format("20 seeds, largest log-likelihood drop {:.1e} (<= 1e-9); means off by {:.1e}, {:.1e} (<= 0.02)",
                      worst_drop, e_lo, e_hi)};
}

// 4 ------------------------------------------------------------------------

Outcome invariant_suite() {
  constexpr int cases = 200;
  gsc::Rng rng(4);
  std::map<std::string, int> failures;
  auto check = [&](const char* name, bool ok) { failures[name] += ok ? 0 : 1; };

  for (int t = 0; t < cases; ++t) {
    const std::size_t n = 2 + rng.below(10), d = 1 + rng.below(10);
    const Matrix m = oracle::random_matrix(n, d, rng, -5, 5);
    const double tau = rng.uniform(0.05, 2.0);
    const Matrix sm = gsc::softmax_rows(m, tau);
    bool stochastic = true;
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (double x : sm.row(i)) {
        stochastic = stochastic && x >= 0.0 && x <= 1.0;
        sum += x;
      }
      stochastic = stochastic && std::abs(sum - 1.0) <= 1e-12;
    }
    check("softmax row-stochastic", stochastic);
    Matrix shifted = m;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = rng.uniform(-50, 50);
      for (double& x : shifted.row(i)) x += c;
    }
    const Matrix sm2 = gsc::softmax_rows(shifted, tau);
    double shift_err = 0.0;
    for (std::size_t i = 0; i < sm.size(); ++i) shift_err = std::max(shift_err, std::abs(sm.flat()[i] - sm2.flat()[i]));
    check("softmax shift invariance", shift_err <= 1e-12);
  }

  for (int t = 0; t < cases; ++t) {
    const std::size_t n = 2 + rng.below(10);
    Matrix s = sim_of(oracle::random_embeddings(n, 4, rng), oracle::random_embeddings(n, 4, rng));
    const auto y = gsc::cross_modal_indicator(s, 0.07);
    check("indicator range", std::ranges::all_of(y, [](double v) { return v > 0.0 && v <= 1.0; }));
    const std::size_t i = rng.below(n);
    s(i, i) += rng.uniform(0.01, 0.5);
    check("indicator monotonicity", gsc::cross_modal_indicator(s, 0.07)[i] > y[i]);
  }

  for (int t = 0; t < cases; ++t) {
    const std::size_t n = 1 + rng.below(20);
    const auto a = oracle::random_vector(n, rng), b = oracle::random_vector(n, rng);
    const auto y = gsc::combine_labels(a, b);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) ok = ok && y[i] <= a[i] && y[i] <= b[i];
    check("min-combination dominance", ok);

    const auto labels = gsc::SoftLabels::from_estimates(a, b, "x");
    const auto cm = oracle::random_vector(n, rng), im = oracle::random_vector(n, rng);
    const auto next = gsc::ensemble_update(labels, cm, im, rng.uniform(), rng.uniform());
    bool convex = true;
    for (std::size_t i = 0; i < n; ++i) {
      convex = convex && next.y_cm[i] >= std::min(a[i], cm[i]) - 1e-15 && next.y_cm[i] <= std::max(a[i], cm[i]) + 1e-15;
      convex = convex && next.y_im[i] >= std::min(b[i], im[i]) - 1e-15 && next.y_im[i] <= std::max(b[i], im[i]) + 1e-15;
    }
    check("convex ensembling", convex);
  }

  for (int t = 0; t < cases; ++t) {
    const std::size_t n = 2 + rng.below(8);
    const Matrix u = oracle::random_embeddings(n, 4, rng), v = oracle::random_embeddings(n, 4, rng);
    const Matrix s = sim_of(u, v), p = sim_of(u, u), q = sim_of(v, v);
    const std::vector<double> ones(n, 1.0);
    // Unweighted InfoNCE from the row softmax of S and of S^T.
    const Matrix r = gsc::softmax_rows(s, 0.07), c = gsc::softmax_rows(s.transposed(), 0.07);
    double plain = 0.0;
    for (std::size_t i = 0; i < n; ++i) plain -= std::log(r(i, i)) + std::log(c(i, i));
    plain /= 2.0 * static_cast<double>(n);
    bool ok = std::abs(gsc::loss_cm(s, ones, 0.07) - plain) <= 1e-10 * std::max(1.0, plain);
    const auto st = gsc::intra_structure_score(p, q, ones).score;
    for (std::size_t i = 0; i < n; ++i) ok = ok && std::abs(st[i] - gsc::cosine(p.row(i), q.row(i)).value) <= 1e-12;
    const Matrix w = gsc::softmax_rows(oracle::to_gsc(oracle::to_eigen(p) * oracle::to_eigen(q).transpose()), 1.0);
    double plain_im = 0.0;
    for (std::size_t i = 0; i < n; ++i) plain_im -= std::log(w(i, i));
    plain_im /= static_cast<double>(n);
    ok = ok && std::abs(gsc::loss_im(p, q, ones, 1.0) - plain_im) <= 1e-10 * std::max(1.0, plain_im);
    check("y=1 reductions", ok);
  }

  for (int t = 0; t < cases; ++t) {
    const std::size_t n = 2 + rng.below(20);
    const Matrix s = oracle::random_matrix(n, n, rng);
    const auto gt = rng.permutation(n);
    bool mono = true;
    double prev = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const double r = gsc::recall_at_k(s, gt, k);
      mono = mono && r >= prev;
      prev = r;
    }
    check("R@K monotonicity", mono);
    Matrix tr = s;
    const double a = rng.uniform(0.1, 5.0), b = rng.uniform(-3, 3);
    for (double& x : tr.flat()) x = std::tanh(a * x + b);
    const std::size_t k = 1 + rng.below(n);
    check("R@K rank invariance", gsc::recall_at_k(tr, gt, k) == gsc::recall_at_k(s, gt, k));
  }

  Outcome o;
  int failed = 0;
  for (const auto& [name, count] : failures) failed += count;
  o.pass = failed == 0;
  o.detail = fmt::format("{} properties x {} random cases, {} failing cases", failures.size(), cases, failed);
  for (const auto& [name, count] : failures)
    if (count > 0) o.detail += fmt::format("; {}: {}", name, count);
  return o;
}

// 5-8: desk-scale experiments --------------------------------------------------

struct Cell {
  gsc::RetrievalReport test;
  gsc::DetectionReport detection;
  double seconds = 0.0;
};

class Experiments {
 public:
  const Cell& get(Mode mode, double rho, std::uint64_t seed) {
    const auto key = std::make_tuple(static_cast<int>(mode), rho, seed);
    if (auto it = cells_.find(key); it != cells_.end()) return it->second;
    const auto data = gsc::make_experiment_data(gsc::desk_spec(seed), rho, gsc::desk_fractions());
    gsc::TrainConfig cfg;
    cfg.mode = mode;
    cfg.seed = seed;
    const auto t0 = Clock::now();
    const auto result = gsc::run(cfg, data.train, data.dev);
    Cell c;
    c.seconds = seconds_since(t0);
    c.test = gsc::evaluate(result.best, data.test);
    c.detection = gsc::detection_metrics(result.final_labels, data.train.noise_mask);
    return cells_.emplace(key, c).first->second;
  }

  double mean(Mode mode, double rho, const std::function<double(const Cell&)>& f) {
    double acc = 0.0;
    for (std::uint64_t seed : seeds) acc += f(get(mode, rho, seed));
    return acc / static_cast<double>(seeds.size());
  }

  const std::vector<std::uint64_t> seeds{1, 2, 3};

 private:
  std::map<std::tuple<int, double, std::uint64_t>, Cell> cells_;
};

double rsum(const Cell& c) { return c.test.recall_sum; }

Outcome discrimination(Experiments& ex) {
  const Cell& c = ex.get(Mode::gsc, 0.4, 1);
  const auto& d = c.detection;
  const double auc = d.auc.value_or(0.0);
  const double gap = d.mean_clean.value_or(0.0) - d.mean_noisy.value_or(0.0);
  return {d.accuracy >= 0.90 && auc >= 0.95 && gap >= 0.3 && c.seconds <= 600.0,
          fmt::format("N=2000, rho=0.4: accuracy {:.4f} (>= 0.90), AUC {:.4f} (>= 0.95), clean-noisy mean gap {:.3f} "
                      "(>= 0.3), {:.1f} s (<= 600 s)",
                      d.accuracy, auc, gap, c.seconds)};
}

Outcome robustness(Experiments& ex) {
  Outcome o;
  for (double rho : {0.4, 0.6}) {
    const double g = ex.mean(Mode::gsc, rho, rsum), b = ex.mean(Mode::baseline, rho, rsum);
    o.pass = o.pass && g > b;
    o.detail += fmt::format("rho={:.1f} rsum gsc {:.2f} vs baseline {:.2f}; ", rho, g, b);
  }
  auto r1 = [](const Cell& c) { return c.test.i2t.r1; };
  const double adv = ex.mean(Mode::gsc, 0.6, r1) - ex.mean(Mode::baseline, 0.6, r1);
  o.pass = o.pass && adv >= 5.0;
  o.detail += fmt::format("rho=0.6 R@1 i2t advantage {:.2f} (>= 5); 3-seed means", adv);
  return o;
}

Outcome no_harm(Experiments& ex) {
  const double g = ex.mean(Mode::gsc, 0.0, rsum), b = ex.mean(Mode::baseline, 0.0, rsum);
  std::string per;
  for (auto seed : ex.seeds)
    per += fmt::format(" {:.1f}", rsum(ex.get(Mode::gsc, 0.0, seed)) - rsum(ex.get(Mode::baseline, 0.0, seed)));
  return {std::abs(g - b) <= 3.0,
          fmt::format("rho=0 rsum gsc {:.2f} vs baseline {:.2f}, |diff| {:.2f} (<= 3); per-seed gsc-baseline:{}", g, b,
                      std::abs(g - b), per)};
}

Outcome ablation(Experiments& ex) {
  const double full = ex.mean(Mode::gsc, 0.4, rsum);
  Outcome o;
  o.detail = fmt::format("rho=0.4 gsc {:.2f}", full);
  std::string violations;
  for (Mode m : {Mode::cm_only, Mode::im_only, Mode::single_net, Mode::no_ensemble}) {
    const double v = ex.mean(m, 0.4, rsum);
    o.detail += fmt::format(", {} {:.2f}", gsc::to_string(m), v);
    if (v > full) {
      violations += fmt::format(" {} +{:.2f}", gsc::to_string(m), v - full);
      o.pass = o.pass && v - full <= 1.0;
    }
  }
  o.detail += violations.empty() ? "; no violations" : "; violations (allowed <= 1, reported):" + violations;
  return o;
}

// 9 ------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto data = gsc::make_experiment_data({.n = 400, .seed = 9}, 0.4);
  gsc::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 9;
  const auto a = gsc::run(cfg, data.train, data.dev);
  const auto b = gsc::run(cfg, data.train, data.dev);
  const bool same_history = a.history == b.history && a.final_labels == b.final_labels;

  const auto root = std::filesystem::temp_directory_path() / "gsc_acceptance_sweep";
  std::vector<std::string> csv;
  for (const char* name : {"a", "b"}) {
    const auto dir = root / name;
    std::filesystem::remove_all(dir);
    std::ostringstream out, err;
    const int code = gsc::cli::run({"sweep", "--n", "300", "--epochs", "2", "--seed", "17", "--out", dir.string()}, out, err);
    csv.push_back(code == 0 ? slurp(dir / "summary.csv") : std::string());
  }
  std::filesystem::remove_all(root);
  const bool same_csv = !csv[0].empty() && csv[0] == csv[1];
  return {same_history && same_csv,
          fmt::format("metric history {} across repeated runs; sweep CSV ({} bytes) {}",
                      same_history ? "bit-identical" : "DIFFERS", csv[0].size(), same_csv ? "identical" : "DIFFERS")};
}

}  // namespace

// Optional arguments select criteria by number; default runs all of them.
int main(int argc, char** argv) {
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoul(argv[i]));
  Experiments ex;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"oracle equivalence", oracle_equivalence},
      {"EM soundness", em_soundness},
      {"invariant suite", invariant_suite},
      {"discrimination at desk scale", [&] { return discrimination(ex); }},
      {"robustness benefit", [&] { return robustness(ex); }},
      {"no harm at zero noise", [&] { return no_harm(ex); }},
      {"ablation direction", [&] { return ablation(ex); }},
      {"determinism", determinism},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && std::ranges::find(selected, i + 1) == selected.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    fmt::print("{} [{}] {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
