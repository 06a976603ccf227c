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

#include "gsc/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "gsc/losses.hpp"
#include "gsc/trainer.hpp"

namespace gsc::cli {
namespace fs = std::filesystem;
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path default_out_dir() {
  if (const char* env = std::getenv("GSC_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "gsc_out";
}

fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw UsageError("--rho must lie in [0, 1]");
}

struct DataOptions {
  GenSpec spec = desk_spec(0);
  double rho = 0.0;
  SplitFractions fractions = desk_fractions();
};

void add_data_options(CLI::App& cmd, DataOptions& d) {
  cmd.add_option("--n", d.spec.n, "total pairs before splitting");
  cmd.add_option("--clusters", d.spec.n_clusters, "latent clusters");
  cmd.add_option("--latent-dim", d.spec.latent_dim);
  cmd.add_option("--img-dim", d.spec.img_dim);
  cmd.add_option("--txt-dim", d.spec.txt_dim);
  cmd.add_option("--cluster-spread", d.spec.cluster_spread);
  cmd.add_option("--view-noise", d.spec.view_noise);
  cmd.add_option("--f-train", d.fractions.train);
  cmd.add_option("--f-dev", d.fractions.dev);
  cmd.add_option("--f-test", d.fractions.test);
}

// gen -----------------------------------------------------------------------

struct GenArgs {
  DataOptions data;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  check_rho(a.data.rho);
  GenSpec spec = a.data.spec;
  spec.seed = a.seed;
  const fs::path dir = prepare_dir(a.out.empty() ? default_out_dir() : fs::path(a.out));
  const Splits s = make_experiment_data(spec, a.data.rho, a.data.fractions);

  nlohmann::json manifest;
  manifest["spec"] = {{"n", spec.n},
                      {"latent_dim", spec.latent_dim},
                      {"img_dim", spec.img_dim},
                      {"txt_dim", spec.txt_dim},
                      {"n_clusters", spec.n_clusters},
                      {"cluster_spread", spec.cluster_spread},
                      {"view_noise", spec.view_noise},
                      {"seed", spec.seed}};
  manifest["rho"] = a.data.rho;
  manifest["fractions"] = {a.data.fractions.train, a.data.fractions.dev, a.data.fractions.test};
  for (const auto* part : {&s.train, &s.dev, &s.test}) {
    const std::string name = to_string(part->split) + ".json";
    save_dataset(*part, dir / name);
    manifest["files"][to_string(part->split)] = {{"path", name}, {"N", part->size()},
                                                 {"noisy", part->noisy_count()}};
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  out << fmt::format("wrote {} train ({} noisy), {} dev, {} test pairs to {}\n", s.train.size(),
                     s.train.noisy_count(), s.dev.size(), s.test.size(), dir.string());
  return ok;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  DataOptions data;
  std::string data_dir;
  std::string config;
  std::string out;
  std::string mode;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::size_t> epochs;
  bool seed_given = false;
  bool dump_labels = false;
};

TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  if (path.empty()) return base;
  try {
    return train_config_from_json(read_json(path), base);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

Report build_report(const RunResult& result, const PairDataset& train, const PairDataset& test,
                    const TrainConfig& cfg, double rho) {
  const RetrievalReport r = evaluate(result.best, test);
  nlohmann::json meta = {{"mode", to_string(cfg.mode)},
                         {"rho", rho},
                         {"seed", cfg.seed},
                         {"best_epoch", result.best_epoch},
                         {"n_train", train.size()},
                         {"n_test", test.size()},
                         {"config", to_json(cfg.resolved())}};
  return assemble_report(r.i2t, r.t2i, detection_metrics(result.final_labels, train.noise_mask),
                         std::move(meta));
}

Splits load_or_generate(const TrainArgs& a, std::uint64_t data_seed) {
  if (!a.data_dir.empty()) {
    const fs::path dir(a.data_dir);
    try {
      return {load_dataset(dir / "train.json"), load_dataset(dir / "dev.json"),
              load_dataset(dir / "test.json")};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  check_rho(a.data.rho);
  GenSpec spec = a.data.spec;
  spec.seed = data_seed;
  return make_experiment_data(spec, a.data.rho, a.data.fractions);
}

Report train_once(const TrainConfig& cfg, const Splits& data, const fs::path& dir, bool dump_labels,
                  std::ostream& out) {
  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
  std::ofstream labels;
  if (dump_labels) labels.open(dir / "labels.jsonl", std::ios::binary);
  if (!metrics || (dump_labels && !labels)) throw UsageError("cannot write into " + dir.string());

  const auto observer = [&](const RunState& state, const EpochMetrics& m) {
    metrics << to_json(m).dump() << '\n';
    metrics.flush();
    if (dump_labels) {
      const auto y = consensus_labels(state.slots);
      const auto& mine = state.slots.front().labels;
      for (std::size_t i = 0; i < y.size(); ++i) {
        labels << nlohmann::json{{"epoch", m.epoch},     {"idx", i},
                                 {"y_cm", mine.y_cm[i]}, {"y_im", mine.y_im[i]},
                                 {"y", y[i]},            {"is_noisy_gt", bool(data.train.noise_mask[i])}}
                      .dump()
               << '\n';
      }
    }
    out << fmt::format("epoch {:>3}  loss_cm {:.4f}  loss_im {:.4f}  dev rsum {:.1f}  det_acc {:.3f}\n",
                       m.epoch, m.loss_cm, m.loss_im, m.recall_sum, m.det_acc);
  };
  const RunResult result = run(cfg, data.train, data.dev, observer);

  const fs::path ckpt = prepare_dir(dir / "checkpoints");
  for (const auto& slot : result.best) {
    save_encoder(slot.net.img, ckpt / (slot.name + "_img.json"));
    save_encoder(slot.net.txt, ckpt / (slot.name + "_txt.json"));
  }
  const Report report = build_report(result, data.train, data.test, cfg, data.train.rho);
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  return report;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = load_config(a.config);
  if (!a.mode.empty()) cfg.mode = mode_from_string(a.mode);
  if (a.seed_given) cfg.seed = a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Splits data = load_or_generate(a, a.data_seed.value_or(cfg.seed));
  const fs::path dir = prepare_dir(a.out.empty() ? default_out_dir() : fs::path(a.out));
  const Report report = train_once(cfg, data, dir, a.dump_labels, out);
  out << summary_csv_header() << '\n'
      << summary_csv_row(to_string(cfg.mode), data.train.rho, report) << '\n';
  return ok;
}

// sweep ---------------------------------------------------------------------

struct SweepArgs {
  DataOptions data;
  std::vector<double> rhos{0.0, 0.2, 0.4, 0.6};
  std::vector<std::string> modes{"gsc", "baseline"};
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs;
};

std::string rho_key(double rho) { return fmt::format("rho={:.6f}", rho); }

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  TrainConfig base = load_config(a.config);
  if (a.epochs) base.epochs = *a.epochs;
  for (double rho : a.rhos) check_rho(rho);
  std::vector<Mode> modes;
  for (const auto& m : a.modes) modes.push_back(mode_from_string(m));

  const fs::path dir = prepare_dir(a.out.empty() ? default_out_dir() : fs::path(a.out));
  std::ofstream csv(dir / "summary.csv", std::ios::binary);
  if (!csv) throw UsageError("cannot write summary.csv");
  csv << summary_csv_header() << '\n';
  csv.flush();

  for (double rho : a.rhos) {
    GenSpec spec = a.data.spec;
    spec.seed = a.seed + stable_hash(rho_key(rho));
    const Splits data = make_experiment_data(spec, rho, a.data.fractions);
    for (Mode mode : modes) {
      TrainConfig cfg = base;
      cfg.mode = mode;
      cfg.seed = a.seed + stable_hash(rho_key(rho) + ";mode=" + to_string(mode));
      const fs::path cell = prepare_dir(dir / fmt::format("rho{:.2f}_{}", rho, to_string(mode)));
      std::ostringstream log;
      const Report report = train_once(cfg, data, cell, false, log);
      write_text(cell / "train.log", log.str());
      const std::string row = summary_csv_row(to_string(mode), rho, report);
      csv << row << '\n';
      csv.flush();
      out << row << '\n';
    }
  }
  return ok;
}

// fdcheck -------------------------------------------------------------------

struct FdArgs {
  std::size_t seeds = 3;
  std::size_t batch = 6;
  std::vector<std::size_t> dims{8, 10, 4};
  double h = 1e-5;
  double tol = 1e-4;
  bool inject_bug = false;
  std::uint64_t seed = 0;
};

int cmd_fdcheck(const FdArgs& a, std::ostream& out) {
  if (a.dims.size() < 2 || a.batch < 2) throw UsageError("fdcheck needs --dims with >= 2 entries and --batch >= 2");
  bool all_pass = true;
  FdReport worst;
  const std::vector<std::size_t> hidden(a.dims.begin() + 1, a.dims.end() - 1);
  for (std::size_t s = 0; s < a.seeds; ++s) {
    Rng rng = Rng(a.seed).split(s);
    Rng net_rng = rng.split("net");
    const Network net = make_network(a.dims.front(), a.dims.front(), hidden, a.dims.back(), net_rng);
    Matrix xi(a.batch, a.dims.front()), xt(a.batch, a.dims.front());
    for (double& v : xi.flat()) v = rng.normal();
    for (double& v : xt.flat()) v = rng.normal();
    std::vector<double> y(a.batch);
    for (double& v : y) v = rng.uniform();
    const LossConfig loss;
    NetworkGrad g = grad_total(net, xi, xt, y, loss);
    if (a.inject_bug) g.img.weight.front().flat()[0] *= 1.01;
    const FdReport r = fd_check_gradient(net, xi, xt, y, loss, g, a.h, a.tol);
    out << fmt::format("seed {}: {} params, max rel err {:.3e} at {} -> {}\n", s, r.checked,
                       r.max_rel_error, r.worst_parameter, r.passed ? "PASS" : "FAIL");
    if (!r.passed) all_pass = false;
    if (r.max_rel_error >= worst.max_rel_error) worst = r;
  }
  if (!all_pass) {
    out << fmt::format("worst parameter {}: analytic {:.6e} numeric {:.6e}\n", worst.worst_parameter,
                       worst.worst_analytic, worst.worst_numeric);
    return check_failed;
  }
  return ok;
}

// report --------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string csv;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::ostringstream table;
  table << summary_csv_header() << '\n';
  for (const auto& in : a.inputs) {
    fs::path path(in);
    if (fs::is_directory(path)) path /= "report.json";
    Report r;
    try {
      r = report_from_json(read_json(path));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    table << summary_csv_row(r.meta.value("mode", std::string("?")), r.meta.value("rho", 0.0), r) << '\n';
  }
  if (!a.csv.empty()) write_text(a.csv, table.str());
  out << table.str();
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noisy-correspondence retrieval experiments"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate train/dev/test dataset files");
  add_data_options(*gen_cmd, gen.data);
  gen_cmd->add_option("--rho", gen.data.rho, "noise rate injected into the train split");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "output directory (default $GSC_OUT_DIR)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train on a dataset directory or generated data");
  add_data_options(*train_cmd, train.data);
  train_cmd->add_option("--rho", train.data.rho, "noise rate when generating data");
  train_cmd->add_option("--data", train.data_dir, "directory holding train/dev/test.json");
  train_cmd->add_option("--config", train.config, "flat JSON training config");
  train_cmd->add_option("--mode", train.mode);
  auto* seed_opt = train_cmd->add_option("--seed", train.seed);
  train_cmd->add_option("--data-seed", train.data_seed, "generator seed (defaults to --seed)");
  train_cmd->add_option("--epochs", train.epochs);
  train_cmd->add_option("--out", train.out);
  train_cmd->add_flag("--dump-labels", train.dump_labels, "write per-epoch labels.jsonl");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "noise-rate x mode grid into summary.csv");
  add_data_options(*sweep_cmd, sweep.data);
  sweep_cmd->add_option("--rhos", sweep.rhos)->delimiter(',');
  sweep_cmd->add_option("--modes", sweep.modes)->delimiter(',');
  sweep_cmd->add_option("--config", sweep.config);
  sweep_cmd->add_option("--seed", sweep.seed, "master seed");
  sweep_cmd->add_option("--epochs", sweep.epochs);
  sweep_cmd->add_option("--out", sweep.out);

  FdArgs fd;
  auto* fd_cmd = app.add_subcommand("fdcheck", "compare analytic gradients with finite differences");
  fd_cmd->add_option("--seeds", fd.seeds);
  fd_cmd->add_option("--batch", fd.batch);
  fd_cmd->add_option("--dims", fd.dims, "input,hidden...,output")->delimiter(',');
  fd_cmd->add_option("--step", fd.h, "finite-difference step");
  fd_cmd->add_option("--tol", fd.tol);
  fd_cmd->add_option("--seed", fd.seed);
  fd_cmd->add_flag("--inject-bug", fd.inject_bug, "scale one analytic weight gradient by 1.01");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "summarise report.json files as CSV");
  rep_cmd->add_option("inputs", rep.inputs, "report files or run directories")->required();
  rep_cmd->add_option("--csv", rep.csv, "also write the table here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return usage_error;
  }
  train.seed_given = seed_opt->count() > 0;

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out);
    if (fd_cmd->parsed()) return cmd_fdcheck(fd, out);
    if (rep_cmd->parsed()) return cmd_report(rep, out);
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return numerical_abort;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return usage_error;
  }
  return usage_error;
}

}  // namespace gsc::cli
