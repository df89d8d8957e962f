/*
 * Copyright 2026 The hgcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
// failure. Diagnostics go to stderr; metrics go to the files named on the
// command line or in the config.

#pragma once

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hgcl/checkpoint.hpp"
#include "hgcl/config.hpp"
#include "hgcl/log.hpp"
#include "hgcl/meta.hpp"
#include "hgcl/metrics.hpp"
#include "hgcl/synthetic.hpp"
#include "hgcl/trainer.hpp"

namespace hgcl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Exceptions of this type map to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace cli {

inline nlohmann::json epoch_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"loss", r.loss}, {"bpr", r.bpr}, {"cl", r.cl}, {"seconds", r.seconds}};
  if (r.hr) j["hr"] = *r.hr;
  if (r.ndcg) j["ndcg"] = *r.ndcg;
  return j;
}

inline std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

template <typename T>
void run_training(const RunConfig& cfg) {
  const Problem problem = load_problem(cfg);
  log::info("data: ", problem.graph.m, " users, ", problem.graph.n, " items, ", problem.graph.ui_edges,
            " train interactions, ", problem.graph.uu_edges, " social and ", problem.graph.ii_edges,
            " item-relation directed edges");
  Trainer<T> trainer(cfg, problem.graph, problem.ds);
  std::optional<std::ofstream> epoch_log;
  if (!cfg.epoch_log.empty()) epoch_log.emplace(open_output(cfg.epoch_log));
  trainer.on_epoch([&](const EpochRecord& r) {
    if (epoch_log) *epoch_log << epoch_json(r).dump() << '\n' << std::flush;
  });
  TrainResult<T> result;
  try {
    result = trainer.run();
  } catch (const TrainingAborted& e) {
    if (!cfg.checkpoint.empty()) {
      save_checkpoint(make_checkpoint(trainer.params(), cfg, problem.graph, problem.ids), cfg.checkpoint);
      log::error("training aborted; last finite parameters saved to ", cfg.checkpoint);
    }
    throw;
  }
  log::info("final hr@", result.report.k, "=", result.report.hr, " ndcg@", result.report.k, "=", result.report.ndcg);
  if (!cfg.checkpoint.empty()) {
    save_checkpoint(make_checkpoint(result.params, cfg, problem.graph, problem.ids), cfg.checkpoint);
    log::info("checkpoint written to ", cfg.checkpoint);
  } else {
    log::warn("no [train] checkpoint path configured; the trained model is not saved");
  }
  if (!cfg.metrics.empty()) {
    auto out = open_output(cfg.metrics);
    write_metrics_csv(out, result.report);
  }
}

inline void train_command(const std::string& config_path, const std::vector<std::string>& ablations,
                          std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_config(config_path);
  for (const auto& a : ablations) enable_ablation(cfg.model.ablation, a);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  if (cfg.precision == Precision::kFloat32) {
    run_training<float>(cfg);
  } else {
    run_training<double>(cfg);
  }
}

inline void eval_command(const std::string& checkpoint, const std::string& manifest, std::size_t k, const std::string& out_path) {
  if (k < 1) throw UsageError("--k must be >= 1");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const RunConfig cfg = checkpoint_config(ck);
  const Problem problem = problem_for_checkpoint(ck, cfg, manifest);
  const MetricsReport rep = evaluate_checkpoint(ck, problem, k);
  log::info("hr@", k, "=", rep.hr, " ndcg@", k, "=", rep.ndcg, " over ", rep.users, " users");
  if (out_path.empty()) {
    write_metrics_csv(std::cout, rep);
  } else {
    auto out = open_output(out_path);
    write_metrics_csv(out, rep);
  }
}

inline void gen_synth_command(const std::string& dir, const SyntheticSpec& spec) {
  const SyntheticData data = generate_synthetic(spec);
  const auto manifest = write_synthetic(data, dir);
  log::info("wrote ", data.users, " users, ", data.items, " items, ", data.interactions.size(), " interactions, ",
            data.social.size(), " friendships; manifest ", manifest.string());
}

inline void export_command(const std::string& checkpoint, ExternalId node, const std::string& side, const std::string& out_path) {
  if (side != "user" && side != "item") throw UsageError("--side must be user or item");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto& ids = side == "user" ? ck.user_ids : ck.item_ids;
  auto it = std::lower_bound(ids.begin(), ids.end(), node);
  if (it == ids.end() || *it != node) throw std::out_of_range("unknown " + side + " id " + std::to_string(node));
  const std::size_t row = static_cast<std::size_t>(it - ids.begin());
  const NamedArray* w1 = ck.find("derived." + side + "_transform.w1");
  const NamedArray* w2 = ck.find("derived." + side + "_transform.w2");
  if (!w1 || !w2) throw CheckpointError("checkpoint holds no " + side + " transforms (side or meta transfer ablated)");
  const Tensor<double> a(w1->shape, w1->values), b(w2->shape, w2->values);
  auto out = open_output(out_path);
  write_transform_csv(out, transform_matrix(a, b, row));
  log::info("wrote ", ck.d, "x", ck.d, " transform of ", side, " ", node, " to ", out_path);
}

/// Full-objective gradient check. Uses the configured data when a manifest
/// is set, the built-in tiny instance otherwise. Returns false on failure.
inline bool grad_check_command(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  cfg.validate();
  GradCheckResult res;
  if (cfg.manifest.empty()) {
    TinyInstance t = tiny_instance();
    ModelConfig model = cfg.model;
    model.dim = t.model.dim;
    model.rank = t.model.rank;
    res = check_full_loss(t.graph, t.batch, model, cfg.loss, cfg.seed);
  } else {
    const Problem p = load_problem(cfg);
    BprSampler sampler(p.ds, SeedPlan::from(cfg.seed).sampler);
    const auto batch = sampler.next_batch(std::min<std::size_t>(cfg.batch_size, 256));
    res = check_full_loss(p.graph, batch, cfg.model, cfg.loss, cfg.seed);
  }
  constexpr double kTolerance = 1e-4;
  std::cout << "max_rel_error=" << res.max_rel_error << " checked=" << res.checked << " excluded=" << res.excluded << '\n';
  return res.max_rel_error < kTolerance;
}

}  // namespace cli

inline int cli_main(int argc, char** argv) {
  CLI::App app{"hgcl: heterogeneous graph contrastive recommender"};
  app.require_subcommand(1);

  std::string config, checkpoint, data, out, side;
  std::vector<std::string> ablations;
  std::optional<std::uint64_t> seed;
  std::size_t k = 10;
  ExternalId node = 0;
  SyntheticSpec spec;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config, "config file")->required();
  train->add_option("--ablate", ablations, "disable a component: cl, meta, uu or ii (repeatable)")
      ->check(CLI::IsMember({"cl", "meta", "uu", "ii"}));
  train->add_option("--seed", seed, "override [train] seed");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data, "dataset manifest")->required();
  eval->add_option("--k", k, "ranking cutoff");
  eval->add_option("--out", out, "metrics CSV (default stdout)");

  auto* gen = app.add_subcommand("gen-synth", "write a synthetic data set");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--users", spec.users, "user count");
  gen->add_option("--items", spec.items, "item count");
  gen->add_option("--homophily", spec.homophily, "chance a friendship stays inside a cluster")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", spec.seed, "random seed");

  auto* exp = app.add_subcommand("export-transforms", "write one node's personal transform as CSV");
  exp->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exp->add_option("--node", node, "external node id")->required();
  exp->add_option("--side", side, "user or item")->required()->check(CLI::IsMember({"user", "item"}));
  exp->add_option("--out", out, "output CSV")->required();

  auto* gc = app.add_subcommand("grad-check", "compare analytic and numeric gradients of the objective");
  gc->add_option("--config", config, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (verbose) log::set_level(log::Level::kDebug);

  try {
    if (*train) {
      cli::train_command(config, ablations, seed);
    } else if (*eval) {
      cli::eval_command(checkpoint, data, k, out);
    } else if (*gen) {
      cli::gen_synth_command(out, spec);
    } else if (*exp) {
      cli::export_command(checkpoint, node, side, out);
    } else if (*gc) {
      if (!cli::grad_check_command(config)) {
        log::error("gradient check failed");
        return kExitFailure;
      }
    }
  } catch (const UsageError& e) {
    log::error(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace hgcl
