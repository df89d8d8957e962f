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

// Joint BPR + contrastive training with Adam, periodic validation and early
// stopping, plus the glue that turns a manifest into a trainable problem and a
// trained model into a checkpoint.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/checkpoint.hpp"
#include "hgcl/config.hpp"
#include "hgcl/dataset.hpp"
#include "hgcl/grad_check.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/log.hpp"
#include "hgcl/metrics.hpp"
#include "hgcl/model.hpp"
#include "hgcl/objectives.hpp"
#include "hgcl/params.hpp"
#include "hgcl/tape.hpp"

namespace hgcl {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeds for the independent random streams of one run.
struct SeedPlan {
  std::uint64_t split, relations, init, sampler;

  static SeedPlan from(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::uint64_t out[4];
    std::uint32_t words[8];
    seq.generate(words, words + 8);
    for (int i = 0; i < 4; ++i) out[i] = (std::uint64_t{words[2 * i]} << 32) | words[2 * i + 1];
    return {out[0], out[1], out[2], out[3]};
  }
};

/// A data set ready for training: the leave-one-out split and the graph built
/// from its training interactions only.
struct Problem {
  IdMap ids;
  InteractionDataset ds;
  HeteroGraph graph;
};

inline Problem make_problem(const DataBundle& data, std::uint64_t split_seed) {
  Problem p;
  p.ids = data.ids;
  p.ds = split_leave_one_out(data.m, data.n, data.interactions, split_seed);
  p.graph = build_hetero_graph(data.m, data.n, p.ds.train_edges, data.social, data.item_relations);
  return p;
}

inline Problem load_problem(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("no [data] manifest configured");
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  return make_problem(load_manifest(cfg.manifest, cfg.relation_cap, seeds.relations), seeds.split);
}

struct StepLog {
  double bpr = 0.0;
  double cl_u = 0.0;  // unweighted; 0 when the term is absent
  double cl_i = 0.0;
  double total = 0.0;
  bool has_cl = false;
};

template <typename T>
struct TrainResult {
  ParamTree<Tensor<T>> params;
  MetricsReport report;
  std::vector<StepLog> steps;
  std::size_t epochs_run = 0;
  std::optional<std::size_t> best_epoch;
};

template <typename T>
class Trainer {
 public:
  using EpochCallback = std::function<void(const EpochRecord&)>;

  Trainer(RunConfig cfg, const HeteroGraph& graph, const InteractionDataset& ds)
      : cfg_(std::move(cfg)), graph_(&graph), ds_(&ds), sampler_(ds, SeedPlan::from(cfg_.seed).sampler) {
    cfg_.validate();
    if (graph.m != ds.m || graph.n != ds.n) throw std::invalid_argument("graph and dataset dimensions differ");
    params_ = init_params<T>(ModelDims{ds.m, ds.n, cfg_.model.dim, cfg_.model.rank}, SeedPlan::from(cfg_.seed).init);
  }

  ParamTree<Tensor<T>>& params() { return params_; }
  const RunConfig& config() const { return cfg_; }
  const std::vector<StepLog>& step_logs() const { return steps_; }
  void on_epoch(EpochCallback cb) { on_epoch_ = std::move(cb); }

  std::size_t steps_per_epoch() const {
    return (ds_->train_edges.size() + cfg_.batch_size - 1) / cfg_.batch_size;
  }

  /// One optimizer step on a sampled batch.
  StepLog step(std::span<const BprTriple> batch) {
    Tape<T> tape;
    ParamTree<Var> vars = record_params(tape, params_, cfg_.model);
    const ForwardCache cache = forward(tape, vars, *graph_, cfg_.model);
    LossTerms terms;
    try {
      terms = build_objective(tape, cache, vars, batch, cfg_.loss, cfg_.model);
    } catch (const std::runtime_error& e) {
      throw TrainingAborted(std::string("non-finite loss: ") + e.what());
    }
    StepLog log;
    log.bpr = static_cast<double>(tape.value(terms.bpr).item());
    log.total = static_cast<double>(tape.value(terms.total).item());
    if (terms.cl_u.valid()) log.cl_u = static_cast<double>(tape.value(terms.cl_u).item());
    if (terms.cl_i.valid()) log.cl_i = static_cast<double>(tape.value(terms.cl_i).item());
    log.has_cl = !cfg_.model.ablation.no_cl && (terms.cl_u.valid() || terms.cl_i.valid());
    if (!std::isfinite(log.total)) throw TrainingAborted("non-finite loss at step " + std::to_string(steps_.size() + 1));

    tape.finalize();
    tape.backward(terms.total);
    std::vector<Tensor<T>*> targets;
    std::vector<const Tensor<T>*> grads;
    for_each_param(
        [&](const ParamInfo& info, Tensor<T>& value, Var& v) {
          if (!param_active(info, cfg_.model)) return;
          targets.push_back(&value);
          grads.push_back(&tape.grad(v));
        },
        params_, vars);
    try {
      adam_step<T>(targets, grads, adam_, cfg_.lr);
    } catch (const std::runtime_error& e) {
      throw TrainingAborted(e.what());
    }
    steps_.push_back(log);
    return log;
  }

  EpochRecord run_epoch(std::size_t epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    const std::size_t steps = steps_per_epoch();
    for (std::size_t s = 0; s < steps; ++s) {
      const auto batch = sampler_.next_batch(cfg_.batch_size);
      const StepLog log = step(batch);
      rec.loss += log.total;
      rec.bpr += log.bpr;
      rec.cl += log.total - log.bpr;
    }
    rec.loss /= static_cast<double>(steps);
    rec.bpr /= static_cast<double>(steps);
    rec.cl /= static_cast<double>(steps);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
  }

  MetricsReport evaluate_now(std::size_t k) {
    auto [users, items] = final_embeddings(params_, *graph_, cfg_.model);
    return evaluate(users, items, *ds_, k);
  }

  /// Full schedule. Validation runs every eval_every epochs; the parameters
  /// with the best validation NDCG are kept. A non-finite loss stops training
  /// with the last parameters that produced a finite one and rethrows.
  TrainResult<T> run() {
    TrainResult<T> out;
    std::vector<EpochRecord> epochs;
    double best_ndcg = -1.0;
    std::size_t stale = 0;
    ParamTree<Tensor<T>> best;
    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      EpochRecord rec = run_epoch(epoch);
      out.epochs_run = epoch;
      const bool validate = cfg_.eval_every > 0 && (epoch % cfg_.eval_every == 0 || epoch == cfg_.epochs);
      bool stop = false;
      if (validate) {
        const MetricsReport val = evaluate_now(cfg_.eval_k);
        rec.hr = val.hr;
        rec.ndcg = val.ndcg;
        if (val.ndcg > best_ndcg) {
          best_ndcg = val.ndcg;
          best = params_;
          out.best_epoch = epoch;
          stale = 0;
        } else if (cfg_.patience > 0 && ++stale >= cfg_.patience) {
          stop = true;
        }
      }
      log::info("epoch ", epoch, " loss=", rec.loss, " bpr=", rec.bpr, " cl=", rec.cl, " time=", rec.seconds, "s",
                rec.ndcg ? " ndcg@" + std::to_string(cfg_.eval_k) + "=" + std::to_string(*rec.ndcg) : std::string());
      if (on_epoch_) on_epoch_(rec);
      epochs.push_back(rec);
      if (stop) {
        log::info("early stop after ", epoch, " epochs, best epoch ", *out.best_epoch);
        break;
      }
    }
    if (out.best_epoch) params_ = best;
    out.report = evaluate_now(cfg_.eval_k);
    out.report.epochs = std::move(epochs);
    out.params = params_;
    out.steps = steps_;
    return out;
  }

 private:
  RunConfig cfg_;
  const HeteroGraph* graph_;
  const InteractionDataset* ds_;
  BprSampler sampler_;
  ParamTree<Tensor<T>> params_;
  AdamState<T> adam_;
  std::vector<StepLog> steps_;
  EpochCallback on_epoch_;
};

/// Parameters plus the personal transform factors of every active side.
template <typename T>
Checkpoint make_checkpoint(ParamTree<Tensor<T>>& params, const RunConfig& cfg, const HeteroGraph& graph, const IdMap& ids) {
  Checkpoint ck;
  ck.m = graph.m;
  ck.n = graph.n;
  ck.d = cfg.model.dim;
  ck.k = cfg.model.rank;
  ck.layers = cfg.model.layers;
  store_params(ck, params);
  Tape<T> tape;
  ParamTree<Var> vars = record_params(tape, params, cfg.model, false);
  const ForwardCache c = forward(tape, vars, graph, cfg.model);
  auto put = [&](const std::string& name, Var v) {
    if (!v.valid()) return;
    const Tensor<T>& t = tape.value(v);
    ck.arrays.push_back({name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())});
  };
  put("derived.user_transform.w1", c.user_transform.w1);
  put("derived.user_transform.w2", c.user_transform.w2);
  put("derived.item_transform.w1", c.item_transform.w1);
  put("derived.item_transform.w2", c.item_transform.w2);
  ck.user_ids = ids.users();
  ck.item_ids = ids.items();
  ck.config_text = config_to_text(cfg, false);
  return ck;
}

/// Config embedded in a checkpoint, checked against its header.
inline RunConfig checkpoint_config(const Checkpoint& ck) {
  std::istringstream in(ck.config_text);
  RunConfig cfg = parse_config(in, "<checkpoint config>");
  if (cfg.model.dim != ck.d || cfg.model.rank != ck.k || cfg.model.layers != ck.layers) {
    throw CheckpointError("checkpoint header disagrees with its embedded config");
  }
  return cfg;
}

/// Rebuilds the evaluation problem for a checkpoint from a manifest. The
/// split is reproduced from the checkpoint's seed.
inline Problem problem_for_checkpoint(const Checkpoint& ck, const RunConfig& cfg, const std::filesystem::path& manifest) {
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  DataBundle data = load_manifest(manifest, cfg.relation_cap, seeds.relations);
  if (data.m != ck.m || data.n != ck.n) {
    throw ShapeError("dimension mismatch: checkpoint has m=" + std::to_string(ck.m) + " n=" + std::to_string(ck.n) +
                     " but data has m=" + std::to_string(data.m) + " n=" + std::to_string(data.n));
  }
  if (data.ids.users() != ck.user_ids || data.ids.items() != ck.item_ids) {
    throw ShapeError("id tables of checkpoint and data differ");
  }
  return make_problem(data, seeds.split);
}

/// Evaluation of a stored model on its problem. Pure in (checkpoint, data, k).
inline MetricsReport evaluate_checkpoint(const Checkpoint& ck, const Problem& p, std::size_t k) {
  const RunConfig cfg = checkpoint_config(ck);
  ParamTree<Tensor<double>> params = restore_params<double>(ck);
  auto [users, items] = final_embeddings(params, p.graph, cfg.model);
  return evaluate(users, items, p.ds, k);
}

/// Six users, eight items, every view populated.
struct TinyInstance {
  HeteroGraph graph;
  std::vector<BprTriple> batch;
  ModelConfig model;
  LossConfig loss;
};

inline TinyInstance tiny_instance() {
  TinyInstance t;
  const std::vector<Edge> ui = {{0, 0}, {0, 1}, {0, 4}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {2, 7}, {3, 3},
                                {3, 4}, {4, 5}, {4, 6}, {4, 0}, {5, 6}, {5, 7}, {5, 2}, {1, 5}, {3, 6}};
  const std::vector<Edge> uu = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {0, 3}};
  const std::vector<Edge> ii = {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {5, 6}, {6, 7}, {3, 7}};
  t.graph = build_hetero_graph(6, 8, ui, uu, ii);
  t.batch = {{0, 0, 2}, {1, 2, 6}, {2, 7, 0}, {3, 4, 1}, {4, 5, 3}, {5, 6, 1}, {0, 4, 7}, {2, 3, 5}};
  t.model.dim = 4;
  t.model.rank = 2;
  t.model.layers = 2;
  t.model.cl_negatives = ClNegatives::kFull;
  t.loss.beta = 0.3;
  t.loss.tau = 0.2;
  t.loss.lambda = 1e-4;
  return t;
}

/// Finite-difference check of the full objective with respect to every
/// trainable parameter.
inline GradCheckResult check_full_loss(const HeteroGraph& graph, std::span<const BprTriple> batch, const ModelConfig& model,
                                       const LossConfig& loss, std::uint64_t seed, const GradCheckOptions& opts = {}) {
  ParamTree<Tensor<double>> init = init_params<double>(ModelDims{graph.m, graph.n, model.dim, model.rank}, seed);
  std::vector<ParamInfo> infos;
  std::vector<Tensor<double>> inputs;
  ParamTree<Tensor<double>> fixed = init;
  for_each_param(
      [&](const ParamInfo& info, Tensor<double>& t) {
        if (!param_active(info, model)) return;
        infos.push_back(info);
        inputs.push_back(t);
      },
      init);
  auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
    ParamTree<Var> vars;
    std::size_t next = 0;
    for_each_param(
        [&](const ParamInfo& info, Tensor<double>& value, Var& slot) {
          slot = param_active(info, model) ? leaves[next++] : tape.constant(value);
        },
        fixed, vars);
    const ForwardCache c = forward(tape, vars, graph, model);
    return build_objective(tape, c, vars, batch, loss, model).total;
  };
  return grad_check(build, std::move(inputs), opts);
}

}  // namespace hgcl
