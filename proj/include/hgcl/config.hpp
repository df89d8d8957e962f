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

// Run configuration: flat key=value text grouped under [data], [model],
// [loss] and [train] sections.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/edge_io.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/log.hpp"
#include "hgcl/model.hpp"
#include "hgcl/objectives.hpp"

namespace hgcl {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Precision { kFloat64, kFloat32 };

struct RunConfig {
  // [data]
  std::string manifest;
  std::size_t relation_cap = kDefaultRelationCap;
  // [model]
  ModelConfig model;
  Precision precision = Precision::kFloat64;
  // [loss]
  LossConfig loss;
  // [train]
  double lr = 0.045;
  std::size_t batch_size = 2048;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  std::size_t eval_every = 5;
  std::size_t patience = 3;  // validations without NDCG improvement before stopping; 0 disables
  std::size_t eval_k = 10;
  std::string checkpoint;
  std::string metrics;    // CSV
  std::string epoch_log;  // JSON lines

  void validate() const {
    if (model.dim < 1) throw ConfigError("d must be >= 1");
    if (model.layers < 1) throw ConfigError("layers must be >= 1");
    if (model.layers > 3) log::warn("layers=", model.layers, " lies outside the usual range 1..3");
    if (model.rank < 1 || model.rank >= model.dim) throw ConfigError("k must satisfy 1 <= k < d");
    if (!(model.alpha_u >= 0 && model.alpha_u <= 1) || !(model.alpha_i >= 0 && model.alpha_i <= 1)) {
      throw ConfigError("alpha_u and alpha_i must lie in [0, 1]");
    }
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_k < 1) throw ConfigError("eval_k must be >= 1");
    try {
      loss.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for '" + key + "': " + v);
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
    auto out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid non-negative integer for '" + key + "': " + v);
  }
}

}  // namespace detail

/// Applies one ablation name (cl, meta, uu, ii).
inline void enable_ablation(Ablation& a, const std::string& name) {
  if (name == "cl") a.no_cl = true;
  else if (name == "meta") a.no_meta = true;
  else if (name == "uu") a.no_uu = true;
  else if (name == "ii") a.no_ii = true;
  else throw ConfigError("unknown ablation '" + name + "' (expected cl, meta, uu or ii)");
}

inline std::string ablation_list(const Ablation& a) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(a.no_cl, "cl");
  add(a.no_meta, "meta");
  add(a.no_uu, "uu");
  add(a.no_ii, "ii");
  return out;
}

inline RunConfig parse_config(std::istream& in, const std::string& where = "<config>") {
  RunConfig c;
  std::string line, section;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "model" && section != "loss" && section != "train") {
        throw ParseError(where, lineno, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where, lineno, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    auto unknown = [&] { throw ParseError(where, lineno, "unknown key '" + key + "' in section [" + section + "]"); };
    try {
      if (section == "data") {
        if (key == "manifest") c.manifest = val;
        else if (key == "relation_cap") c.relation_cap = detail::to_uint(full, val);
        else unknown();
      } else if (section == "model") {
        if (key == "d") c.model.dim = detail::to_uint(full, val);
        else if (key == "layers") c.model.layers = detail::to_uint(full, val);
        else if (key == "k") c.model.rank = detail::to_uint(full, val);
        else if (key == "alpha_u") c.model.alpha_u = detail::to_double(full, val);
        else if (key == "alpha_i") c.model.alpha_i = detail::to_double(full, val);
        else if (key == "precision") {
          if (val == "float64") c.precision = Precision::kFloat64;
          else if (val == "float32") c.precision = Precision::kFloat32;
          else throw ConfigError("precision must be float64 or float32");
        } else unknown();
      } else if (section == "loss") {
        if (key == "tau") c.loss.tau = detail::to_double(full, val);
        else if (key == "alpha1") c.loss.alpha1 = detail::to_double(full, val);
        else if (key == "alpha2") c.loss.alpha2 = detail::to_double(full, val);
        else if (key == "beta") c.loss.beta = detail::to_double(full, val);
        else if (key == "lambda") c.loss.lambda = detail::to_double(full, val);
        else if (key == "cl_negatives") {
          if (val == "auto") c.model.cl_negatives = ClNegatives::kAuto;
          else if (val == "full") c.model.cl_negatives = ClNegatives::kFull;
          else if (val == "batch") c.model.cl_negatives = ClNegatives::kBatch;
          else throw ConfigError("cl_negatives must be auto, full or batch");
        } else unknown();
      } else if (section == "train") {
        if (key == "lr") c.lr = detail::to_double(full, val);
        else if (key == "batch_size") c.batch_size = detail::to_uint(full, val);
        else if (key == "epochs") c.epochs = detail::to_uint(full, val);
        else if (key == "seed") c.seed = detail::to_uint(full, val);
        else if (key == "eval_every") c.eval_every = detail::to_uint(full, val);
        else if (key == "patience") c.patience = detail::to_uint(full, val);
        else if (key == "eval_k") c.eval_k = detail::to_uint(full, val);
        else if (key == "ablate") {
          std::stringstream ss(val);
          std::string item;
          while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) enable_ablation(c.model.ablation, item);
          }
        } else if (key == "checkpoint") c.checkpoint = val;
        else if (key == "metrics") c.metrics = val;
        else if (key == "epoch_log") c.epoch_log = val;
        else unknown();
      } else {
        throw ParseError(where, lineno, "key outside of a section");
      }
    } catch (const ConfigError& e) {
      throw ParseError(where, lineno, e.what());
    }
  }
  return c;
}

/// Loads a config file; relative data/output paths resolve against its directory.
inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  RunConfig c = parse_config(in, path.string());
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  resolve(c.manifest);
  resolve(c.checkpoint);
  resolve(c.metrics);
  resolve(c.epoch_log);
  return c;
}

/// Serializes the config. Without paths the text only carries settings that
/// determine the trained model, which is what checkpoints embed.
inline std::string config_to_text(const RunConfig& c, bool with_paths = true) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "[data]\n";
  if (with_paths && !c.manifest.empty()) os << "manifest = " << c.manifest << '\n';
  os << "relation_cap = " << c.relation_cap << '\n';
  os << "[model]\n"
     << "d = " << c.model.dim << '\n'
     << "layers = " << c.model.layers << '\n'
     << "k = " << c.model.rank << '\n'
     << "alpha_u = " << c.model.alpha_u << '\n'
     << "alpha_i = " << c.model.alpha_i << '\n'
     << "precision = " << (c.precision == Precision::kFloat32 ? "float32" : "float64") << '\n';
  const char* neg = c.model.cl_negatives == ClNegatives::kFull ? "full" : c.model.cl_negatives == ClNegatives::kBatch ? "batch" : "auto";
  os << "[loss]\n"
     << "tau = " << c.loss.tau << '\n'
     << "alpha1 = " << c.loss.alpha1 << '\n'
     << "alpha2 = " << c.loss.alpha2 << '\n'
     << "beta = " << c.loss.beta << '\n'
     << "lambda = " << c.loss.lambda << '\n'
     << "cl_negatives = " << neg << '\n';
  os << "[train]\n"
     << "lr = " << c.lr << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "epochs = " << c.epochs << '\n'
     << "seed = " << c.seed << '\n'
     << "eval_every = " << c.eval_every << '\n'
     << "patience = " << c.patience << '\n'
     << "eval_k = " << c.eval_k << '\n';
  if (const auto abl = ablation_list(c.model.ablation); !abl.empty()) os << "ablate = " << abl << '\n';
  if (with_paths) {
    if (!c.checkpoint.empty()) os << "checkpoint = " << c.checkpoint << '\n';
    if (!c.metrics.empty()) os << "metrics = " << c.metrics << '\n';
    if (!c.epoch_log.empty()) os << "epoch_log = " << c.epoch_log << '\n';
  }
  return os.str();
}

}  // namespace hgcl
