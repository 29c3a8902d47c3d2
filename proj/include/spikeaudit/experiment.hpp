// Copyright 2026 The SpikeAudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Experiment orchestration: a strict JSON config drives dataset creation,
// the audit game, attack scoring, and report files. Unknown config keys are
// rejected so audit settings cannot drift silently. Every output file
// carries the config hash (computed over the config minus its output
// directory) and the master seed; reference checkpoints are reused across
// runs when that hash matches.

#ifndef SPIKEAUDIT_EXPERIMENT_HPP_
#define SPIKEAUDIT_EXPERIMENT_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spikeaudit/attacks.hpp"
#include "spikeaudit/checkpoint.hpp"
#include "spikeaudit/dataset.hpp"
#include "spikeaudit/game.hpp"
#include "spikeaudit/metrics.hpp"
#include "spikeaudit/trainer.hpp"

namespace spikeaudit {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what)
      : std::runtime_error("config: " + what) {}
};

// Failures surface with the pipeline stage that raised them, so a nonzero
// exit can name where the run stopped.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage_name, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage_name)) {}
  std::string stage;
};

enum class DatasetKind : std::uint8_t { kBlobs = 0, kIdx = 1 };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kBlobs;
  int n_per_class = 100;
  int classes = 2;
  int dim = 2;
  double separation = 4.0;
  std::string images_path;  // idx only
  std::string labels_path;  // idx only
};

struct DropoutGridSpec {
  bool enabled = false;
  std::vector<double> p_grid = {0.05, 0.1, 0.2};
  std::vector<int> n_grid = {4, 8, 16};
  AttackKind objective = AttackKind::kRmia;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t master_seed = 0;
  std::string out_dir = "out";
  DatasetSpec dataset;
  ModelSpec model;                      // audited target architecture
  std::optional<ModelSpec> pool_model;  // reference pool; target's by default
  std::vector<int> latency_list;        // latency sweep axis; optional
  TrainConfig train;
  std::string regime = "standard";  // or "overfit"
  int n_pairs = 2;
  std::vector<AttackKind> attacks = {
      AttackKind::kAttackP, AttackKind::kAttackPOriginal, AttackKind::kAttackR,
      AttackKind::kRmia};
  DropoutGridSpec dropout;
};

namespace cfgio {

inline void check_keys(const json& o, std::vector<std::string> allowed,
                       const std::string& ctx) {
  if (!o.is_object()) throw ConfigError(ctx + " must be an object");
  for (const auto& item : o.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) ==
        allowed.end()) {
      throw ConfigError("unknown key '" + item.key() + "' in " + ctx);
    }
  }
}

inline const json& require(const json& o, const std::string& key,
                           const std::string& ctx) {
  auto it = o.find(key);
  if (it == o.end()) throw ConfigError(ctx + " is missing '" + key + "'");
  return *it;
}

template <typename T>
T get_or(const json& o, const std::string& key, T fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  return it->get<T>();
}

inline Activation parse_activation(const std::string& name) {
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

inline ModelSpec parse_model(const json& o, const std::string& ctx) {
  check_keys(o,
             {"kind", "hidden_widths", "latency", "decay", "threshold",
              "u_reset", "activation", "conv_channels", "conv_kernel"},
             ctx);
  ModelSpec m;
  const std::string kind = require(o, "kind", ctx).get<std::string>();
  if (kind == "snn") {
    m.kind = ModelKind::kSpiking;
  } else if (kind == "ann") {
    m.kind = ModelKind::kPlain;
  } else {
    throw ConfigError("unknown model kind '" + kind + "'");
  }
  m.hidden_widths = get_or(o, "hidden_widths", std::vector<int>{16});
  m.latency = get_or(o, "latency", 1);
  m.decay = static_cast<float>(get_or(o, "decay", 1.0));
  m.threshold = static_cast<float>(get_or(o, "threshold", 1.0));
  m.u_reset = static_cast<float>(get_or(o, "u_reset", 0.0));
  m.activation =
      parse_activation(get_or<std::string>(o, "activation", "sigmoid"));
  m.conv_channels = get_or(o, "conv_channels", 0);
  m.conv_kernel = get_or(o, "conv_kernel", 3);
  return m;
}

inline json model_json(const ModelSpec& m) {
  json o;
  o["kind"] = m.kind == ModelKind::kSpiking ? "snn" : "ann";
  o["hidden_widths"] = m.hidden_widths;
  o["latency"] = m.latency;
  o["decay"] = static_cast<double>(m.decay);
  o["threshold"] = static_cast<double>(m.threshold);
  o["u_reset"] = static_cast<double>(m.u_reset);
  o["activation"] = m.activation == Activation::kSigmoid ? "sigmoid" : "relu";
  o["conv_channels"] = m.conv_channels;
  o["conv_kernel"] = m.conv_kernel;
  return o;
}

}  // namespace cfgio

inline ExperimentConfig parse_experiment_config(const json& root) {
  using namespace cfgio;
  check_keys(root,
             {"schema_version", "master_seed", "out_dir", "dataset", "model",
              "pool_model", "latency_list", "train", "regime", "n_pairs",
              "attacks", "dropout", "config_hash"},
             "config");
  ExperimentConfig cfg;
  cfg.schema_version = require(root, "schema_version", "config").get<int>();
  if (cfg.schema_version != 1) {
    throw ConfigError("unsupported schema_version " +
                      std::to_string(cfg.schema_version));
  }
  cfg.master_seed =
      require(root, "master_seed", "config").get<std::uint64_t>();
  cfg.out_dir = get_or<std::string>(root, "out_dir", "out");

  const json& ds = require(root, "dataset", "config");
  check_keys(ds,
             {"kind", "n_per_class", "classes", "dim", "separation", "images",
              "labels"},
             "dataset");
  const std::string ds_kind = require(ds, "kind", "dataset").get<std::string>();
  if (ds_kind == "blobs") {
    cfg.dataset.kind = DatasetKind::kBlobs;
    cfg.dataset.n_per_class = get_or(ds, "n_per_class", 100);
    cfg.dataset.classes = get_or(ds, "classes", 2);
    cfg.dataset.dim = get_or(ds, "dim", 2);
    cfg.dataset.separation = get_or(ds, "separation", 4.0);
  } else if (ds_kind == "idx") {
    cfg.dataset.kind = DatasetKind::kIdx;
    cfg.dataset.images_path = require(ds, "images", "dataset").get<std::string>();
    cfg.dataset.labels_path = require(ds, "labels", "dataset").get<std::string>();
  } else {
    throw ConfigError("unknown dataset kind '" + ds_kind + "'");
  }

  cfg.model = parse_model(require(root, "model", "config"), "model");
  if (root.contains("pool_model")) {
    cfg.pool_model = parse_model(root["pool_model"], "pool_model");
  }
  cfg.latency_list = get_or(root, "latency_list", std::vector<int>{});

  const json& tr = require(root, "train", "config");
  check_keys(tr,
             {"epochs", "batch_size", "learning_rate", "momentum",
              "weight_decay", "optimizer", "surrogate_width"},
             "train");
  cfg.train.epochs = get_or(tr, "epochs", 30);
  cfg.train.batch_size = get_or(tr, "batch_size", 32);
  cfg.train.learning_rate =
      static_cast<float>(get_or(tr, "learning_rate", 0.1));
  cfg.train.momentum = static_cast<float>(get_or(tr, "momentum", 0.9));
  cfg.train.weight_decay = static_cast<float>(get_or(tr, "weight_decay", 0.0));
  const std::string opt = get_or<std::string>(tr, "optimizer", "sgd_momentum");
  if (opt == "sgd_momentum") {
    cfg.train.optimizer = Optimizer::kSgdMomentum;
  } else if (opt == "adam") {
    cfg.train.optimizer = Optimizer::kAdam;
  } else {
    throw ConfigError("unknown optimizer '" + opt + "'");
  }
  cfg.train.surrogate_width =
      static_cast<float>(get_or(tr, "surrogate_width", 1.0));

  cfg.regime = get_or<std::string>(root, "regime", "standard");
  if (cfg.regime != "standard" && cfg.regime != "overfit") {
    throw ConfigError("unknown regime '" + cfg.regime + "'");
  }
  cfg.n_pairs = get_or(root, "n_pairs", 2);

  // Attack names are validated by the attack layer; re-badge its complaint
  // so every config problem surfaces as a ConfigError.
  auto parse_attack = [](const std::string& name) {
    try {
      return attack_kind_from_name(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  if (root.contains("attacks")) {
    cfg.attacks.clear();
    for (const json& a : root["attacks"]) {
      cfg.attacks.push_back(parse_attack(a.get<std::string>()));
    }
    if (cfg.attacks.empty()) throw ConfigError("attack list is empty");
  }

  if (root.contains("dropout")) {
    const json& dr = root["dropout"];
    cfgio::check_keys(dr, {"enabled", "p_grid", "n_grid", "objective"},
                      "dropout");
    cfg.dropout.enabled = get_or(dr, "enabled", false);
    cfg.dropout.p_grid =
        get_or(dr, "p_grid", std::vector<double>{0.05, 0.1, 0.2});
    cfg.dropout.n_grid = get_or(dr, "n_grid", std::vector<int>{4, 8, 16});
    cfg.dropout.objective =
        parse_attack(get_or<std::string>(dr, "objective", "rmia"));
  }
  return cfg;
}

inline json experiment_config_json(const ExperimentConfig& cfg) {
  using namespace cfgio;
  json root;
  root["schema_version"] = cfg.schema_version;
  root["master_seed"] = cfg.master_seed;
  root["out_dir"] = cfg.out_dir;

  json ds;
  if (cfg.dataset.kind == DatasetKind::kBlobs) {
    ds["kind"] = "blobs";
    ds["n_per_class"] = cfg.dataset.n_per_class;
    ds["classes"] = cfg.dataset.classes;
    ds["dim"] = cfg.dataset.dim;
    ds["separation"] = cfg.dataset.separation;
  } else {
    ds["kind"] = "idx";
    ds["images"] = cfg.dataset.images_path;
    ds["labels"] = cfg.dataset.labels_path;
  }
  root["dataset"] = ds;

  root["model"] = model_json(cfg.model);
  if (cfg.pool_model) root["pool_model"] = model_json(*cfg.pool_model);
  if (!cfg.latency_list.empty()) root["latency_list"] = cfg.latency_list;

  json tr;
  tr["epochs"] = cfg.train.epochs;
  tr["batch_size"] = cfg.train.batch_size;
  tr["learning_rate"] = static_cast<double>(cfg.train.learning_rate);
  tr["momentum"] = static_cast<double>(cfg.train.momentum);
  tr["weight_decay"] = static_cast<double>(cfg.train.weight_decay);
  tr["optimizer"] = cfg.train.optimizer == Optimizer::kSgdMomentum
                        ? "sgd_momentum"
                        : "adam";
  tr["surrogate_width"] = static_cast<double>(cfg.train.surrogate_width);
  root["train"] = tr;

  root["regime"] = cfg.regime;
  root["n_pairs"] = cfg.n_pairs;
  json attacks = json::array();
  for (AttackKind a : cfg.attacks) attacks.push_back(attack_name(a));
  root["attacks"] = attacks;

  json dr;
  dr["enabled"] = cfg.dropout.enabled;
  dr["p_grid"] = cfg.dropout.p_grid;
  dr["n_grid"] = cfg.dropout.n_grid;
  dr["objective"] = attack_name(cfg.dropout.objective);
  root["dropout"] = dr;
  return root;
}

// 64-bit FNV-1a over the canonical config serialization, output directory
// excluded so relocating results does not invalidate cached models.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json root = experiment_config_json(cfg);
  root.erase("out_dir");
  const std::string canon = root.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  json root;
  try {
    root = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return parse_experiment_config(root);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Dataset realize_dataset(const DatasetSpec& spec,
                               std::uint64_t master_seed) {
  if (spec.kind == DatasetKind::kBlobs) {
    return make_blobs(spec.n_per_class, spec.classes, spec.dim,
                      static_cast<float>(spec.separation), master_seed);
  }
  return load_idx(spec.images_path, spec.labels_path);
}

struct RunStats {
  int models_trained = 0;
  int models_reused = 0;
};

struct ExperimentResult {
  std::uint64_t hash = 0;
  GameResult game;
  ScoreTable scores;
  std::vector<std::pair<AttackKind, AttackReport>> reports;
  std::optional<GridSearchResult> grid;
  RunStats stats;
};

namespace detail {

inline std::string output_header(std::uint64_t hash, std::uint64_t seed) {
  return "# config_hash=" + hash_hex(hash) +
         " master_seed=" + std::to_string(seed);
}

inline void write_roc_csv(std::ostream& out, const std::string& header,
                          const RocCurve& curve) {
  out << header << "\n" << "beta,fpr,tpr\n";
  char buf[128];
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.beta, p.fpr,
                  p.tpr);
    out << buf;
  }
}

inline void write_hist_csv(std::ostream& out, const std::string& header,
                           const std::vector<HistogramBin>& bins) {
  out << header << "\n" << "bin_lo,bin_hi,member_count,nonmember_count\n";
  char buf[128];
  for (const HistogramBin& b : bins) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d\n", b.lo, b.hi,
                  b.member_count, b.nonmember_count);
    out << buf;
  }
}

inline std::string attacks_csv_list(const std::vector<AttackKind>& attacks) {
  std::string out;
  for (size_t i = 0; i < attacks.size(); ++i) {
    if (i) out += ",";
    out += attack_name(attacks[i]);
  }
  return out;
}

}  // namespace detail

// report.json carries the run identity, the estimator settings, and one
// block per selected attack. The same function serves fresh runs and
// score-file replays, which keeps the two byte-identical.
inline json report_json(std::uint64_t hash, std::uint64_t master_seed,
                        const std::vector<AttackKind>& attacks,
                        const ScoreTable& st) {
  json root;
  root["config_hash"] = hash_hex(hash);
  root["master_seed"] = master_seed;
  json dr;
  dr["enabled"] = st.dropout_enabled;
  dr["p"] = static_cast<double>(st.dropout_p);
  dr["passes"] = st.dropout_passes;
  root["dropout"] = dr;
  root["pool_kind"] = st.pool_kind;
  root["latency"] = st.latency;

  json blocks;
  for (AttackKind kind : attacks) {
    AttackReport r = summarize_attack(st.scores_for(kind), st.member);
    json b;
    b["auc"] = r.auc;
    b["tpr_at_fpr_0.001"] = r.tpr_at_fpr_1e3;
    b["tpr_at_fpr_0.01"] = r.tpr_at_fpr_1e2;
    b["fpr_0.001_below_resolution"] = r.fpr_1e3_below_resolution;
    b["fpr_0.01_below_resolution"] = r.fpr_1e2_below_resolution;
    blocks[attack_name(kind)] = b;
  }
  root["attacks"] = blocks;
  return root;
}

// Loads a scores.csv written by write_scores_csv plus its identity comment.
struct LoadedScores {
  ScoreTable table;
  std::uint64_t hash = 0;
  std::uint64_t master_seed = 0;
  std::vector<AttackKind> attacks;
};

inline LoadedScores read_scores_csv(std::istream& in) {
  LoadedScores out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw StageError("report", "scores file lacks identity header");
  }
  {
    std::istringstream hs(line.substr(2));
    std::string field;
    bool have_hash = false, have_seed = false;
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "config_hash") {
        out.hash = std::stoull(value, nullptr, 16);
        have_hash = true;
      } else if (key == "master_seed") {
        out.master_seed = std::stoull(value);
        have_seed = true;
      } else if (key == "attacks") {
        std::istringstream as(value);
        std::string name;
        while (std::getline(as, name, ',')) {
          out.attacks.push_back(attack_kind_from_name(name));
        }
      }
    }
    if (!have_hash || !have_seed || out.attacks.empty()) {
      throw StageError("report", "scores identity header incomplete");
    }
  }
  if (!std::getline(in, line)) {
    throw StageError("report", "scores file truncated");
  }
  const std::string expected =
      "sample_id,member,attack_p,attack_p_orig,attack_r,rmia,dropout_p,"
      "dropout_N,pool_kind,T";
  if (line != expected) {
    throw StageError("report", "unexpected scores columns: " + line);
  }

  ScoreTable& st = out.table;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    auto next = [&]() {
      if (!std::getline(row, cell, ',')) {
        throw StageError("report", "short scores row: " + line);
      }
      return cell;
    };
    st.sample_ids.push_back(std::stoi(next()));
    st.member.push_back(std::stoi(next()));
    st.attack_p.push_back(std::stod(next()));
    st.attack_p_orig.push_back(std::stod(next()));
    st.attack_r.push_back(std::stod(next()));
    st.rmia.push_back(std::stod(next()));
    const float p = std::stof(next());
    const int passes = std::stoi(next());
    const std::string pool_kind = next();
    const int latency = std::stoi(next());
    if (first) {
      st.dropout_p = p;
      st.dropout_passes = passes;
      st.dropout_enabled = p > 0.0f || passes > 1;
      st.pool_kind = pool_kind;
      st.latency = latency;
      first = false;
    }
  }
  if (first) throw StageError("report", "scores file has no rows");
  return out;
}

// Writes report.json and the per-attack roc/hist files for `st` under
// `dir`. Shared by fresh runs and score replays.
inline void write_report_files(const std::filesystem::path& dir,
                               std::uint64_t hash, std::uint64_t master_seed,
                               const std::vector<AttackKind>& attacks,
                               const ScoreTable& st) {
  namespace fs = std::filesystem;
  const std::string header = detail::output_header(hash, master_seed);
  {
    std::ofstream f(dir / "report.json", std::ios::trunc);
    if (!f) throw StageError("report", "cannot write report.json");
    f << report_json(hash, master_seed, attacks, st).dump(2) << "\n";
  }
  for (AttackKind kind : attacks) {
    const fs::path sub = dir / attack_name(kind);
    fs::create_directories(sub);
    const std::vector<double>& scores = st.scores_for(kind);
    RocCurve curve = roc(scores, st.member);
    {
      std::ofstream f(sub / "roc.csv", std::ios::trunc);
      if (!f) throw StageError("report", "cannot write roc.csv");
      detail::write_roc_csv(f, header, curve);
    }
    {
      std::ofstream f(sub / "hist.csv", std::ios::trunc);
      if (!f) throw StageError("report", "cannot write hist.csv");
      detail::write_hist_csv(f, header, histogram(scores, st.member, 20));
    }
  }
}

namespace detail {

struct Manifest {
  std::uint64_t hash = 0;
  std::uint64_t master_seed = 0;
  struct Entry {
    std::string checkpoint;
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::vector<double> loss_trace;
  };
  std::vector<Entry> models;
};

inline void save_manifest(const std::filesystem::path& path,
                          const Manifest& m) {
  json root;
  root["config_hash"] = hash_hex(m.hash);
  root["master_seed"] = m.master_seed;
  json models = json::array();
  for (const auto& e : m.models) {
    json o;
    o["checkpoint"] = e.checkpoint;
    o["train_acc"] = e.train_acc;
    o["test_acc"] = e.test_acc;
    o["loss_trace"] = e.loss_trace;
    models.push_back(o);
  }
  root["models"] = models;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw StageError("io", "cannot write manifest");
  f << root.dump(2) << "\n";
}

inline std::optional<Manifest> load_manifest(
    const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) return std::nullopt;
  try {
    json root = json::parse(f);
    Manifest m;
    m.hash = std::stoull(root.at("config_hash").get<std::string>(), nullptr,
                         16);
    m.master_seed = root.at("master_seed").get<std::uint64_t>();
    for (const json& o : root.at("models")) {
      Manifest::Entry e;
      e.checkpoint = o.at("checkpoint").get<std::string>();
      e.train_acc = o.at("train_acc").get<double>();
      e.test_acc = o.at("test_acc").get<double>();
      e.loss_trace = o.at("loss_trace").get<std::vector<double>>();
      m.models.push_back(std::move(e));
    }
    return m;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifest: retrain everything
  }
}

}  // namespace detail

inline TrainConfig effective_train_config(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  if (cfg.regime == "overfit") t = overfit_regime(t);
  return t;
}

// Runs the full pipeline into cfg.out_dir. Model training honors the
// checkpoint cache: models whose manifest hash matches are loaded, the rest
// are trained and persisted.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       int workers = 1) {
  namespace fs = std::filesystem;
  ExperimentResult result;
  result.hash = config_hash(cfg);
  const std::string header =
      detail::output_header(result.hash, cfg.master_seed) +
      " attacks=" + detail::attacks_csv_list(cfg.attacks);

  Dataset d;
  try {
    d = realize_dataset(cfg.dataset, cfg.master_seed);
  } catch (const std::exception& e) {
    throw StageError("dataset", e.what());
  }

  SplitPlan plan;
  try {
    plan = plan_splits(d, cfg.n_pairs, cfg.master_seed);
  } catch (const std::exception& e) {
    throw StageError("split", e.what());
  }

  const fs::path out_dir(cfg.out_dir);
  const fs::path ckpt_dir = out_dir / "checkpoints";
  const fs::path log_dir = out_dir / "logs";
  try {
    fs::create_directories(ckpt_dir);
    fs::create_directories(log_dir);
    std::ofstream f(out_dir / "config_used.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write config_used.json");
    json used = experiment_config_json(cfg);
    used["config_hash"] = hash_hex(result.hash);
    f << used.dump(2) << "\n";
  } catch (const std::exception& e) {
    throw StageError("io", e.what());
  }

  // Targets and references: model 0 is the target, 1..2n the pool.
  ModelSpec target_spec = cfg.model;
  target_spec.classes = d.num_classes;
  target_spec.input_shape = d.sample_shape;
  ModelSpec pool_spec = cfg.pool_model ? *cfg.pool_model : cfg.model;
  pool_spec.classes = d.num_classes;
  pool_spec.input_shape = d.sample_shape;
  const TrainConfig train_cfg = effective_train_config(cfg);

  const int total_models = 2 * cfg.n_pairs + 1;
  std::vector<TrainedModel> models(static_cast<size_t>(total_models));
  std::vector<bool> reused(static_cast<size_t>(total_models), false);

  auto cached = detail::load_manifest(out_dir / "manifest.json");
  const bool cache_valid = cached && cached->hash == result.hash &&
                           cached->master_seed == cfg.master_seed &&
                           static_cast<int>(cached->models.size()) ==
                               total_models;

  try {
    std::vector<std::function<void()>> jobs;
    for (int idx = 0; idx < total_models; ++idx) {
      jobs.emplace_back([&, idx] {
        const fs::path ckpt =
            ckpt_dir / ("model_" + std::to_string(idx) + ".ckpt");
        if (cache_valid && fs::exists(ckpt)) {
          try {
            const auto& entry = cached->models[static_cast<size_t>(idx)];
            TrainedModel m;
            m.network = load_checkpoint(ckpt.string());
            m.train_accuracy = entry.train_acc;
            m.test_accuracy = entry.test_acc;
            m.loss_trace = entry.loss_trace;
            models[static_cast<size_t>(idx)] = std::move(m);
            reused[static_cast<size_t>(idx)] = true;
            return;
          } catch (const CheckpointError&) {
            // fall through to retraining
          }
        }
        const ModelSpec& spec = idx == 0 ? target_spec : pool_spec;
        const Split& split =
            idx == 0 ? plan.target
                     : plan.reference[static_cast<size_t>(idx) - 1];
        AnyNetwork net = build_network(
            spec, derive_seed(cfg.master_seed, SeedStream::kWeightInit,
                              static_cast<std::uint64_t>(idx)));
        TrainConfig model_cfg = train_cfg;
        model_cfg.seed = derive_seed(cfg.master_seed,
                                     SeedStream::kBatchShuffle,
                                     static_cast<std::uint64_t>(idx));
        TrainedModel m;
        try {
          m = train(net, d.subset(split.train), d.subset(split.test),
                    model_cfg);
        } catch (const TrainDivergenceError& e) {
          throw GameError(idx, e.what());
        }
        save_checkpoint(ckpt.string(), m.network);
        write_training_log(
            (log_dir / ("model_" + std::to_string(idx) + ".jsonl")).string(),
            m);
        models[static_cast<size_t>(idx)] = std::move(m);
      });
    }
    run_jobs(jobs, workers);
  } catch (const std::exception& e) {
    throw StageError("train", e.what());
  }

  for (bool r : reused) {
    (r ? result.stats.models_reused : result.stats.models_trained)++;
  }

  result.game.target = std::move(models[0]);
  result.game.pool.models.assign(
      std::make_move_iterator(models.begin() + 1),
      std::make_move_iterator(models.end()));
  result.game.pool.in_bits = plan.in_reference;
  result.game.pool.kind = pool_spec.kind;
  result.game.pool.latency = pool_spec.latency;
  result.game.labels = membership_labels(d, plan);

  detail::Manifest manifest;
  manifest.hash = result.hash;
  manifest.master_seed = cfg.master_seed;
  for (int idx = 0; idx < total_models; ++idx) {
    const TrainedModel& m =
        idx == 0 ? result.game.target
                 : result.game.pool.models[static_cast<size_t>(idx) - 1];
    detail::Manifest::Entry e;
    e.checkpoint = "checkpoints/model_" + std::to_string(idx) + ".ckpt";
    e.train_acc = m.train_accuracy;
    e.test_acc = m.test_accuracy;
    e.loss_trace = m.loss_trace;
    manifest.models.push_back(std::move(e));
  }
  detail::save_manifest(out_dir / "manifest.json", manifest);

  // Estimator selection, then the confidence table the attacks consume.
  std::optional<DropoutSpec> dropout;
  if (cfg.dropout.enabled) {
    try {
      std::vector<const AnyNetwork*> pool_nets;
      for (const TrainedModel& m : result.game.pool.models) {
        pool_nets.push_back(&m.network);
      }
      std::vector<float> p_grid;
      for (double p : cfg.dropout.p_grid) {
        p_grid.push_back(static_cast<float>(p));
      }
      result.grid = grid_search_dropout(
          pool_nets, d, result.game.pool.in_bits, p_grid, cfg.dropout.n_grid,
          cfg.dropout.objective, cfg.master_seed, workers);
      dropout = result.grid->best;
      dropout->seed = cfg.master_seed;
    } catch (const std::exception& e) {
      throw StageError("dropout", e.what());
    }
  }

  ConfidenceTable table;
  try {
    table = build_confidence_table(result.game, d, dropout, workers);
    std::ofstream cf(out_dir / "confidence.csv", std::ios::trunc);
    if (!cf) throw std::runtime_error("cannot write confidence.csv");
    cf << header << "\n";
    write_confidence_csv(cf, table, d.sample_ids);
    std::ofstream lf(out_dir / "labels.csv", std::ios::trunc);
    if (!lf) throw std::runtime_error("cannot write labels.csv");
    lf << header << "\n";
    write_labels_csv(lf, result.game.labels, d.sample_ids);
  } catch (const std::exception& e) {
    throw StageError("confidence", e.what());
  }

  try {
    result.scores = build_score_table(
        table, result.game.labels, result.game.pool.in_bits, d.sample_ids,
        model_kind_name(result.game.pool.kind), target_spec.latency);
    std::ofstream f(out_dir / "scores.csv", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write scores.csv");
    f << header << "\n";
    write_scores_csv(f, result.scores);
  } catch (const std::exception& e) {
    throw StageError("attack", e.what());
  }

  try {
    write_report_files(out_dir, result.hash, cfg.master_seed, cfg.attacks,
                       result.scores);
    for (AttackKind kind : cfg.attacks) {
      AttackReport r =
          summarize_attack(result.scores.scores_for(kind),
                           result.scores.member);
      result.reports.emplace_back(kind, r);
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("report", e.what());
  }
  return result;
}

// Replays persisted scores into fresh report files; no model is touched.
inline void replay_scores(const std::string& scores_path,
                          const std::string& out_dir) {
  std::ifstream f(scores_path);
  if (!f) throw StageError("report", "cannot open " + scores_path);
  LoadedScores loaded = read_scores_csv(f);
  std::filesystem::create_directories(out_dir);
  write_report_files(out_dir, loaded.hash, loaded.master_seed, loaded.attacks,
                     loaded.table);
}

struct SweepRow {
  std::string axis_value;
  AttackKind attack;
  double auc = 0.0;
  double tpr_1e3 = 0.0;
  double tpr_1e2 = 0.0;
};

// One pipeline run per axis value, each in its own subdirectory, rolled up
// into sweep.csv. The latency axis rewrites both target and pool latency;
// the dropout axis toggles the estimator.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const std::string& axis,
                                       int workers = 1) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, ExperimentConfig>> variants;
  if (axis == "latency") {
    std::vector<int> latencies =
        base.latency_list.empty() ? std::vector<int>{base.model.latency}
                                  : base.latency_list;
    for (int t : latencies) {
      ExperimentConfig v = base;
      v.model.latency = t;
      if (v.pool_model) v.pool_model->latency = t;
      v.latency_list.clear();
      v.out_dir = (fs::path(base.out_dir) / ("T" + std::to_string(t))).string();
      variants.emplace_back(std::to_string(t), std::move(v));
    }
  } else if (axis == "dropout") {
    for (bool on : {false, true}) {
      ExperimentConfig v = base;
      v.dropout.enabled = on;
      v.out_dir = (fs::path(base.out_dir) /
                   (on ? "dropout_on" : "dropout_off"))
                      .string();
      variants.emplace_back(on ? "on" : "off", std::move(v));
    }
  } else {
    throw ConfigError("unknown sweep axis '" + axis +
                      "' (expected latency or dropout)");
  }

  std::vector<SweepRow> rows;
  for (auto& [value, variant] : variants) {
    ExperimentResult r = run_experiment(variant, workers);
    for (const auto& [kind, report] : r.reports) {
      rows.push_back({value, kind, report.auc, report.tpr_at_fpr_1e3,
                      report.tpr_at_fpr_1e2});
    }
  }

  try {
    fs::create_directories(base.out_dir);
    std::ofstream f(fs::path(base.out_dir) / "sweep.csv", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write sweep.csv");
    f << detail::output_header(config_hash(base), base.master_seed) << "\n";
    f << "axis_value,attack,auc,tpr_0.1,tpr_1\n";
    char buf[160];
    for (const SweepRow& row : rows) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g\n",
                    row.axis_value.c_str(), attack_name(row.attack), row.auc,
                    row.tpr_1e3, row.tpr_1e2);
      f << buf;
    }
  } catch (const std::exception& e) {
    throw StageError("io", e.what());
  }
  return rows;
}

}  // namespace spikeaudit

#endif  // SPIKEAUDIT_EXPERIMENT_HPP_
