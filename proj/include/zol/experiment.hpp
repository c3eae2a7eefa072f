#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "attack.hpp"
#include "convex.hpp"
#include "errors.hpp"
#include "mlp01.hpp"
#include "model_io.hpp"
#include "random.hpp"
#include "scd_linear.hpp"
#include "vote.hpp"

namespace zol {

inline constexpr const char* kVersion = "1.0.0";

/// Everything needed to re-run a prepare/train/attack step. Serialized into
/// every manifest; loading rejects unknown keys.
struct ExperimentConfig {
  // data
  std::string source = "container";  // mnist | cifar10 | container
  std::vector<std::string> dataset;
  std::string test;
  unsigned class_a = 0;
  unsigned class_b = 1;

  // model
  std::string model = "scd01";
  std::size_t votes = 1;
  std::string vote_mode;  // empty: restart for 01-loss models, bootstrap for convex ones
  std::size_t iterations = 1000;
  double eta = 0.17;
  std::optional<std::size_t> k_features;
  double batch_frac = 0.25;
  std::size_t hidden = 20;
  std::size_t threshold_cap = 1000;
  std::size_t mlp_epochs = 100;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t sgd_batch = 200;
  std::size_t svm_epochs = 10;
  std::vector<double> svm_c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::size_t svm_folds = 5;

  // attack
  std::string target;
  double epsilon = 0.0625;
  std::size_t epochs = 20;
  std::string substitute = "mlp";  // mlp | scd01
  std::vector<std::size_t> substitute_hidden{200, 200};
  std::size_t substitute_epochs = 50;
  std::size_t substitute_patience = 10;
  double max_set_factor = 8.0;
  std::string seed_pool;
  std::optional<std::uint64_t> substitute_seed;

  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out = ".";
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"source", c.source},
      {"dataset", c.dataset},
      {"test", c.test},
      {"classes", {c.class_a, c.class_b}},
      {"model", c.model},
      {"votes", c.votes},
      {"vote_mode", c.vote_mode},
      {"iterations", c.iterations},
      {"eta", c.eta},
      {"k_features", c.k_features ? nlohmann::json(*c.k_features) : nlohmann::json(nullptr)},
      {"batch_frac", c.batch_frac},
      {"hidden", c.hidden},
      {"threshold_cap", c.threshold_cap},
      {"mlp_epochs", c.mlp_epochs},
      {"learning_rate", c.learning_rate},
      {"momentum", c.momentum},
      {"sgd_batch", c.sgd_batch},
      {"svm_epochs", c.svm_epochs},
      {"svm_c_grid", c.svm_c_grid},
      {"svm_folds", c.svm_folds},
      {"target", c.target},
      {"epsilon", c.epsilon},
      {"epochs", c.epochs},
      {"substitute", c.substitute},
      {"substitute_hidden", c.substitute_hidden},
      {"substitute_epochs", c.substitute_epochs},
      {"substitute_patience", c.substitute_patience},
      {"max_set_factor", c.max_set_factor},
      {"seed_pool", c.seed_pool},
      {"substitute_seed", c.substitute_seed ? nlohmann::json(*c.substitute_seed) : nlohmann::json(nullptr)},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"out", c.out},
  };
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const ExperimentConfig defaults;
  const auto known = to_json(defaults);
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      try {
        j.at(key).get_to(field);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
      }
    }
  };
  get("source", c.source);
  get("dataset", c.dataset);
  get("test", c.test);
  if (j.contains("classes")) {
    std::vector<unsigned> cls;
    get("classes", cls);
    if (cls.size() != 2) throw ConfigError("config key 'classes' needs two labels");
    c.class_a = cls[0];
    c.class_b = cls[1];
  }
  get("model", c.model);
  get("votes", c.votes);
  get("vote_mode", c.vote_mode);
  get("iterations", c.iterations);
  get("eta", c.eta);
  if (j.contains("k_features") && !j.at("k_features").is_null()) c.k_features = j.at("k_features").get<std::size_t>();
  get("batch_frac", c.batch_frac);
  get("hidden", c.hidden);
  get("threshold_cap", c.threshold_cap);
  get("mlp_epochs", c.mlp_epochs);
  get("learning_rate", c.learning_rate);
  get("momentum", c.momentum);
  get("sgd_batch", c.sgd_batch);
  get("svm_epochs", c.svm_epochs);
  get("svm_c_grid", c.svm_c_grid);
  get("svm_folds", c.svm_folds);
  get("target", c.target);
  get("epsilon", c.epsilon);
  get("epochs", c.epochs);
  get("substitute", c.substitute);
  get("substitute_hidden", c.substitute_hidden);
  get("substitute_epochs", c.substitute_epochs);
  get("substitute_patience", c.substitute_patience);
  get("max_set_factor", c.max_set_factor);
  get("seed_pool", c.seed_pool);
  if (j.contains("substitute_seed") && !j.at("substitute_seed").is_null())
    c.substitute_seed = j.at("substitute_seed").get<std::uint64_t>();
  get("seed", c.seed);
  get("jobs", c.jobs);
  get("out", c.out);
  return c;
}

inline VoteMode effective_vote_mode(const ExperimentConfig& c) {
  if (!c.vote_mode.empty()) return parse_vote_mode(c.vote_mode);
  const auto kind = parse_model_kind(c.model);
  return (kind == ModelKind::scd01 || kind == ModelKind::mlp01) ? VoteMode::restart : VoteMode::bootstrap;
}

inline ScdConfig scd_config(const ExperimentConfig& c, std::size_t d) {
  ScdConfig s;
  s.iterations = c.iterations;
  s.features_per_step = c.k_features.value_or(default_features_per_step(d));
  s.step_size = c.eta;
  s.batch_fraction = c.batch_frac;
  s.threshold_cap = c.threshold_cap;
  s.validate();
  return s;
}

inline SgdConfig sgd_config(const ExperimentConfig& c) {
  SgdConfig s;
  s.batch = c.sgd_batch;
  s.momentum = c.momentum;
  s.learning_rate = c.learning_rate;
  s.epochs = c.mlp_epochs;
  s.validate();
  return s;
}

inline SvmConfig svm_config(const ExperimentConfig& c) {
  SvmConfig s;
  s.C_grid = c.svm_c_grid;
  s.folds = c.svm_folds;
  s.epochs = c.svm_epochs;
  s.validate();
  return s;
}

/// Trains the configured model kind as a vote ensemble. Member seeds are
/// derive_seed(global, "train") + i.
inline StoredEnsemble train_ensemble(const ExperimentConfig& c, const BinaryDataset& train) {
  const auto kind = parse_model_kind(c.model);
  const auto mode = effective_vote_mode(c);
  const std::uint64_t base = derive_seed(c.seed, "train");
  const std::size_t d = train.dim();
  StoredEnsemble s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::scd01: {
      const auto cfg = scd_config(c, d);
      s.ensemble = train_vote(
          [&](const BinaryDataset& ds, std::uint64_t seed) {
            auto local = cfg;
            local.seed = seed;
            return train_scd01(ds, local).model;
          },
          train, c.votes, base, mode, c.jobs);
      break;
    }
    case ModelKind::mlp01: {
      const auto cfg = scd_config(c, d);
      if (c.hidden < 1) throw ConfigError("mlp01 needs hidden >= 1 (use scd01 for a linear model)");
      s.ensemble = train_vote(
          [&](const BinaryDataset& ds, std::uint64_t seed) {
            auto local = cfg;
            local.seed = seed;
            return train_mlp01(ds, local, c.hidden).model;
          },
          train, c.votes, base, mode, c.jobs);
      break;
    }
    case ModelKind::svm: {
      const auto cfg = svm_config(c);
      s.ensemble = train_vote(
          [&](const BinaryDataset& ds, std::uint64_t seed) {
            auto local = cfg;
            local.seed = seed;
            return train_svm(ds, local);
          },
          train, c.votes, base, mode, c.jobs);
      break;
    }
    case ModelKind::mlp: {
      const auto cfg = sgd_config(c);
      const std::vector<std::size_t> widths{c.hidden};
      s.ensemble = train_vote(
          [&](const BinaryDataset& ds, std::uint64_t seed) {
            auto local = cfg;
            local.seed = seed;
            return train_mlp(ds, widths, local);
          },
          train, c.votes, base, mode, c.jobs);
      break;
    }
  }
  return s;
}

inline AttackConfig attack_config(const ExperimentConfig& c, std::size_t d) {
  AttackConfig a;
  a.epsilon = c.epsilon;
  a.epochs = c.epochs;
  if (c.substitute == "mlp") {
    a.substitute = SubstituteKind::mlp;
  } else if (c.substitute == "scd01") {
    a.substitute = SubstituteKind::scd01;
  } else {
    throw ConfigError("unknown substitute '" + c.substitute + "' (expected mlp or scd01)");
  }
  a.substitute_hidden = c.substitute_hidden;
  a.substitute_sgd.batch = c.sgd_batch;
  a.substitute_sgd.momentum = c.momentum;
  a.substitute_sgd.learning_rate = c.learning_rate;
  a.substitute_sgd.epochs = c.substitute_epochs;
  a.substitute_sgd.patience = c.substitute_patience;
  a.substitute_scd = scd_config(c, d);
  a.max_set_factor = c.max_set_factor;
  a.seed = derive_seed(c.seed, "attack");
  a.substitute_seed = c.substitute_seed;
  a.jobs = c.jobs;
  a.validate(d);
  return a;
}

}  // namespace zol
