#pragma once

#include <string>
#include <vector>

#include "hkrm/config.hpp"
#include "hkrm/metrics.hpp"
#include "hkrm/trainer.hpp"

namespace hkrm {

// generate_world(config.world, derive_seed(config.seed, "world"))
WorldSpec make_world(const RunConfig& config);

// Held-out scenes: stream "eval_scene" under derive_seed(seed, "eval"),
// disjoint from the training ("train_scene") and prior ("prior_scene") streams.
std::vector<Scene> eval_scenes(const WorldSpec& world, std::uint64_t seed, std::size_t count);

struct Experiment {
  WorldSpec world;
  TrainResult trained;
  Metrics eval;
};

// World, priors, training and held-out evaluation for one run config.
Experiment run_experiment(const RunConfig& config, const TrainHooks& hooks = {});

nlohmann::json history_to_json(const std::vector<EpochRecord>& history);
// epoch,phase,steps,loss,classification_loss,edge_loss,train_accuracy,learning_rate
std::string history_to_csv(const std::vector<EpochRecord>& history);
std::vector<EpochRecord> history_from_json(const nlohmann::json& j);

// The metrics document written by `train` and `eval`:
//   {"format":"hkrm-metrics","version":1,"ablation":..., "seed":..., "steps":...,
//    "history":[...], "eval":{...}}
inline constexpr int kMetricsVersion = 1;
nlohmann::json metrics_document(const RunConfig& config, const Experiment& run);

}  // namespace hkrm
