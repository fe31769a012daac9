#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hkrm/annotations.hpp"
#include "hkrm/error.hpp"
#include "hkrm/metrics.hpp"
#include "hkrm/model.hpp"
#include "hkrm/prior_graph.hpp"
#include "hkrm/sgd.hpp"
#include "hkrm/world.hpp"

namespace hkrm {

// How the prior graphs are rebuilt from generated annotations.
struct KnowledgeConfig {
  std::size_t prior_scenes = 2000;
  std::size_t top_attributes = 200;
  std::size_t top_predicates = 200;
  bool attribute_similarity = false;  // 1 - JS instead of JS
  PredicateMode predicate_mode = PredicateMode::collapsed;

  bool operator==(const KnowledgeConfig&) const = default;
};

void validate(const KnowledgeConfig& config);

struct Priors {
  PriorGraph attribute;
  PriorGraph relationship;
  GraphReport attribute_report;
  GraphReport relationship_report;
  SkipReport skipped;
  std::size_t records = 0;
};

// Annotations of `prior_scenes` scenes drawn from the "prior_scene" stream of
// `seed`, one annotation seed per scene from the "prior_annotation" stream.
std::vector<AnnotationRecord> prior_annotations(const WorldSpec& world, std::size_t num_scenes,
                                                std::uint64_t seed);

Priors build_priors(const WorldSpec& world, const KnowledgeConfig& config, std::uint64_t seed);

struct TrainConfig {
  std::size_t scenes = 400;          // training scenes, stream "train_scene"
  std::size_t epochs = 10;           // total, including baseline epochs
  std::size_t baseline_epochs = 0;   // phase one: baseline head only
  std::size_t batch_size = 2;
  SgdConfig sgd;
  std::size_t max_steps = 0;         // 0 = unlimited
  std::size_t jobs = 1;              // threads for per-scene gradients
  bool shuffle = true;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::string phase;      // "baseline" | "full"
  std::size_t steps = 0;  // cumulative
  double loss = 0.0;
  double classification_loss = 0.0;
  double edge_loss = 0.0;  // attribute + relationship, before lambda
  double train_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainHooks {
  // Called after each completed epoch with the model at that point.
  std::function<void(const EpochRecord&, const HkrmModel&)> on_epoch;
  // Called after every optimizer step with the cumulative step count.
  std::function<void(std::size_t step, const SceneLoss& batch_mean)> on_step;
};

struct TrainResult {
  HkrmModel model;
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
};

// Raised when a step produces a non-finite loss or gradient. Carries the
// model as of the last completed epoch (the initial model before epoch 1).
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, HkrmModel last_good, std::size_t last_good_epoch)
      : NumericError(what), last_good_(std::move(last_good)), epoch_(last_good_epoch) {}
  const HkrmModel& last_good() const { return last_good_; }
  std::size_t last_good_epoch() const { return epoch_; }

 private:
  HkrmModel last_good_;
  std::size_t epoch_;
};

// Trains `model` (priors already set for explicit branches) on `scenes`.
TrainResult train_model(HkrmModel model, std::span<const Scene> scenes, const TrainConfig& config,
                        std::uint64_t seed, const TrainHooks& hooks = {});

// Full pipeline: priors from generated annotations, model init, training
// scenes from the "train_scene" stream of `seed`.
TrainResult train(const WorldSpec& world, const ModelConfig& model_config, const KnowledgeConfig& knowledge,
                  const TrainConfig& config, std::uint64_t seed, const TrainHooks& hooks = {});

// Mean loss and gradients of a batch, with per-scene work spread over `jobs`
// threads and summed in scene order, so the result does not depend on jobs.
SceneLoss batch_gradients(const HkrmModel& model, std::span<const Scene* const> batch,
                          std::optional<BranchSet> active, std::size_t jobs, GradList& out);

}  // namespace hkrm
