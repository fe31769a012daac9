#include "hkrm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <thread>

#include "hkrm/rng.hpp"

namespace hkrm {

void validate(const KnowledgeConfig& config) {
  if (config.prior_scenes == 0) throw ConfigError("knowledge.prior_scenes", "must be >= 1");
  if (config.top_attributes == 0) throw ConfigError("knowledge.top_attributes", "must be >= 1");
  if (config.top_predicates == 0) throw ConfigError("knowledge.top_predicates", "must be >= 1");
}

void validate(const TrainConfig& config) {
  if (config.scenes == 0) throw ConfigError("train.scenes", "must be >= 1");
  if (config.batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");
  if (config.baseline_epochs > config.epochs)
    throw ConfigError("train.baseline_epochs", "must not exceed train.epochs");
  if (config.jobs == 0) throw ConfigError("train.jobs", "must be >= 1");
  if (!(config.sgd.learning_rate >= 0.0) || !std::isfinite(config.sgd.learning_rate))
    throw ConfigError("train.learning_rate", "must be finite and >= 0");
  if (!(config.sgd.momentum >= 0.0 && config.sgd.momentum < 1.0))
    throw ConfigError("train.momentum", "must lie in [0, 1)");
  if (!(config.sgd.weight_decay >= 0.0) || !std::isfinite(config.sgd.weight_decay))
    throw ConfigError("train.weight_decay", "must be finite and >= 0");
}

std::vector<AnnotationRecord> prior_annotations(const WorldSpec& world, std::size_t num_scenes,
                                                std::uint64_t seed) {
  std::vector<AnnotationRecord> records;
  for (std::size_t s = 0; s < num_scenes; ++s) {
    const Scene scene = generate_scene(world, derive_seed(seed, "prior_scene", s));
    auto recs = scene_annotations(world, scene, derive_seed(seed, "prior_annotation", s));
    std::move(recs.begin(), recs.end(), std::back_inserter(records));
  }
  return records;
}

Priors build_priors(const WorldSpec& world, const KnowledgeConfig& config, std::uint64_t seed) {
  validate(config);
  const std::vector<AnnotationRecord> records = prior_annotations(world, config.prior_scenes, seed);
  IngestOptions opts;
  opts.classes = Vocabulary(world.class_names);
  opts.top_attributes = config.top_attributes;
  opts.top_predicates = config.top_predicates;
  IngestResult ingested = ingest_annotations(records, opts);

  Priors p;
  p.records = records.size();
  p.skipped = std::move(ingested.skipped);
  GraphBuild attr = build_attribute_graph(ingested.table, {config.attribute_similarity});
  GraphBuild rel = build_relationship_graph(ingested.relations, config.predicate_mode);
  p.attribute = std::move(attr.graph);
  p.attribute_report = std::move(attr.report);
  p.relationship = std::move(rel.graph);
  p.relationship_report = std::move(rel.report);
  return p;
}

SceneLoss batch_gradients(const HkrmModel& model, std::span<const Scene* const> batch,
                          std::optional<BranchSet> active, std::size_t jobs, GradList& out) {
  const std::size_t b = batch.size();
  std::vector<GradList> grads(b);
  std::vector<SceneLoss> losses(b);
  std::vector<std::exception_ptr> errors(b);
  auto work = [&](std::size_t i) {
    try {
      losses[i] = model.loss(*batch[i], &grads[i], active);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(jobs, b);
  if (workers <= 1) {
    for (std::size_t i = 0; i < b; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < b; i += workers) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const double inv_b = 1.0 / static_cast<double>(b);
  out.clear();
  for (const Matrix& m : grads[0]) out.emplace_back(m.rows(), m.cols());
  SceneLoss mean;
  for (std::size_t i = 0; i < b; ++i) {
    accumulate(out, grads[i], inv_b);
    mean.total += losses[i].total * inv_b;
    mean.classification += losses[i].classification * inv_b;
    mean.edge_attribute += losses[i].edge_attribute * inv_b;
    mean.edge_relationship += losses[i].edge_relationship * inv_b;
    mean.correct += losses[i].correct;
    mean.regions += losses[i].regions;
  }
  return mean;
}

TrainResult train_model(HkrmModel model, std::span<const Scene> scenes, const TrainConfig& config,
                        std::uint64_t seed, const TrainHooks& hooks) {
  validate(config);
  if (scenes.empty()) throw DomainError("train: need at least one training scene");

  TrainResult result;
  ParamList params = model.parameters();
  SgdMomentum opt(config.sgd, params);
  // std::vector<bool> has no contiguous storage, so copy into a plain array.
  const std::vector<bool> baseline_mask = model.baseline_mask();
  const auto mask = std::make_unique<bool[]>(baseline_mask.size());
  std::copy(baseline_mask.begin(), baseline_mask.end(), mask.get());
  const std::span<const bool> baseline_span(mask.get(), baseline_mask.size());

  HkrmModel last_good = model;
  std::size_t last_good_epoch = 0;
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  bool stop = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    const bool baseline_phase = epoch <= config.baseline_epochs;
    const std::optional<BranchSet> active =
        baseline_phase ? std::optional<BranchSet>(BranchSet{}) : std::nullopt;
    if (config.shuffle) {
      Rng rng(derive_seed(seed, "shuffle", epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = baseline_phase ? "baseline" : "full";
    rec.learning_rate = opt.config().learning_rate;
    double loss_sum = 0.0, cls_sum = 0.0, edge_sum = 0.0;
    std::size_t batches = 0, correct = 0, regions = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      if (config.max_steps && step >= config.max_steps) {
        stop = true;
        break;
      }
      std::vector<const Scene*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&scenes[order[i]]);
      GradList grads;
      const SceneLoss l = batch_gradients(model, batch, active, config.jobs, grads);
      if (!std::isfinite(l.total)) {
        throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step + 1),
                               std::move(last_good), last_good_epoch);
      }
      try {
        opt.step(params, grads, baseline_phase ? baseline_span : std::span<const bool>{});
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("training diverged at epoch ") + std::to_string(epoch) + ": " +
                                   e.what(),
                               std::move(last_good), last_good_epoch);
      }
      ++step;
      ++batches;
      loss_sum += l.total;
      cls_sum += l.classification;
      edge_sum += l.edge_attribute + l.edge_relationship;
      correct += l.correct;
      regions += l.regions;
      if (hooks.on_step) hooks.on_step(step, l);
    }
    if (batches == 0) break;
    rec.steps = step;
    rec.loss = loss_sum / static_cast<double>(batches);
    rec.classification_loss = cls_sum / static_cast<double>(batches);
    rec.edge_loss = edge_sum / static_cast<double>(batches);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(regions);
    result.history.push_back(rec);
    last_good = model;
    last_good_epoch = epoch;
    if (hooks.on_epoch) hooks.on_epoch(rec, model);
  }
  result.steps = step;
  result.model = std::move(model);
  return result;
}

TrainResult train(const WorldSpec& world, const ModelConfig& model_config, const KnowledgeConfig& knowledge,
                  const TrainConfig& config, std::uint64_t seed, const TrainHooks& hooks) {
  validate(config);
  HkrmModel model(world.feature_dim(), world.num_classes(), model_config, derive_seed(seed, "model"));
  if (model_config.branches.attribute || model_config.branches.relationship) {
    Priors p = build_priors(world, knowledge, derive_seed(seed, "knowledge"));
    model.set_priors(std::move(p.attribute), std::move(p.relationship));
  }
  const std::vector<Scene> scenes = generate_scenes(world, seed, "train_scene", config.scenes);
  return train_model(std::move(model), scenes, config, derive_seed(seed, "train"), hooks);
}

}  // namespace hkrm
