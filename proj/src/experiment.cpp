#include "hkrm/experiment.hpp"

#include <cstdio>

#include "hkrm/error.hpp"
#include "hkrm/rng.hpp"

namespace hkrm {

WorldSpec make_world(const RunConfig& config) {
  return generate_world(config.world, derive_seed(config.seed, "world"));
}

std::vector<Scene> eval_scenes(const WorldSpec& world, std::uint64_t seed, std::size_t count) {
  return generate_scenes(world, derive_seed(seed, "eval"), "eval_scene", count);
}

Experiment run_experiment(const RunConfig& config, const TrainHooks& hooks) {
  validate(config);
  Experiment out;
  out.world = make_world(config);
  out.trained = train(out.world, config.model, config.knowledge, config.train, config.seed, hooks);
  const std::vector<Scene> held_out = eval_scenes(out.world, config.seed, config.eval.scenes);
  out.eval = evaluate(out.trained.model, out.world, held_out);
  return out;
}

nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : history) {
    a.push_back({{"epoch", r.epoch},
                 {"phase", r.phase},
                 {"steps", r.steps},
                 {"loss", r.loss},
                 {"classification_loss", r.classification_loss},
                 {"edge_loss", r.edge_loss},
                 {"train_accuracy", r.train_accuracy},
                 {"learning_rate", r.learning_rate}});
  }
  return a;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& j) {
  std::vector<EpochRecord> out;
  try {
    for (const auto& e : j) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<std::size_t>();
      r.phase = e.at("phase").get<std::string>();
      r.steps = e.at("steps").get<std::size_t>();
      r.loss = e.at("loss").get<double>();
      r.classification_loss = e.at("classification_loss").get<double>();
      r.edge_loss = e.at("edge_loss").get<double>();
      r.train_accuracy = e.at("train_accuracy").get<double>();
      r.learning_rate = e.at("learning_rate").get<double>();
      out.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics history: ") + e.what());
  }
  return out;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::string s = "epoch,phase,steps,loss,classification_loss,edge_loss,train_accuracy,learning_rate\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.phase.c_str(), r.steps,
                  r.loss, r.classification_loss, r.edge_loss, r.train_accuracy, r.learning_rate);
    s += buf;
  }
  return s;
}

nlohmann::json metrics_document(const RunConfig& config, const Experiment& run) {
  return {{"format", "hkrm-metrics"},
          {"version", kMetricsVersion},
          {"ablation", ablation_name(config.model.branches)},
          {"seed", config.seed},
          {"steps", run.trained.steps},
          {"history", history_to_json(run.trained.history)},
          {"eval", metrics_to_json(run.eval, run.world)}};
}

}  // namespace hkrm
