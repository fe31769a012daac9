#include "hkrm/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "hkrm/annotations.hpp"
#include "hkrm/checkpoint.hpp"
#include "hkrm/error.hpp"
#include "hkrm/experiment.hpp"
#include "hkrm/logger.hpp"
#include "hkrm/prior_graph.hpp"
#include "hkrm/rng.hpp"
#include "hkrm/tensor_io.hpp"

namespace hkrm {

namespace {

namespace fs = std::filesystem;

std::string matrix_csv(const Matrix& m) {
  std::string s;
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%s%.17g", j ? "," : "", m(i, j));
      s += buf;
    }
    s += '\n';
  }
  return s;
}

nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

struct Globals {
  bool version = false;
  std::string log = "text";
  std::size_t jobs = 0;  // 0 = take train.jobs from the config
};

struct BuildGraphArgs {
  std::string annotations, kind, out, csv, classes, predicate_mode = "collapsed";
  bool similarity = false;
  std::size_t top_attrs = 200, top_predicates = 200;
};

struct GenWorldArgs {
  std::string config, out, annotations;
  std::optional<std::uint64_t> seed;
  std::size_t scenes = 100;
};

struct TrainArgs {
  std::string config, ablation, out, metrics, history_csv;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string model, out;
  std::optional<std::size_t> scenes;
  std::optional<std::uint64_t> seed;
};

struct InspectArgs {
  std::string model, out;
  std::optional<std::uint64_t> seed;
  std::size_t scene_index = 0;
};

struct ExportArgs {
  std::string metrics, history, per_class;
};

int cmd_build_graph(const BuildGraphArgs& a, Logger& log) {
  const std::vector<AnnotationRecord> records = read_annotations(fs::path(a.annotations));
  IngestOptions opts;
  opts.top_attributes = a.top_attrs;
  opts.top_predicates = a.top_predicates;
  if (!a.classes.empty()) opts.classes = read_vocabulary(a.classes);
  const IngestResult ing = ingest_annotations(records, opts);
  const GraphKind kind = graph_kind_from_string(a.kind);
  if (a.similarity && kind != GraphKind::attribute)
    throw DomainError("--similarity applies to attribute graphs only");
  PredicateMode mode;
  if (a.predicate_mode == "collapsed") mode = PredicateMode::collapsed;
  else if (a.predicate_mode == "per_predicate") mode = PredicateMode::per_predicate;
  else throw DomainError("unknown --predicate-mode '" + a.predicate_mode + "'");
  const GraphBuild built = kind == GraphKind::attribute ? build_attribute_graph(ing.table, {a.similarity})
                                                        : build_relationship_graph(ing.relations, mode);
  save_graph(a.out, built.graph);
  if (!a.csv.empty()) write_file_atomic(a.csv, graph_to_csv(built.graph));
  nlohmann::json empty = nlohmann::json::array();
  for (std::size_t c : built.report.empty_classes) empty.push_back(built.graph.class_names[c]);
  log.info("build-graph", {{"records", records.size()},
                           {"classes", built.graph.num_classes()},
                           {"kind", to_string(kind)},
                           {"skipped_records", ing.skipped.records},
                           {"skipped_attributes", ing.skipped.attributes},
                           {"skipped_relations", ing.skipped.relations},
                           {"empty_classes", empty},
                           {"out", a.out}});
  return kExitOk;
}

RunConfig load_config_or_default(const std::string& path) {
  return path.empty() ? parse_config_string("") : parse_config(path);
}

int cmd_gen_world(const GenWorldArgs& a, Logger& log) {
  RunConfig cfg = load_config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const WorldSpec world = make_world(cfg);
  nlohmann::json doc = world_to_json(world);
  doc["run_seed"] = cfg.seed;
  write_json(a.out, doc);
  std::size_t records = 0;
  if (!a.annotations.empty()) {
    // The same stream train uses for its priors, so build-graph on this file
    // with --scenes = knowledge.prior_scenes rebuilds the training priors.
    const auto recs = prior_annotations(world, a.scenes, derive_seed(cfg.seed, "knowledge"));
    std::string text;
    for (const auto& r : recs) text += to_json_line(r) + "\n";
    write_file_atomic(a.annotations, text);
    records = recs.size();
  }
  log.info("gen-world", {{"classes", world.num_classes()},
                         {"feature_dim", world.feature_dim()},
                         {"seed", cfg.seed},
                         {"annotation_records", records},
                         {"out", a.out}});
  return kExitOk;
}

int cmd_train(const TrainArgs& a, const Globals& g, Logger& log) {
  RunConfig cfg = parse_config(a.config);
  if (!a.ablation.empty()) {
    try {
      cfg.model.branches = branches_for_ablation(a.ablation);
    } catch (const DomainError& e) {
      throw CLI::ValidationError("--ablation", e.what());
    }
  }
  if (a.seed) cfg.seed = *a.seed;
  if (g.jobs) cfg.train.jobs = g.jobs;
  validate(cfg);
  const std::string serialized = serialize_config(cfg);
  auto meta_for = [&](std::size_t epoch) {
    return nlohmann::json{{"run_config", serialized}, {"epoch", epoch}};
  };

  log.info("train-start", {{"ablation", ablation_name(cfg.model.branches)},
                           {"seed", cfg.seed},
                           {"scenes", cfg.train.scenes},
                           {"epochs", cfg.train.epochs},
                           {"jobs", cfg.train.jobs}});
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, const HkrmModel& model) {
    save_model(a.out, model, meta_for(r.epoch));
    log.info("epoch", {{"epoch", r.epoch},
                       {"phase", r.phase},
                       {"steps", r.steps},
                       {"loss", r.loss},
                       {"classification_loss", r.classification_loss},
                       {"edge_loss", r.edge_loss},
                       {"train_accuracy", r.train_accuracy}});
  };
  Experiment run;
  try {
    run = run_experiment(cfg, hooks);
  } catch (const TrainingDiverged& e) {
    save_model(a.out, e.last_good(), meta_for(e.last_good_epoch()));
    log.error("diverged", {{"message", e.what()}, {"last_good_epoch", e.last_good_epoch()}, {"checkpoint", a.out}});
    return kExitNumeric;
  }
  save_model(a.out, run.trained.model, meta_for(run.trained.history.empty() ? 0 : run.trained.history.back().epoch));
  const nlohmann::json doc = metrics_document(cfg, run);
  if (!a.metrics.empty()) write_json(a.metrics, doc);
  if (!a.history_csv.empty()) write_file_atomic(a.history_csv, history_to_csv(run.trained.history));
  log.info("train-done", {{"steps", run.trained.steps},
                          {"accuracy", doc["eval"]["accuracy"]},
                          {"rare_accuracy", doc["eval"]["rare_accuracy"]},
                          {"checkpoint", a.out}});
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, Logger& log, std::ostream& out) {
  const TensorArchive archive = load_archive(a.model);
  const HkrmModel model = model_from_archive(archive);
  RunConfig cfg = run_config_from_archive(archive);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const std::size_t count = a.scenes.value_or(cfg.eval.scenes);
  if (count == 0) throw CLI::ValidationError("--scenes", "must be >= 1");
  const WorldSpec world = make_world(cfg);
  const std::vector<Scene> scenes = eval_scenes(world, seed, count);
  const Metrics m = evaluate(model, world, scenes);
  const nlohmann::json doc = {{"format", "hkrm-metrics"},
                              {"version", kMetricsVersion},
                              {"ablation", ablation_name(model.config().branches)},
                              {"seed", seed},
                              {"eval", metrics_to_json(m, world)}};
  if (a.out.empty()) out << doc.dump(2) << "\n";
  else write_json(a.out, doc);
  log.info("eval", {{"scenes", count}, {"seed", seed}, {"accuracy", doc["eval"]["accuracy"]}});
  return kExitOk;
}

int cmd_inspect(const InspectArgs& a, Logger& log) {
  const TensorArchive archive = load_archive(a.model);
  const HkrmModel model = model_from_archive(archive);
  const RunConfig cfg = run_config_from_archive(archive);
  const WorldSpec world = make_world(cfg);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const Scene scene = generate_scene(world, derive_seed(derive_seed(seed, "eval"), "eval_scene", a.scene_index));
  const ModelForward fwd = model.forward(scene);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  std::string regions = "index,class,x,y,w,h,fg_prob\n";
  char buf[256];
  for (std::size_t i = 0; i < scene.num_regions(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", i,
                  world.class_names[scene.classes[i]].c_str(), scene.boxes(i, 0), scene.boxes(i, 1),
                  scene.boxes(i, 2), scene.boxes(i, 3), scene.fg_prob[i]);
    regions += buf;
  }
  write_file_atomic(dir / "regions.csv", regions);
  std::vector<std::string> written{"regions.csv"};
  auto emit = [&](const std::string& name, const Matrix& m) {
    write_file_atomic(dir / (name + ".csv"), matrix_csv(m));
    written.push_back(name + ".csv");
  };
  if (fwd.attribute) {
    emit("attribute_predicted", fwd.attribute->edges.edges);
    if (model.attribute_prior().num_classes())
      emit("attribute_target", target_edges(scene.classes, model.attribute_prior()));
    emit("attribute_adjacency", fwd.attribute->adjacency);
  }
  if (fwd.relationship) {
    emit("relationship_predicted", fwd.relationship->edges.edges);
    if (model.relationship_prior().num_classes())
      emit("relationship_target", target_edges(scene.classes, model.relationship_prior()));
    emit("relationship_adjacency", fwd.relationship->adjacency);
  }
  if (fwd.spatial) {
    emit("spatial_combined", fwd.spatial->edges.combined);
    emit("spatial_adjacency", fwd.spatial->adjacency);
  }
  log.info("inspect-edges", {{"scene", scene.image_id}, {"regions", scene.num_regions()}, {"files", written}});
  return kExitOk;
}

int cmd_export(const ExportArgs& a, Logger& log) {
  if (a.history.empty() && a.per_class.empty())
    throw CLI::ValidationError("export-metrics", "give --history and/or --per-class");
  const nlohmann::json doc = read_json_file(a.metrics);
  if (doc.value("format", std::string()) != "hkrm-metrics")
    throw FormatError("'" + a.metrics + "' is not an hkrm-metrics document");
  if (!a.history.empty()) {
    if (!doc.contains("history")) throw FormatError("metrics document has no training history");
    write_file_atomic(a.history, history_to_csv(history_from_json(doc["history"])));
  }
  if (!a.per_class.empty()) {
    std::string s = "class,correct,total,accuracy\n";
    try {
      for (const auto& row : doc.at("eval").at("per_class")) {
        s += row.at("class").get<std::string>() + "," + std::to_string(row.at("correct").get<std::uint64_t>()) + "," +
             std::to_string(row.at("total").get<std::uint64_t>()) + ",";
        if (!row.at("accuracy").is_null()) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", row.at("accuracy").get<double>());
          s += buf;
        }
        s += "\n";
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("metrics document: ") + e.what());
    }
    write_file_atomic(a.per_class, s);
  }
  log.info("export-metrics", {{"metrics", a.metrics}, {"history", a.history}, {"per_class", a.per_class}});
  return kExitOk;
}

std::string version_text() {
  std::string s = std::string("hkrm ") + kVersion + "\n";
  s += std::string(TensorArchive::kFormat) + " " + std::to_string(TensorArchive::kVersion) + "\n";
  s += "hkrm-graph " + std::to_string(kGraphFormatVersion) + "\n";
  s += "hkrm-metrics " + std::to_string(kMetricsVersion) + "\n";
  s += "run-config " + std::to_string(kRunConfigVersion) + "\n";
  return s;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid knowledge routed modules: prior graphs, synthetic worlds, training and evaluation", "hkrm"};
  Globals g;
  app.add_flag("--version", g.version, "Print tool and file-format versions");
  app.add_option("--log", g.log, "Log format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--jobs", g.jobs, "Threads for per-scene gradients (overrides train.jobs)")
      ->check(CLI::PositiveNumber);

  BuildGraphArgs bg;
  auto* build = app.add_subcommand("build-graph", "Build a prior knowledge graph from annotations");
  build->add_option("--annotations", bg.annotations, "JSON-lines annotation file")->required();
  build->add_option("--kind", bg.kind, "attribute|relationship")
      ->required()
      ->check(CLI::IsMember({"attribute", "relationship"}));
  build->add_flag("--similarity", bg.similarity, "Emit 1 - JS for attribute graphs");
  build->add_option("--top-attrs", bg.top_attrs, "Attribute vocabulary size")->check(CLI::PositiveNumber);
  build->add_option("--top-predicates", bg.top_predicates, "Predicate vocabulary size")->check(CLI::PositiveNumber);
  build->add_option("--classes", bg.classes, "Class vocabulary file (default: all names seen)");
  build->add_option("--predicate-mode", bg.predicate_mode, "collapsed|per_predicate")
      ->check(CLI::IsMember({"collapsed", "per_predicate"}));
  build->add_option("--out", bg.out, "Graph file")->required();
  build->add_option("--csv", bg.csv, "Also write the edge matrix as CSV");

  GenWorldArgs gw;
  auto* gen = app.add_subcommand("gen-world", "Generate a synthetic world (and optionally annotations)");
  gen->add_option("--config", gw.config, "Run config (default: all defaults)");
  gen->add_option("--seed", gw.seed, "Override the root seed");
  gen->add_option("--out", gw.out, "World JSON")->required();
  gen->add_option("--annotations", gw.annotations, "Also write annotations of generated scenes (JSON lines)");
  gen->add_option("--scenes", gw.scenes, "Scenes to annotate")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", ta.config, "Run config")->required();
  tr->add_option("--ablation", ta.ablation, "baseline|attr|rel|spatial|all (overrides model.ablation)");
  tr->add_option("--seed", ta.seed, "Override the root seed");
  tr->add_option("--out", ta.out, "Checkpoint, rewritten after every epoch")->required();
  tr->add_option("--metrics", ta.metrics, "Metrics JSON");
  tr->add_option("--history-csv", ta.history_csv, "Per-epoch loss/accuracy CSV");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on held-out scenes");
  ev->add_option("--model", ea.model, "Checkpoint")->required();
  ev->add_option("--scenes", ea.scenes, "Number of scenes (default: eval.scenes)");
  ev->add_option("--seed", ea.seed, "Root seed of the held-out stream (default: run seed)");
  ev->add_option("--out", ea.out, "Metrics JSON (default: stdout)");

  InspectArgs ia;
  auto* ins = app.add_subcommand("inspect-edges", "Dump predicted/target edges and adjacency of one scene as CSV");
  ins->add_option("--model", ia.model, "Checkpoint")->required();
  ins->add_option("--seed", ia.seed, "Root seed of the held-out stream (default: run seed)");
  ins->add_option("--scene-index", ia.scene_index, "Scene index within the stream");
  ins->add_option("--out", ia.out, "Output directory")->required();

  ExportArgs xa;
  auto* ex = app.add_subcommand("export-metrics", "Convert a metrics JSON document to CSV");
  ex->add_option("--metrics", xa.metrics, "Metrics JSON from train or eval")->required();
  ex->add_option("--history", xa.history, "Per-epoch history CSV");
  ex->add_option("--per-class", xa.per_class, "Per-class accuracy CSV");

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << sub->help();
    else
      err << app.help();
    return kExitUsage;
  }
  if (g.version) {
    out << version_text();
    return kExitOk;
  }

  Logger log(err, log_format_from_string(g.log));
  try {
    if (*build) return cmd_build_graph(bg, log);
    if (*gen) return cmd_gen_world(gw, log);
    if (*tr) return cmd_train(ta, g, log);
    if (*ev) return cmd_eval(ea, log, out);
    if (*ins) return cmd_inspect(ia, log);
    if (*ex) return cmd_export(xa, log);
    err << app.help();
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    log.error("usage", {{"message", e.what()}});
    return kExitUsage;
  } catch (const NumericError& e) {
    log.error("numeric", {{"message", e.what()}});
    return kExitNumeric;
  } catch (const ConfigError& e) {
    log.error("config", {{"message", e.what()}, {"key", e.key()}});
    return kExitData;
  } catch (const Error& e) {
    log.error("data", {{"message", e.what()}});
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    log.error("io", {{"message", e.what()}});
    return kExitData;
  }
}

}  // namespace hkrm
