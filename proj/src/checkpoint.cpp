#include "hkrm/checkpoint.hpp"

#include "hkrm/error.hpp"

namespace hkrm {

namespace {

void put_prior(TensorArchive& a, nlohmann::json& priors, const char* name, const PriorGraph& g) {
  if (g.num_classes() == 0) return;
  priors[name] = {{"similarity", g.similarity}, {"class_names", g.class_names}};
  a.tensors.push_back({std::string("prior.") + name, g.edges});
}

PriorGraph get_prior(const TensorArchive& a, const char* name, GraphKind kind) {
  PriorGraph g;
  const auto& priors = a.meta.value("priors", nlohmann::json::object());
  if (!priors.contains(name)) return g;
  g.kind = kind;
  g.similarity = priors[name].at("similarity").get<bool>();
  g.class_names = priors[name].at("class_names").get<std::vector<std::string>>();
  g.edges = a.at(std::string("prior.") + name);
  if (g.edges.rows() != g.class_names.size() || g.edges.cols() != g.class_names.size())
    throw FormatError(std::string("checkpoint: prior.") + name + " does not match its class list");
  return g;
}

}  // namespace

TensorArchive model_to_archive(const HkrmModel& model, const nlohmann::json& extra_meta) {
  TensorArchive a;
  if (extra_meta.is_object()) a.meta = extra_meta;
  a.meta["kind"] = "hkrm-model";
  a.meta["feature_dim"] = model.feature_dim();
  a.meta["num_classes"] = model.num_classes();
  a.meta["model"] = model_config_to_json(model.config());
  // parameters() hands out mutable views; the copy keeps this function const-correct.
  HkrmModel copy = model;
  for (const ParamRef& p : copy.parameters()) a.tensors.push_back({p.name, *p.value});
  nlohmann::json priors = nlohmann::json::object();
  put_prior(a, priors, "attribute", model.attribute_prior());
  put_prior(a, priors, "relationship", model.relationship_prior());
  a.meta["priors"] = priors;
  return a;
}

HkrmModel model_from_archive(const TensorArchive& a) {
  HkrmModel model;
  try {
    if (a.meta.value("kind", std::string()) != "hkrm-model") throw FormatError("checkpoint: not a model archive");
    const ModelConfig cfg = model_config_from_json(a.meta.at("model"));
    model = HkrmModel(a.meta.at("feature_dim").get<std::size_t>(), a.meta.at("num_classes").get<std::size_t>(), cfg,
                      0);
    model.set_priors(get_prior(a, "attribute", GraphKind::attribute),
                     get_prior(a, "relationship", GraphKind::relationship));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  for (const ParamRef& p : model.parameters()) {
    const Matrix* m = a.find(p.name);
    if (!m) throw FormatError("checkpoint: missing tensor '" + p.name + "'");
    if (m->rows() != p.value->rows() || m->cols() != p.value->cols()) {
      throw FormatError("checkpoint: tensor '" + p.name + "' has shape " + m->shape_string() + ", expected " +
                        p.value->shape_string());
    }
    *p.value = *m;
  }
  return model;
}

void save_model(const std::filesystem::path& path, const HkrmModel& model, const nlohmann::json& extra_meta) {
  save_archive(path, model_to_archive(model, extra_meta));
}

HkrmModel load_model(const std::filesystem::path& path) { return model_from_archive(load_archive(path)); }

RunConfig run_config_from_archive(const TensorArchive& a) {
  if (!a.meta.contains("run_config") || !a.meta["run_config"].is_string())
    throw FormatError("checkpoint: no run_config in metadata");
  return parse_config_string(a.meta["run_config"].get<std::string>());
}

}  // namespace hkrm
