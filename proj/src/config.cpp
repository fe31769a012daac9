#include "hkrm/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "hkrm/error.hpp"
#include "hkrm/tensor_io.hpp"

namespace hkrm {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string fmt_dims(const std::vector<std::size_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? ", " : "") + std::to_string(dims[i]);
  return s + "]";
}

std::uint64_t read_u64(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(key, "expected a non-negative integer");
  const std::string& s = n.Scalar();
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
  return v;
}

std::size_t read_size(const YAML::Node& n, const std::string& key) {
  return static_cast<std::size_t>(read_u64(n, key));
}

double read_double(const YAML::Node& n, const std::string& key) {
  double v = 0.0;
  try {
    if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
    v = n.as<double>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(key, "expected a number");
  }
  if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
  return v;
}

bool read_bool(const YAML::Node& n, const std::string& key) {
  try {
    if (!n.IsScalar()) throw YAML::BadConversion(n.Mark());
    return n.as<bool>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(key, "expected true or false");
  }
}

std::string read_string(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(key, "expected a string");
  return n.Scalar();
}

std::vector<std::size_t> read_dims(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ConfigError(key, "expected a list of positive integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(read_size(n[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const YAML::Node&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

struct Section {
  std::string name;
  std::vector<Field> fields;
};

#define HKRM_SIZE(path, member)                                                              \
  Field {                                                                                    \
    path, [](RunConfig& c, const YAML::Node& n, const std::string& k) { c.member = read_size(n, k); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                          \
  }
#define HKRM_DOUBLE(path, member)                                                              \
  Field {                                                                                      \
    path, [](RunConfig& c, const YAML::Node& n, const std::string& k) { c.member = read_double(n, k); }, \
        [](const RunConfig& c) { return fmt_double(c.member); }                                \
  }
#define HKRM_BOOL(path, member)                                                              \
  Field {                                                                                    \
    path, [](RunConfig& c, const YAML::Node& n, const std::string& k) { c.member = read_bool(n, k); }, \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }          \
  }
#define HKRM_DIMS(path, member)                                                              \
  Field {                                                                                    \
    path, [](RunConfig& c, const YAML::Node& n, const std::string& k) { c.member = read_dims(n, k); }, \
        [](const RunConfig& c) { return fmt_dims(c.member); }                                \
  }

const std::vector<Section>& sections() {
  static const std::vector<Section> s = {
      {"world",
       {HKRM_SIZE("num_classes", world.num_classes),
        HKRM_SIZE("feature_dim", world.feature_dim),
        HKRM_DOUBLE("prototype_scale", world.prototype_scale),
        HKRM_DOUBLE("noise_sigma", world.noise_sigma),
        HKRM_DOUBLE("long_tail_exponent", world.long_tail_exponent),
        HKRM_DOUBLE("background_fraction", world.background_fraction),
        HKRM_SIZE("min_regions", world.min_regions),
        HKRM_SIZE("max_regions", world.max_regions),
        HKRM_SIZE("num_context_pairs", world.num_context_pairs),
        HKRM_SIZE("num_spatial_pairs", world.num_spatial_pairs),
        HKRM_SIZE("num_spatial_anchors", world.num_spatial_anchors),
        HKRM_DOUBLE("confusable_separation", world.confusable_separation),
        HKRM_DOUBLE("companion_probability", world.companion_probability),
        HKRM_SIZE("num_attribute_groups", world.num_attribute_groups),
        HKRM_SIZE("num_attributes", world.num_attributes),
        HKRM_SIZE("attributes_per_region", world.attributes_per_region),
        HKRM_DOUBLE("rare_quantile", world.rare_quantile)}},
      {"knowledge",
       {HKRM_SIZE("prior_scenes", knowledge.prior_scenes),
        HKRM_SIZE("top_attributes", knowledge.top_attributes),
        HKRM_SIZE("top_predicates", knowledge.top_predicates),
        HKRM_BOOL("attribute_similarity", knowledge.attribute_similarity),
        Field{"predicate_mode",
              [](RunConfig& c, const YAML::Node& n, const std::string& k) {
                const std::string v = read_string(n, k);
                if (v == "collapsed") c.knowledge.predicate_mode = PredicateMode::collapsed;
                else if (v == "per_predicate") c.knowledge.predicate_mode = PredicateMode::per_predicate;
                else throw ConfigError(k, "expected collapsed or per_predicate, got '" + v + "'");
              },
              [](const RunConfig& c) {
                return std::string(c.knowledge.predicate_mode == PredicateMode::collapsed ? "collapsed"
                                                                                          : "per_predicate");
              }}}},
      {"explicit",
       {HKRM_DIMS("mlp_dims", model.explicit_branch.mlp_dims),
        HKRM_SIZE("embed_dim", model.explicit_branch.embed_dim),
        Field{"final_activation",
              [](RunConfig& c, const YAML::Node& n, const std::string& k) {
                const std::string v = read_string(n, k);
                try {
                  c.model.explicit_branch.final_activation = activation_from_string(v);
                } catch (const Error&) {
                  throw ConfigError(k, "expected linear, relu or sigmoid, got '" + v + "'");
                }
              },
              [](const RunConfig& c) { return to_string(c.model.explicit_branch.final_activation); }},
        HKRM_DOUBLE("normalize_epsilon", model.explicit_branch.normalize_epsilon),
        HKRM_BOOL("mean_edge_loss", model.explicit_branch.mean_edge_loss)}},
      {"implicit",
       {HKRM_SIZE("num_graphs", model.implicit_branch.num_graphs),
        HKRM_DIMS("mlp_dims", model.implicit_branch.mlp_dims),
        HKRM_SIZE("embed_dim", model.implicit_branch.embed_dim),
        HKRM_BOOL("normalize", model.implicit_branch.normalize),
        HKRM_DOUBLE("normalize_epsilon", model.implicit_branch.normalize_epsilon)}},
      {"model",
       {Field{"ablation",
              [](RunConfig& c, const YAML::Node& n, const std::string& k) {
                const std::string v = read_string(n, k);
                try {
                  c.model.branches = branches_for_ablation(v);
                } catch (const Error&) {
                  throw ConfigError(k, "expected baseline, attr, rel, spatial or all, got '" + v + "'");
                }
              },
              [](const RunConfig& c) { return ablation_name(c.model.branches); }},
        HKRM_DOUBLE("edge_loss_weight", model.edge_loss_weight)}},
      {"train",
       {HKRM_SIZE("scenes", train.scenes),
        HKRM_SIZE("epochs", train.epochs),
        HKRM_SIZE("baseline_epochs", train.baseline_epochs),
        HKRM_SIZE("batch_size", train.batch_size),
        HKRM_DOUBLE("learning_rate", train.sgd.learning_rate),
        HKRM_DOUBLE("momentum", train.sgd.momentum),
        HKRM_DOUBLE("weight_decay", train.sgd.weight_decay),
        HKRM_SIZE("max_steps", train.max_steps),
        HKRM_SIZE("jobs", train.jobs),
        HKRM_BOOL("shuffle", train.shuffle)}},
      {"eval", {HKRM_SIZE("scenes", eval.scenes)}},
  };
  return s;
}

#undef HKRM_SIZE
#undef HKRM_DOUBLE
#undef HKRM_BOOL
#undef HKRM_DIMS

template <class F>
void wrap_domain(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError(key, e.what());
  }
}

void check_dims(const std::vector<std::size_t>& dims, const std::string& key) {
  if (dims.empty()) throw ConfigError(key, "must list at least one layer");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError(key, "layer sizes must be >= 1");
  if (dims.back() != 1) throw ConfigError(key, "last layer must have size 1 (one edge weight)");
}

}  // namespace

bool operator==(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

void validate(const RunConfig& c) {
  const WorldConfig& w = c.world;
  if (w.num_classes < 2) throw ConfigError("world.num_classes", "must be >= 2");
  if (w.feature_dim < 2) throw ConfigError("world.feature_dim", "must be >= 2");
  if (!(w.prototype_scale > 0.0)) throw ConfigError("world.prototype_scale", "must be > 0");
  if (w.noise_sigma < 0.0) throw ConfigError("world.noise_sigma", "must be >= 0");
  if (w.long_tail_exponent < 0.0) throw ConfigError("world.long_tail_exponent", "must be >= 0");
  if (!(w.background_fraction >= 0.0 && w.background_fraction < 1.0))
    throw ConfigError("world.background_fraction", "must lie in [0, 1)");
  if (w.min_regions < 1) throw ConfigError("world.min_regions", "must be >= 1");
  if (w.max_regions < w.min_regions) throw ConfigError("world.max_regions", "must be >= world.min_regions");
  if (w.confusable_separation < 0.0) throw ConfigError("world.confusable_separation", "must be >= 0");
  if (w.confusable_separation > w.prototype_scale)
    throw ConfigError("world.confusable_separation", "must not exceed world.prototype_scale");
  if (!(w.companion_probability >= 0.0 && w.companion_probability <= 1.0))
    throw ConfigError("world.companion_probability", "must lie in [0, 1]");
  if (w.num_attribute_groups < 1) throw ConfigError("world.num_attribute_groups", "must be >= 1");
  if (w.num_attributes < w.num_attribute_groups)
    throw ConfigError("world.num_attributes", "must be >= world.num_attribute_groups");
  if (w.attributes_per_region < 1) throw ConfigError("world.attributes_per_region", "must be >= 1");
  if (!(w.rare_quantile > 0.0 && w.rare_quantile <= 1.0))
    throw ConfigError("world.rare_quantile", "must lie in (0, 1]");
  wrap_domain("world", [&] { validate(w); });

  validate(c.knowledge);

  const ExplicitConfig& e = c.model.explicit_branch;
  check_dims(e.mlp_dims, "explicit.mlp_dims");
  if (e.embed_dim < 1) throw ConfigError("explicit.embed_dim", "must be >= 1");
  if (e.normalize_epsilon < 0.0) throw ConfigError("explicit.normalize_epsilon", "must be >= 0");

  const ImplicitConfig& im = c.model.implicit_branch;
  if (im.num_graphs < 1) throw ConfigError("implicit.num_graphs", "must be >= 1");
  check_dims(im.mlp_dims, "implicit.mlp_dims");
  if (im.embed_dim < 1) throw ConfigError("implicit.embed_dim", "must be >= 1");
  if (im.normalize_epsilon < 0.0) throw ConfigError("implicit.normalize_epsilon", "must be >= 0");

  if (c.model.edge_loss_weight < 0.0) throw ConfigError("model.edge_loss_weight", "must be >= 0");

  validate(c.train);
  if (c.eval.scenes < 1) throw ConfigError("eval.scenes", "must be >= 1");
}

RunConfig parse_config_string(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("<file>", std::string("YAML syntax error: ") + e.what());
  }
  RunConfig c;
  if (root.IsNull()) {
    validate(c);
    return c;
  }
  if (!root.IsMap()) throw ConfigError("<root>", "expected a mapping of sections");

  std::set<std::string> seen;
  for (const auto& kv : root) {
    const std::string name = kv.first.as<std::string>();
    if (!seen.insert(name).second) throw ConfigError(name, "duplicate key");
    if (name == "version") {
      if (read_u64(kv.second, "version") != static_cast<std::uint64_t>(kRunConfigVersion))
        throw ConfigError("version", "unsupported run-config version");
      continue;
    }
    if (name == "seed") {
      c.seed = read_u64(kv.second, "seed");
      continue;
    }
    const Section* section = nullptr;
    for (const auto& s : sections())
      if (s.name == name) section = &s;
    if (!section) throw ConfigError(name, "unknown key");
    if (kv.second.IsNull()) continue;
    if (!kv.second.IsMap()) throw ConfigError(name, "expected a mapping");
    std::set<std::string> seen_fields;
    for (const auto& fkv : kv.second) {
      const std::string fname = fkv.first.as<std::string>();
      const std::string full = name + "." + fname;
      if (!seen_fields.insert(fname).second) throw ConfigError(full, "duplicate key");
      const Field* field = nullptr;
      for (const auto& f : section->fields)
        if (f.key == fname) field = &f;
      if (!field) throw ConfigError(full, "unknown key");
      field->read(c, fkv.second, full);
    }
  }
  validate(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  return parse_config_string(read_file(path));
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "version: " << kRunConfigVersion << "\n";
  out << "seed: " << c.seed << "\n";
  for (const auto& s : sections()) {
    out << s.name << ":\n";
    for (const auto& f : s.fields) out << "  " << f.key << ": " << f.write(c) << "\n";
  }
  return out.str();
}

nlohmann::json model_config_to_json(const ModelConfig& m) {
  return {
      {"ablation", ablation_name(m.branches)},
      {"branches", {{"attribute", m.branches.attribute}, {"relationship", m.branches.relationship},
                    {"spatial", m.branches.spatial}}},
      {"edge_loss_weight", m.edge_loss_weight},
      {"explicit",
       {{"mlp_dims", m.explicit_branch.mlp_dims},
        {"embed_dim", m.explicit_branch.embed_dim},
        {"final_activation", to_string(m.explicit_branch.final_activation)},
        {"normalize_epsilon", m.explicit_branch.normalize_epsilon},
        {"mean_edge_loss", m.explicit_branch.mean_edge_loss}}},
      {"implicit",
       {{"num_graphs", m.implicit_branch.num_graphs},
        {"mlp_dims", m.implicit_branch.mlp_dims},
        {"embed_dim", m.implicit_branch.embed_dim},
        {"normalize", m.implicit_branch.normalize},
        {"normalize_epsilon", m.implicit_branch.normalize_epsilon}}},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig m;
    const auto& b = j.at("branches");
    m.branches = {b.at("attribute").get<bool>(), b.at("relationship").get<bool>(), b.at("spatial").get<bool>()};
    m.edge_loss_weight = j.at("edge_loss_weight").get<double>();
    const auto& e = j.at("explicit");
    m.explicit_branch.mlp_dims = e.at("mlp_dims").get<std::vector<std::size_t>>();
    m.explicit_branch.embed_dim = e.at("embed_dim").get<std::size_t>();
    m.explicit_branch.final_activation = activation_from_string(e.at("final_activation").get<std::string>());
    m.explicit_branch.normalize_epsilon = e.at("normalize_epsilon").get<double>();
    m.explicit_branch.mean_edge_loss = e.at("mean_edge_loss").get<bool>();
    const auto& i = j.at("implicit");
    m.implicit_branch.num_graphs = i.at("num_graphs").get<std::size_t>();
    m.implicit_branch.mlp_dims = i.at("mlp_dims").get<std::vector<std::size_t>>();
    m.implicit_branch.embed_dim = i.at("embed_dim").get<std::size_t>();
    m.implicit_branch.normalize = i.at("normalize").get<bool>();
    m.implicit_branch.normalize_epsilon = i.at("normalize_epsilon").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

}  // namespace hkrm
