#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "hkrm/model.hpp"
#include "hkrm/trainer.hpp"
#include "hkrm/world.hpp"
#include "json.hpp"

namespace hkrm {

inline constexpr int kRunConfigVersion = 1;

struct EvalConfig {
  std::size_t scenes = 200;  // held-out scenes, stream "eval_scene" of derive_seed(seed, "eval")
  bool operator==(const EvalConfig&) const = default;
};

// Everything one experiment needs. Every key is optional in the file; see
// docs/config.md for the key set and defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  KnowledgeConfig knowledge;
  ModelConfig model;  // model.branches is set by the "model.ablation" key
  TrainConfig train;
  EvalConfig eval;
};

bool operator==(const RunConfig& a, const RunConfig& b);

// Throws ConfigError naming the offending key.
void validate(const RunConfig& config);

// YAML text in, validated config out. Unknown keys, wrong types and
// constraint violations throw ConfigError naming the key.
RunConfig parse_config_string(std::string_view text);
// Throws IoError when the file cannot be read.
RunConfig parse_config(const std::filesystem::path& path);

// Canonical YAML: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const RunConfig& config);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace hkrm
