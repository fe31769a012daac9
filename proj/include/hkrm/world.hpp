#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hkrm/annotations.hpp"
#include "hkrm/matrix.hpp"
#include "hkrm/rng.hpp"
#include "json.hpp"

namespace hkrm {

// Knobs of the synthetic world. Class 0 is always the background class; the
// remaining classes receive roles in a fixed order: context pairs (primary a,
// primary b, companion of a, companion of b), spatial pairs (top member,
// bottom member), spatial anchors (top band, then bottom band), free classes.
struct WorldConfig {
  std::size_t num_classes = 20;
  std::size_t feature_dim = 64;
  double prototype_scale = 1.0;  // std of prototype entries
  double noise_sigma = 1.0;      // per-dimension feature noise
  double long_tail_exponent = 1.0;
  double background_fraction = 0.15;
  std::size_t min_regions = 32;
  std::size_t max_regions = 32;
  std::size_t num_context_pairs = 1;
  std::size_t num_spatial_pairs = 1;
  std::size_t num_spatial_anchors = 2;  // per band
  double confusable_separation = 0.1;   // prototype distance inside a pair
  double companion_probability = 1.0;
  std::size_t num_attribute_groups = 4;
  std::size_t num_attributes = 32;
  std::size_t attributes_per_region = 2;
  double rare_quantile = 0.25;

  bool operator==(const WorldConfig&) const = default;
};

void validate(const WorldConfig& config);

struct ConfusablePair {
  std::size_t a = 0;
  std::size_t b = 0;
  double separation = 0.0;
  bool spatial = false;  // separated by vertical band rather than context
};

struct ContextRule {
  std::size_t cls = 0;
  std::size_t companion = 0;
  double probability = 1.0;
};

struct SpatialRule {
  std::size_t cls = 0;
  double band_lo = 0.0;  // bounds on y / image height
  double band_hi = 1.0;
};

inline constexpr double kTopBandLo = 0.0;
inline constexpr double kTopBandHi = 0.15;
inline constexpr double kBottomBandLo = 0.75;
inline constexpr double kBottomBandHi = 0.9;

struct WorldSpec {
  WorldConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> attribute_names;
  Matrix prototypes;                  // C x D
  Matrix attribute_distributions;     // C x K, row 0 (background) all zero
  std::vector<double> class_weights;  // sampling weight, 0 for background/companions
  std::vector<int> attribute_group;   // per class, -1 for background
  std::vector<ConfusablePair> confusable_pairs;
  std::vector<ContextRule> context_rules;
  std::vector<SpatialRule> spatial_rules;
  std::vector<std::size_t> rare_classes;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t feature_dim() const { return prototypes.cols(); }
  const SpatialRule* spatial_rule(std::size_t cls) const;
  const ContextRule* context_rule(std::size_t cls) const;
  bool is_companion(std::size_t cls) const;
  // Context-pair partner of cls, if any.
  std::optional<std::size_t> context_partner(std::size_t cls) const;
};

// Deterministic in (config, seed). Throws DomainError for an inconsistent
// configuration (too few classes for the roles, separation larger
// than the prototype scale, prototypes that cannot be separated by 3 sigma).
WorldSpec generate_world(const WorldConfig& config, std::uint64_t seed);

struct Scene {
  std::string image_id;
  double image_w = 1.0;
  double image_h = 1.0;
  Matrix features;  // N x D
  Matrix boxes;     // N x 4 (x, y, w, h)
  std::vector<std::size_t> classes;
  std::vector<double> fg_prob;

  std::size_t num_regions() const { return classes.size(); }
};

// Draws one foreground class from the long-tail weights.
std::size_t draw_class(const WorldSpec& world, Rng& rng);

Scene generate_scene(const WorldSpec& world, std::uint64_t seed);

// Scene i of a stream: generate_scene(world, derive_seed(root, stream, i)).
std::vector<Scene> generate_scenes(const WorldSpec& world, std::uint64_t root, const std::string& stream,
                                   std::size_t count);

// One record per foreground region: attributes drawn from the class
// distribution; relations are "with" toward the companion (context primaries
// whose companion is present) plus "above"/"below" toward the nearest other
// foreground region.
std::vector<AnnotationRecord> scene_annotations(const WorldSpec& world, const Scene& scene,
                                                std::uint64_t seed);

// Machine-readable dump of the world (roles, weights, prototypes).
nlohmann::json world_to_json(const WorldSpec& world);

}  // namespace hkrm
