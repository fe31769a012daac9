#include "hkrm/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hkrm/error.hpp"

namespace hkrm {

namespace {

std::size_t required_classes(const WorldConfig& c) {
  return 1 + 4 * c.num_context_pairs + 2 * c.num_spatial_pairs + 2 * c.num_spatial_anchors;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

std::string class_name(std::size_t c) {
  if (c == 0) return "background";
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%02zu", c);
  return buf;
}

std::size_t draw_categorical(std::span<const double> weights, double total, Rng& rng) {
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last;
}

}  // namespace

void validate(const WorldConfig& c) {
  if (c.num_classes < 2) throw DomainError("world: num_classes must be >= 2");
  if (c.feature_dim < 2) throw DomainError("world: feature_dim must be >= 2");
  if (required_classes(c) > c.num_classes) {
    throw DomainError("world: roles need " + std::to_string(required_classes(c)) +
                      " classes but num_classes is " + std::to_string(c.num_classes));
  }
  if (!(c.prototype_scale > 0.0)) throw DomainError("world: prototype_scale must be > 0");
  if (!(c.noise_sigma >= 0.0)) throw DomainError("world: noise_sigma must be >= 0");
  if (!(c.long_tail_exponent >= 0.0)) throw DomainError("world: long_tail_exponent must be >= 0");
  if (!(c.background_fraction >= 0.0 && c.background_fraction < 1.0))
    throw DomainError("world: background_fraction must lie in [0, 1)");
  if (c.min_regions < 1 || c.max_regions < c.min_regions)
    throw DomainError("world: need 1 <= min_regions <= max_regions");
  if (!(c.confusable_separation >= 0.0)) throw DomainError("world: confusable_separation must be >= 0");
  if (c.confusable_separation > c.prototype_scale) {
    throw DomainError("world: confusable_separation " + std::to_string(c.confusable_separation) +
                      " exceeds prototype_scale " + std::to_string(c.prototype_scale));
  }
  if (!(c.companion_probability >= 0.0 && c.companion_probability <= 1.0))
    throw DomainError("world: companion_probability must lie in [0, 1]");
  if (c.num_attribute_groups < 1) throw DomainError("world: num_attribute_groups must be >= 1");
  if (c.num_attributes < c.num_attribute_groups)
    throw DomainError("world: num_attributes must be >= num_attribute_groups");
  if (c.attributes_per_region < 1) throw DomainError("world: attributes_per_region must be >= 1");
  if (!(c.rare_quantile > 0.0 && c.rare_quantile <= 1.0))
    throw DomainError("world: rare_quantile must lie in (0, 1]");
}

const SpatialRule* WorldSpec::spatial_rule(std::size_t cls) const {
  for (const auto& r : spatial_rules)
    if (r.cls == cls) return &r;
  return nullptr;
}

const ContextRule* WorldSpec::context_rule(std::size_t cls) const {
  for (const auto& r : context_rules)
    if (r.cls == cls) return &r;
  return nullptr;
}

bool WorldSpec::is_companion(std::size_t cls) const {
  for (const auto& r : context_rules)
    if (r.companion == cls) return true;
  return false;
}

std::optional<std::size_t> WorldSpec::context_partner(std::size_t cls) const {
  for (const auto& p : confusable_pairs) {
    if (p.spatial) continue;
    if (p.a == cls) return p.b;
    if (p.b == cls) return p.a;
  }
  return std::nullopt;
}

WorldSpec generate_world(const WorldConfig& config, std::uint64_t seed) {
  validate(config);
  WorldSpec w;
  w.config = config;
  w.seed = seed;
  const std::size_t c_total = config.num_classes;
  const std::size_t d = config.feature_dim;
  for (std::size_t c = 0; c < c_total; ++c) w.class_names.push_back(class_name(c));
  for (std::size_t k = 0; k < config.num_attributes; ++k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "attr%02zu", k);
    w.attribute_names.emplace_back(buf);
  }

  // roles
  std::vector<std::size_t> partner(c_total, 0);  // confusable partner defined by construction
  std::size_t next = 1;
  for (std::size_t p = 0; p < config.num_context_pairs; ++p) {
    const std::size_t a = next, b = next + 1, ca = next + 2, cb = next + 3;
    next += 4;
    w.confusable_pairs.push_back({a, b, config.confusable_separation, false});
    w.context_rules.push_back({a, ca, config.companion_probability});
    w.context_rules.push_back({b, cb, config.companion_probability});
    partner[b] = a;
  }
  for (std::size_t p = 0; p < config.num_spatial_pairs; ++p) {
    const std::size_t top = next, bottom = next + 1;
    next += 2;
    w.confusable_pairs.push_back({top, bottom, config.confusable_separation, true});
    w.spatial_rules.push_back({top, kTopBandLo, kTopBandHi});
    w.spatial_rules.push_back({bottom, kBottomBandLo, kBottomBandHi});
    partner[bottom] = top;
  }
  for (std::size_t i = 0; i < config.num_spatial_anchors; ++i)
    w.spatial_rules.push_back({next++, kTopBandLo, kTopBandHi});
  for (std::size_t i = 0; i < config.num_spatial_anchors; ++i)
    w.spatial_rules.push_back({next++, kBottomBandLo, kBottomBandHi});

  // long-tail sampling weights; both members of a confusable pair share one
  w.class_weights.assign(c_total, 0.0);
  std::size_t rank = 0;
  std::vector<std::size_t> drawable;
  for (std::size_t c = 1; c < c_total; ++c) {
    if (w.is_companion(c)) continue;
    drawable.push_back(c);
    w.class_weights[c] = partner[c] ? w.class_weights[partner[c]]
                                    : std::pow(static_cast<double>(rank + 1), -config.long_tail_exponent);
    ++rank;
  }
  {
    std::vector<std::size_t> order = drawable;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return w.class_weights[x] < w.class_weights[y] ||
             (w.class_weights[x] == w.class_weights[y] && x > y);
    });
    const auto n_rare = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.rare_quantile * static_cast<double>(order.size()))));
    order.resize(std::min(n_rare, order.size()));
    std::sort(order.begin(), order.end());
    w.rare_classes = order;
  }

  // attribute groups and class-level attribute distributions
  const std::size_t groups = config.num_attribute_groups;
  const std::size_t block = config.num_attributes / groups;
  w.attribute_group.assign(c_total, -1);
  w.attribute_distributions = Matrix(c_total, config.num_attributes);
  for (std::size_t c = 1; c < c_total; ++c) {
    auto row = w.attribute_distributions.row(c);
    if (partner[c]) {
      // confusable partners look alike, so they share one attribute profile
      w.attribute_group[c] = w.attribute_group[partner[c]];
      const auto base = w.attribute_distributions.row(partner[c]);
      std::copy(base.begin(), base.end(), row.begin());
      continue;
    }
    const std::size_t g = (c - 1) % groups;
    const std::size_t idx = (c - 1) / groups;
    w.attribute_group[c] = static_cast<int>(g);
    for (std::size_t k = 0; k < block; ++k) row[g * block + k] = 1.0;
    row[g * block + idx % block] += 3.0;
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& v : row) v /= total;
  }

  // prototypes
  Rng rng(derive_seed(seed, "prototypes"));
  w.prototypes = Matrix(c_total, d);
  const double min_gap = 3.0 * config.noise_sigma;
  for (std::size_t c = 0; c < c_total; ++c) {
    auto row = w.prototypes.row(c);
    if (partner[c]) {
      std::vector<double> u(d);
      double norm = 0.0;
      for (double& v : u) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      const auto base = w.prototypes.row(partner[c]);
      for (std::size_t k = 0; k < d; ++k) row[k] = base[k] + config.confusable_separation * u[k] / norm;
      continue;
    }
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      for (double& v : row) v = rng.normal(0.0, config.prototype_scale);
      ok = true;
      for (std::size_t o = 0; o < c && ok; ++o)
        if (distance(row, w.prototypes.row(o)) <= min_gap) ok = false;
    }
    if (!ok) {
      throw DomainError("world: cannot place prototype " + std::to_string(c) +
                        " more than 3 sigma from the others; raise prototype_scale or lower noise_sigma");
    }
  }
  return w;
}

std::size_t draw_class(const WorldSpec& world, Rng& rng) {
  const double total = std::accumulate(world.class_weights.begin(), world.class_weights.end(), 0.0);
  return draw_categorical(world.class_weights, total, rng);
}

Scene generate_scene(const WorldSpec& world, std::uint64_t seed) {
  const WorldConfig& cfg = world.config;
  Rng rng(seed);
  Scene s;
  char id[32];
  std::snprintf(id, sizeof id, "scene-%016llx", static_cast<unsigned long long>(seed));
  s.image_id = id;
  const std::size_t n = cfg.min_regions + rng.below(cfg.max_regions - cfg.min_regions + 1);
  s.image_w = rng.uniform(320.0, 960.0);
  s.image_h = rng.uniform(320.0, 960.0);

  auto present = [&](std::size_t cls) {
    return std::find(s.classes.begin(), s.classes.end(), cls) != s.classes.end();
  };
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t cls = 0;
    if (rng.uniform() >= cfg.background_fraction) {
      for (int attempt = 0; attempt < 16; ++attempt) {
        cls = draw_class(world, rng);
        const auto other = world.context_partner(cls);
        if (!other || !present(*other)) break;
        cls = 0;
      }
    }
    s.classes.push_back(cls);
  }

  // companions of context primaries overwrite background or free regions
  auto replaceable = [&](std::size_t cls) {
    return cls == 0 || (!world.spatial_rule(cls) && !world.context_rule(cls) && !world.is_companion(cls) &&
                        !world.context_partner(cls));
  };
  for (const auto& rule : world.context_rules) {
    if (!present(rule.cls)) continue;
    if (rng.uniform() >= rule.probability) continue;
    if (present(rule.companion)) continue;
    std::vector<std::size_t> slots;
    for (std::size_t r = 0; r < n; ++r)
      if (replaceable(s.classes[r])) slots.push_back(r);
    if (slots.empty()) continue;
    s.classes[slots[rng.below(slots.size())]] = rule.companion;
  }

  const std::size_t d = world.feature_dim();
  s.features = Matrix(n, d);
  s.boxes = Matrix(n, 4);
  s.fg_prob.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t cls = s.classes[r];
    const auto proto = world.prototypes.row(cls);
    auto f = s.features.row(r);
    for (std::size_t k = 0; k < d; ++k) f[k] = proto[k] + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0);

    const double bw = rng.uniform(0.05, 0.25);
    const double bh = rng.uniform(0.05, 0.2);
    const double bx = rng.uniform(0.0, 1.0 - bw);
    double by;
    if (const SpatialRule* rule = world.spatial_rule(cls)) {
      by = rng.uniform(rule->band_lo, rule->band_hi);
    } else {
      by = rng.uniform(0.0, 0.9);
    }
    s.boxes(r, 0) = bx * s.image_w;
    s.boxes(r, 1) = by * s.image_h;
    s.boxes(r, 2) = bw * s.image_w;
    s.boxes(r, 3) = bh * s.image_h;
    s.fg_prob[r] = cls == 0 ? rng.uniform(0.0, 0.4) : rng.uniform(0.6, 1.0);
  }
  return s;
}

std::vector<Scene> generate_scenes(const WorldSpec& world, std::uint64_t root, const std::string& stream,
                                   std::size_t count) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(world, derive_seed(root, stream, i)));
  return out;
}

std::vector<AnnotationRecord> scene_annotations(const WorldSpec& world, const Scene& scene,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AnnotationRecord> out;
  const std::size_t n = scene.num_regions();
  auto center = [&](std::size_t r) {
    return std::pair{scene.boxes(r, 0) + 0.5 * scene.boxes(r, 2), scene.boxes(r, 1) + 0.5 * scene.boxes(r, 3)};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = scene.classes[i];
    if (cls == 0) continue;
    AnnotationRecord rec;
    rec.image = scene.image_id;
    rec.class_name = world.class_names[cls];
    const auto dist = world.attribute_distributions.row(cls);
    for (std::size_t a = 0; a < world.config.attributes_per_region; ++a)
      rec.attributes.push_back(world.attribute_names[draw_categorical(dist, 1.0, rng)]);

    if (const ContextRule* rule = world.context_rule(cls)) {
      if (std::find(scene.classes.begin(), scene.classes.end(), rule->companion) != scene.classes.end())
        rec.relations.push_back({"with", world.class_names[rule->companion]});
    }
    const auto [xi, yi] = center(i);
    std::size_t nearest = n;
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || scene.classes[j] == 0) continue;
      const auto [xj, yj] = center(j);
      const double dd = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
      if (nearest == n || dd < best) {
        nearest = j;
        best = dd;
      }
    }
    if (nearest != n) {
      const double yj = center(nearest).second;
      rec.relations.push_back({yi < yj ? "above" : "below", world.class_names[scene.classes[nearest]]});
    }
    out.push_back(std::move(rec));
  }
  return out;
}

nlohmann::json world_to_json(const WorldSpec& w) {
  using nlohmann::json;
  const WorldConfig& c = w.config;
  json j;
  j["seed"] = w.seed;
  j["config"] = {{"num_classes", c.num_classes},
                 {"feature_dim", c.feature_dim},
                 {"prototype_scale", c.prototype_scale},
                 {"noise_sigma", c.noise_sigma},
                 {"long_tail_exponent", c.long_tail_exponent},
                 {"background_fraction", c.background_fraction},
                 {"min_regions", c.min_regions},
                 {"max_regions", c.max_regions},
                 {"num_context_pairs", c.num_context_pairs},
                 {"num_spatial_pairs", c.num_spatial_pairs},
                 {"num_spatial_anchors", c.num_spatial_anchors},
                 {"confusable_separation", c.confusable_separation},
                 {"companion_probability", c.companion_probability},
                 {"num_attribute_groups", c.num_attribute_groups},
                 {"num_attributes", c.num_attributes},
                 {"attributes_per_region", c.attributes_per_region},
                 {"rare_quantile", c.rare_quantile}};
  j["class_names"] = w.class_names;
  j["attribute_names"] = w.attribute_names;
  j["class_weights"] = w.class_weights;
  j["attribute_group"] = w.attribute_group;
  j["rare_classes"] = w.rare_classes;
  j["confusable_pairs"] = json::array();
  for (const auto& p : w.confusable_pairs)
    j["confusable_pairs"].push_back({{"a", p.a}, {"b", p.b}, {"separation", p.separation},
                                     {"kind", p.spatial ? "spatial" : "context"}});
  j["context_rules"] = json::array();
  for (const auto& r : w.context_rules)
    j["context_rules"].push_back({{"class", r.cls}, {"companion", r.companion}, {"probability", r.probability}});
  j["spatial_rules"] = json::array();
  for (const auto& r : w.spatial_rules)
    j["spatial_rules"].push_back({{"class", r.cls}, {"band", {r.band_lo, r.band_hi}}});
  j["prototypes"] = json::array();
  for (std::size_t c2 = 0; c2 < w.num_classes(); ++c2) {
    auto row = w.prototypes.row(c2);
    j["prototypes"].push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["attribute_distributions"] = json::array();
  for (std::size_t c2 = 0; c2 < w.num_classes(); ++c2) {
    auto row = w.attribute_distributions.row(c2);
    j["attribute_distributions"].push_back(std::vector<double>(row.begin(), row.end()));
  }
  return j;
}

}  // namespace hkrm
