#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hkrm/error.hpp"
#include "hkrm/world.hpp"
#include "test_util.hpp"

using namespace hkrm;

namespace {

double distance(const Matrix& m, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.cols(); ++k) s += (m(a, k) - m(b, k)) * (m(a, k) - m(b, k));
  return std::sqrt(s);
}

bool contains(const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

TEST(World, DeterministicInSeed) {
  const WorldConfig cfg = test::small_world_config();
  const WorldSpec a = generate_world(cfg, 5), b = generate_world(cfg, 5), c = generate_world(cfg, 6);
  EXPECT_EQ(a.prototypes, b.prototypes);
  EXPECT_NE(a.prototypes, c.prototypes);
  EXPECT_EQ(world_to_json(a), world_to_json(b));
  const Scene s1 = generate_scene(a, 77), s2 = generate_scene(b, 77);
  EXPECT_EQ(s1.features, s2.features);
  EXPECT_EQ(s1.boxes, s2.boxes);
  EXPECT_EQ(s1.classes, s2.classes);
}

TEST(World, RolesFollowFixedOrder) {
  const WorldSpec w = generate_world(test::small_world_config(), 1);
  ASSERT_EQ(w.confusable_pairs.size(), 2u);
  EXPECT_EQ(w.confusable_pairs[0].a, 1u);
  EXPECT_EQ(w.confusable_pairs[0].b, 2u);
  EXPECT_FALSE(w.confusable_pairs[0].spatial);
  EXPECT_EQ(w.confusable_pairs[1].a, 5u);
  EXPECT_TRUE(w.confusable_pairs[1].spatial);
  EXPECT_TRUE(w.is_companion(3));
  EXPECT_TRUE(w.is_companion(4));
  EXPECT_EQ(w.class_weights[0], 0.0);
  EXPECT_EQ(w.class_weights[3], 0.0);
  EXPECT_EQ(w.class_weights[1], w.class_weights[2]);
  EXPECT_EQ(w.attribute_group[0], -1);
  EXPECT_EQ(w.attribute_group[1], w.attribute_group[2]);
  EXPECT_NEAR(distance(w.prototypes, 1, 2), w.config.confusable_separation, 1e-12);
  for (std::size_t c = 1; c < w.num_classes(); ++c) {
    double s = 0.0;
    for (double v : w.attribute_distributions.row(c)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(World, UnpairedPrototypesAreSeparated) {
  WorldConfig cfg = test::small_world_config();
  cfg.num_context_pairs = 0;
  cfg.num_spatial_pairs = 0;
  const WorldSpec w = generate_world(cfg, 3);
  for (std::size_t a = 0; a < w.num_classes(); ++a)
    for (std::size_t b = a + 1; b < w.num_classes(); ++b)
      EXPECT_GT(distance(w.prototypes, a, b), 3.0 * cfg.noise_sigma) << a << "," << b;
}

TEST(World, ZeroNoiseGivesPrototypes) {
  WorldConfig cfg = test::small_world_config();
  cfg.noise_sigma = 0.0;
  const WorldSpec w = generate_world(cfg, 2);
  const Scene s = generate_scene(w, 9);
  for (std::size_t r = 0; r < s.num_regions(); ++r)
    for (std::size_t k = 0; k < w.feature_dim(); ++k) EXPECT_EQ(s.features(r, k), w.prototypes(s.classes[r], k));
}

TEST(World, FlatLongTailIsUniform) {
  WorldConfig cfg = test::small_world_config();
  cfg.long_tail_exponent = 0.0;
  const WorldSpec w = generate_world(cfg, 4);
  std::vector<int> counts(w.num_classes(), 0);
  Rng rng(5);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[draw_class(w, rng)];
  std::size_t drawable = 0;
  for (double x : w.class_weights) drawable += x > 0.0;
  for (std::size_t c = 0; c < w.num_classes(); ++c) {
    if (w.class_weights[c] == 0.0) {
      EXPECT_EQ(counts[c], 0);
    } else {
      EXPECT_NEAR(counts[c] / double(n), 1.0 / double(drawable), 0.02) << c;
    }
  }
}

TEST(World, SpatialClassesStayInTheirBand) {
  const WorldSpec w = generate_world(test::small_world_config(), 6);
  const auto scenes = generate_scenes(w, 1, "band", 300);
  std::size_t checked = 0;
  for (const Scene& s : scenes) {
    for (std::size_t r = 0; r < s.num_regions(); ++r) {
      const double y = s.boxes(r, 1) / s.image_h;
      if (const SpatialRule* rule = w.spatial_rule(s.classes[r])) {
        EXPECT_GE(y, rule->band_lo);
        EXPECT_LE(y, rule->band_hi);
        ++checked;
      }
      EXPECT_EQ(s.fg_prob[r] >= 0.6, s.classes[r] != 0);
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(World, CompanionCooccurrenceRate) {
  WorldConfig cfg = test::small_world_config();
  cfg.num_classes = 30;
  cfg.min_regions = 16;
  cfg.max_regions = 16;
  cfg.companion_probability = 0.7;
  cfg.long_tail_exponent = 0.0;
  const WorldSpec w = generate_world(cfg, 8);
  const auto scenes = generate_scenes(w, 2, "cooc", 10000);
  for (const ContextRule& rule : w.context_rules) {
    int with = 0, present = 0;
    for (const Scene& s : scenes) {
      if (!contains(s.classes, rule.cls)) continue;
      ++present;
      with += contains(s.classes, rule.companion);
    }
    ASSERT_GT(present, 1000);
    EXPECT_NEAR(with / double(present), 0.7, 0.02);
  }
  // the two members of a context pair never share a scene
  const auto& pair = w.confusable_pairs[0];
  for (const Scene& s : scenes) EXPECT_FALSE(contains(s.classes, pair.a) && contains(s.classes, pair.b));
}

TEST(World, AnnotationsFollowTheWorld) {
  const WorldSpec w = generate_world(test::small_world_config(), 7);
  const Scene s = generate_scene(w, 3);
  const auto records = scene_annotations(w, s, 11);
  std::size_t fg = 0;
  for (std::size_t c : s.classes) fg += c != 0;
  ASSERT_EQ(records.size(), fg);
  for (const auto& r : records) {
    const auto cls = static_cast<std::size_t>(std::find(w.class_names.begin(), w.class_names.end(), r.class_name) -
                                              w.class_names.begin());
    ASSERT_LT(cls, w.num_classes());
    for (const auto& a : r.attributes) {
      const auto k = static_cast<std::size_t>(
          std::find(w.attribute_names.begin(), w.attribute_names.end(), a) - w.attribute_names.begin());
      ASSERT_LT(k, w.attribute_names.size());
      EXPECT_GT(w.attribute_distributions(cls, k), 0.0);
    }
  }
}

TEST(World, RejectsInconsistentConfig) {
  WorldConfig cfg = test::small_world_config();
  cfg.num_classes = 5;
  EXPECT_THROW(generate_world(cfg, 1), DomainError);
  cfg = test::small_world_config();
  cfg.confusable_separation = 2.0;
  EXPECT_THROW(generate_world(cfg, 1), DomainError);
  cfg = test::small_world_config();
  cfg.noise_sigma = 50.0;
  EXPECT_THROW(generate_world(cfg, 1), DomainError);
}
