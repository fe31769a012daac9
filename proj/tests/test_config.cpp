#include <gtest/gtest.h>

#include "hkrm/config.hpp"
#include "hkrm/error.hpp"
#include "hkrm/tensor_io.hpp"
#include "test_util.hpp"

using namespace hkrm;

namespace {

std::string error_key(const std::string& yaml) {
  try {
    (void)parse_config_string(yaml);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, EmptyFileGivesDocumentedDefaults) {
  const RunConfig c = parse_config_string("");
  EXPECT_EQ(c, RunConfig{});
  EXPECT_EQ(serialize_config(c), read_file(test::fixture("default_config.yaml")));
}

TEST(Config, ParsesEverySection) {
  const RunConfig c = parse_config(test::fixture("custom_config.yaml"));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.world.num_classes, 16u);
  EXPECT_EQ(c.world.noise_sigma, 0.5);
  EXPECT_EQ(c.knowledge.predicate_mode, PredicateMode::per_predicate);
  EXPECT_TRUE(c.knowledge.attribute_similarity);
  EXPECT_EQ(c.model.explicit_branch.mlp_dims, (std::vector<std::size_t>{16, 8, 1}));
  EXPECT_EQ(c.model.explicit_branch.final_activation, Activation::sigmoid);
  EXPECT_TRUE(c.model.explicit_branch.mean_edge_loss);
  EXPECT_EQ(c.model.implicit_branch.num_graphs, 3u);
  EXPECT_FALSE(c.model.implicit_branch.normalize);
  EXPECT_EQ(c.model.branches, (BranchSet{true, false, true}));
  EXPECT_EQ(c.model.edge_loss_weight, 30.0);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_EQ(c.train.sgd.learning_rate, 0.02);
  EXPECT_FALSE(c.train.shuffle);
  EXPECT_EQ(c.eval.scenes, 25u);
}

TEST(Config, SerializationRoundTrips) {
  const RunConfig c = parse_config(test::fixture("custom_config.yaml"));
  const std::string text = serialize_config(c);
  const RunConfig again = parse_config_string(text);
  EXPECT_EQ(again, c);
  EXPECT_EQ(serialize_config(again), text);
  EXPECT_EQ(model_config_from_json(model_config_to_json(c.model)).branches, c.model.branches);
  EXPECT_EQ(serialize_config(RunConfig{}), serialize_config(parse_config_string(serialize_config(RunConfig{}))));
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(error_key("implicit:\n  num_graphs: 0\n"), "implicit.num_graphs");
  EXPECT_EQ(error_key("train:\n  batchsize: 2\n"), "train.batchsize");
  EXPECT_EQ(error_key("bogus: 1\n"), "bogus");
  EXPECT_EQ(error_key("train:\n  epochs: many\n"), "train.epochs");
  EXPECT_EQ(error_key("train:\n  learning_rate: fast\n"), "train.learning_rate");
  EXPECT_EQ(error_key("train:\n  epochs: -3\n"), "train.epochs");
  EXPECT_EQ(error_key("train:\n  shuffle: maybe\n"), "train.shuffle");
  EXPECT_EQ(error_key("explicit:\n  mlp_dims: [8, 2]\n"), "explicit.mlp_dims");
  EXPECT_EQ(error_key("model:\n  ablation: everything\n"), "model.ablation");
  EXPECT_EQ(error_key("world:\n  max_regions: 2\n  min_regions: 4\n"), "world.max_regions");
  EXPECT_EQ(error_key("train:\n  epochs: 2\n  baseline_epochs: 3\n"), "train.baseline_epochs");
  EXPECT_EQ(error_key("version: 2\n"), "version");
  EXPECT_EQ(error_key("train: 3\n"), "train");
  EXPECT_EQ(error_key("[1, 2]\n"), "<root>");
  EXPECT_THROW(parse_config(test::fixture("does_not_exist.yaml")), IoError);
}
