#include <gtest/gtest.h>

#include <cmath>

#include "hkrm/error.hpp"
#include "hkrm/prior_graph.hpp"
#include "hkrm/rng.hpp"
#include "hkrm/tensor_io.hpp"
#include "test_util.hpp"

using namespace hkrm;

namespace {

IngestResult fixture_ingest() {
  return ingest_annotations(read_annotations(test::fixture("annotations_50.jsonl")));
}

std::vector<double> random_distribution(Rng& rng, std::size_t k, bool sparse) {
  std::vector<double> p(k);
  double s = 0.0;
  for (double& v : p) {
    v = (sparse && rng.uniform() < 0.4) ? 0.0 : rng.uniform();
    s += v;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (double& v : p) v /= s;
  return p;
}

// Straight from the definition, natural log converted to bits.
double js_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) a += p[i] * std::log(p[i] / m);
    if (q[i] > 0) b += q[i] * std::log(q[i] / m);
  }
  return 0.5 * (a + b) / std::log(2.0);
}

// Frozen output of tests/fixtures/make_golden.py.
const double kAttributeGraph[5][5] = {
    {0, 0.36828973411573962, 0, 1, 0.63810578427457809},
    {0.36828973411573962, 0, 0, 0.55914068289055974, 1},
    {0, 0, 0, 0, 0},
    {1, 0.55914068289055974, 0, 0, 1},
    {0.63810578427457809, 1, 0, 1, 0},
};
const double kRelationshipGraph[5][5] = {
    {1.0 / 16, 6.0 / 16, 1.0 / 16, 3.0 / 16, 5.0 / 16},
    {6.0 / 17, 0, 1.0 / 17, 2.0 / 17, 8.0 / 17},
    {0.2, 0.2, 0, 0.2, 0.4},
    {3.0 / 12, 2.0 / 12, 1.0 / 12, 2.0 / 12, 4.0 / 12},
    {5.0 / 21, 8.0 / 21, 2.0 / 21, 4.0 / 21, 2.0 / 21},
};

}  // namespace

TEST(JsDivergence, HandValue) {
  const std::vector<double> p = {0.5, 0.5}, q = {1.0, 0.0};
  EXPECT_NEAR(js_divergence(p, q), 0.311278, 1e-6);
  EXPECT_EQ(js_divergence(q, std::vector<double>{0.0, 1.0}), 1.0);
}

TEST(JsDivergence, AxiomsOnRandomPairs) {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_distribution(rng, 16, t % 2 == 0);
    const auto q = random_distribution(rng, 16, t % 3 == 0);
    const double pq = js_divergence(p, q);
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
    EXPECT_EQ(pq, js_divergence(q, p));
    EXPECT_EQ(js_divergence(p, p), 0.0);
    EXPECT_NEAR(pq, js_oracle(p, q), 1e-12);
  }
}

TEST(JsDivergence, RejectsBadInput) {
  EXPECT_THROW(js_divergence(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), DomainError);
  ClassDistribution empty{{0.0, 0.0}, true};
  ClassDistribution full{{1.0, 0.0}, false};
  EXPECT_THROW(js_divergence(empty, full), DomainError);
}

TEST(AttributeGraph, FixtureMatchesOracle) {
  const auto ingest = fixture_ingest();
  const GraphBuild b = build_attribute_graph(ingest.table);
  EXPECT_EQ(b.graph.kind, GraphKind::attribute);
  ASSERT_EQ(b.graph.num_classes(), 5u);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(b.graph.edges(i, j), kAttributeGraph[i][j], 1e-12) << i << "," << j;
  EXPECT_EQ(b.report.empty_classes, (std::vector<std::size_t>{2}));

  const GraphBuild s = build_attribute_graph(ingest.table, {.similarity = true});
  EXPECT_TRUE(s.graph.similarity);
  EXPECT_NEAR(s.graph.edges(0, 1), 1.0 - kAttributeGraph[0][1], 1e-12);
  EXPECT_EQ(s.graph.edges(0, 2), 0.0);
}

TEST(AttributeGraph, RandomTableMatchesBruteForce) {
  Rng rng(3);
  FrequencyTable t;
  const std::size_t c = 9, k = 7;
  for (std::size_t i = 0; i < c; ++i) t.class_names.push_back("c" + std::to_string(i));
  for (std::size_t i = 0; i < k; ++i) t.attribute_names.push_back("a" + std::to_string(i));
  t.counts.resize(c * k);
  for (auto& v : t.counts) v = rng.uniform() < 0.3 ? 0 : rng.below(20);
  for (std::size_t a = 0; a < k; ++a) t.count(4, a) = 0;
  const GraphBuild b = build_attribute_graph(t);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      auto dist = [&](std::size_t r) {
        std::vector<double> p(k);
        double s = 0;
        for (std::size_t a = 0; a < k; ++a) s += static_cast<double>(t.count(r, a));
        for (std::size_t a = 0; a < k; ++a) p[a] = static_cast<double>(t.count(r, a)) / s;
        return p;
      };
      const double expected = (i == 4 || j == 4) ? 0.0 : js_oracle(dist(i), dist(j));
      EXPECT_NEAR(b.graph.edges(i, j), expected, 1e-12);
      EXPECT_EQ(b.graph.edges(i, j), b.graph.edges(j, i));
    }
  }
  EXPECT_EQ(b.report.empty_classes, (std::vector<std::size_t>{4}));
}

TEST(RelationshipGraph, FixtureMatchesOracle) {
  const GraphBuild b = build_relationship_graph(fixture_ingest().relations);
  EXPECT_EQ(b.graph.kind, GraphKind::relationship);
  for (std::size_t i = 0; i < 5; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(b.graph.edges(i, j), kRelationshipGraph[i][j], 1e-15) << i << "," << j;
      row += b.graph.edges(i, j);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
  EXPECT_TRUE(b.report.empty_classes.empty());
}

TEST(RelationshipGraph, PerPredicateMatchesBruteForce) {
  const auto triples = fixture_ingest().relations;
  const GraphBuild b = build_relationship_graph(triples, PredicateMode::per_predicate);
  double sym[3][5][5] = {};
  for (const auto& t : triples.triples) {
    sym[t.predicate][t.subject][t.object] += static_cast<double>(t.count);
    if (t.subject != t.object) sym[t.predicate][t.object][t.subject] += static_cast<double>(t.count);
  }
  double combined[5][5] = {};
  for (auto& p : sym) {
    double mass = 0;
    for (auto& row : p)
      for (double v : row) mass += v;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) combined[i][j] += p[i][j] / mass;
  }
  for (int i = 0; i < 5; ++i) {
    double row = 0;
    for (double v : combined[i]) row += v;
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(b.graph.edges(i, j), combined[i][j] / row, 1e-12);
  }
}

TEST(RelationshipGraph, IsolatedClassRowIsZero) {
  RelationshipTriples t;
  t.class_names = {"a", "b", "c"};
  t.predicate_names = {"p"};
  t.triples = {{0, 0, 1, 2}};
  const GraphBuild b = build_relationship_graph(t);
  EXPECT_EQ(b.graph.edges(0, 1), 1.0);
  EXPECT_EQ(b.graph.edges(1, 0), 1.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(b.graph.edges(2, j), 0.0);
  EXPECT_EQ(b.report.empty_classes, (std::vector<std::size_t>{2}));
  t.triples.clear();
  EXPECT_THROW(build_relationship_graph(t), DomainError);
}

TEST(GraphFile, MatchesGoldenFiles) {
  const auto ingest = fixture_ingest();
  const PriorGraph attr = build_attribute_graph(ingest.table).graph;
  const PriorGraph rel = build_relationship_graph(ingest.relations).graph;
  for (const auto& [graph, file] : {std::pair{attr, "attribute_graph.bin"}, std::pair{rel, "relationship_graph.bin"}}) {
    const std::string golden = read_file(test::fixture(file));
    const std::string ours = encode_graph(graph);
    // Header bytes must match exactly; payload to within rounding of the oracle.
    EXPECT_EQ(ours.substr(0, ours.find('\n')), golden.substr(0, golden.find('\n')));
    const PriorGraph g = decode_graph(golden);
    EXPECT_EQ(g.class_names, graph.class_names);
    EXPECT_EQ(g.kind, graph.kind);
    EXPECT_LE(max_abs_diff(g.edges, graph.edges), 1e-15);
  }
}

TEST(GraphFile, RoundTripAndCsv) {
  const PriorGraph g = build_relationship_graph(fixture_ingest().relations).graph;
  const auto dir = test::temp_dir("graph_io");
  save_graph(dir / "g.bin", g);
  EXPECT_EQ(load_graph(dir / "g.bin"), g);
  const std::string csv = graph_to_csv(g);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,cat,dog,lamp,person,sofa");
  std::string bytes = encode_graph(g);
  EXPECT_THROW(decode_graph(bytes.substr(0, bytes.size() - 8)), FormatError);
}
