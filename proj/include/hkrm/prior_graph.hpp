#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hkrm/annotations.hpp"
#include "hkrm/matrix.hpp"

namespace hkrm {

enum class GraphKind { attribute, relationship };

std::string to_string(GraphKind kind);
GraphKind graph_kind_from_string(std::string_view s);

// Class-to-class prior knowledge graph (the supervision target of the explicit
// module). edges(i, j) is the prior weight between class i and class j.
struct PriorGraph {
  GraphKind kind = GraphKind::attribute;
  bool similarity = false;  // attribute kind only: edges hold 1 - JS
  std::vector<std::string> class_names;
  Matrix edges;

  std::size_t num_classes() const { return edges.rows(); }
  bool operator==(const PriorGraph&) const = default;
};

// Row of a frequency table divided by its sum. `empty` is set when the class
// has no annotations, in which case probs is all zero.
struct ClassDistribution {
  std::vector<double> probs;
  bool empty = false;
};

ClassDistribution class_distribution(const FrequencyTable& table, std::size_t class_id);

// Jensen-Shannon divergence with base-2 logarithms, so the result lies in
// [0, 1] and distributions with disjoint support score exactly 1. Zero-mass
// entries contribute nothing. Throws DomainError for empty distributions or
// mismatched lengths.
double js_divergence(const ClassDistribution& p, const ClassDistribution& q);
double js_divergence(std::span<const double> p, std::span<const double> q);

struct GraphReport {
  std::vector<std::size_t> empty_classes;  // zero annotations / isolated rows
};

struct GraphBuild {
  PriorGraph graph;
  GraphReport report;
};

struct AttributeGraphOptions {
  bool similarity = false;  // emit 1 - JS instead of JS
};

// edges(i, j) = JS(P_i, P_j), or 1 - JS with `similarity`. Pairs that involve
// an empty class get weight 0 and the class is listed in the report.
GraphBuild build_attribute_graph(const FrequencyTable& table, const AttributeGraphOptions& options = {});

enum class PredicateMode {
  collapsed,      // one count per (subject, object), predicates ignored
  per_predicate,  // each predicate's symmetric counts scaled to unit mass, then summed
};

// Symmetric co-occurrence: raw(i, j) counts triples i->j over all
// predicates, sym = raw + raw^T with the diagonal counted once, then each row
// is divided by its sum. All-zero rows stay zero and are reported.
GraphBuild build_relationship_graph(const RelationshipTriples& triples,
                                    PredicateMode mode = PredicateMode::collapsed);

// Binary graph file ("hkrm-graph" framing, see tensor_io.hpp):
//   {"format":"hkrm-graph","version":1,"kind":..., "similarity":bool,
//    "num_classes":C,"class_names":[...],"payload_values":C*C}
// followed by the C x C edge matrix, row-major float64 little-endian.
inline constexpr int kGraphFormatVersion = 1;
std::string encode_graph(const PriorGraph& graph);
PriorGraph decode_graph(std::string_view bytes);
void save_graph(const std::filesystem::path& path, const PriorGraph& graph);
PriorGraph load_graph(const std::filesystem::path& path);

// Header row of class names, then one row per class; values printed with 17
// significant digits.
std::string graph_to_csv(const PriorGraph& graph);

}  // namespace hkrm
