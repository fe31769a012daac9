#include "hkrm/prior_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hkrm/error.hpp"
#include "hkrm/tensor_io.hpp"

namespace hkrm {

std::string to_string(GraphKind kind) {
  return kind == GraphKind::attribute ? "attribute" : "relationship";
}

GraphKind graph_kind_from_string(std::string_view s) {
  if (s == "attribute") return GraphKind::attribute;
  if (s == "relationship") return GraphKind::relationship;
  throw DomainError("unknown graph kind '" + std::string(s) + "'");
}

ClassDistribution class_distribution(const FrequencyTable& table, std::size_t class_id) {
  if (class_id >= table.num_classes()) {
    throw DomainError("class_distribution: class id " + std::to_string(class_id) + " >= " +
                      std::to_string(table.num_classes()));
  }
  const std::size_t k = table.num_attributes();
  ClassDistribution d;
  d.probs.assign(k, 0.0);
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < k; ++a) total += table.count(class_id, a);
  if (total == 0) {
    d.empty = true;
    return d;
  }
  for (std::size_t a = 0; a < k; ++a)
    d.probs[a] = static_cast<double>(table.count(class_id, a)) / static_cast<double>(total);
  return d;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DomainError("js_divergence: distributions have " + std::to_string(p.size()) + " and " +
                      std::to_string(q.size()) + " entries");
  }
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    if (p[k] > 0.0) kl_p += p[k] * std::log2(p[k] / m);
    if (q[k] > 0.0) kl_q += q[k] * std::log2(q[k] / m);
  }
  return std::clamp(0.5 * kl_p + 0.5 * kl_q, 0.0, 1.0);
}

double js_divergence(const ClassDistribution& p, const ClassDistribution& q) {
  if (p.empty || q.empty) throw DomainError("js_divergence: empty distribution");
  return js_divergence(std::span<const double>(p.probs), std::span<const double>(q.probs));
}

GraphBuild build_attribute_graph(const FrequencyTable& table, const AttributeGraphOptions& options) {
  const std::size_t c = table.num_classes();
  if (c < 2) throw DomainError("build_attribute_graph: need at least 2 classes");

  std::vector<ClassDistribution> dists;
  dists.reserve(c);
  GraphBuild out;
  for (std::size_t i = 0; i < c; ++i) {
    dists.push_back(class_distribution(table, i));
    if (dists.back().empty) out.report.empty_classes.push_back(i);
  }
  if (out.report.empty_classes.size() == c)
    throw DomainError("build_attribute_graph: every class has zero attribute annotations");

  out.graph.kind = GraphKind::attribute;
  out.graph.similarity = options.similarity;
  out.graph.class_names = table.class_names;
  out.graph.edges = Matrix(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    if (dists[i].empty) continue;
    for (std::size_t j = i; j < c; ++j) {
      if (dists[j].empty) continue;
      const double js = i == j ? 0.0 : js_divergence(dists[i], dists[j]);
      const double w = options.similarity ? 1.0 - js : js;
      out.graph.edges(i, j) = w;
      out.graph.edges(j, i) = w;
    }
  }
  return out;
}

namespace {

// raw + raw^T with the diagonal counted once
Matrix symmetrize(const Matrix& raw) {
  Matrix s(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i)
    for (std::size_t j = 0; j < raw.cols(); ++j) s(i, j) = i == j ? raw(i, i) : raw(i, j) + raw(j, i);
  return s;
}

}  // namespace

GraphBuild build_relationship_graph(const RelationshipTriples& triples, PredicateMode mode) {
  if (triples.triples.empty()) throw DomainError("build_relationship_graph: no triples");
  const std::size_t c = triples.class_names.size();
  for (const auto& t : triples.triples) {
    if (t.subject >= c || t.object >= c)
      throw DomainError("build_relationship_graph: class id out of range");
  }

  Matrix sym(c, c);
  if (mode == PredicateMode::collapsed) {
    Matrix raw(c, c);
    for (const auto& t : triples.triples) raw(t.subject, t.object) += static_cast<double>(t.count);
    sym = symmetrize(raw);
  } else {
    std::size_t np = triples.predicate_names.size();
    for (const auto& t : triples.triples) np = std::max(np, t.predicate + 1);
    for (std::size_t p = 0; p < np; ++p) {
      Matrix raw(c, c);
      for (const auto& t : triples.triples)
        if (t.predicate == p) raw(t.subject, t.object) += static_cast<double>(t.count);
      Matrix s = symmetrize(raw);
      const double mass = sum(s);
      if (mass > 0.0) axpy(1.0 / mass, s, sym);
    }
  }

  GraphBuild out;
  out.graph.kind = GraphKind::relationship;
  out.graph.class_names = triples.class_names;
  out.graph.edges = Matrix(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    double total = 0.0;
    for (double v : sym.row(i)) total += v;
    if (total <= 0.0) {
      out.report.empty_classes.push_back(i);
      continue;
    }
    for (std::size_t j = 0; j < c; ++j) out.graph.edges(i, j) = sym(i, j) / total;
  }
  return out;
}

std::string encode_graph(const PriorGraph& graph) {
  if (graph.edges.rows() != graph.edges.cols() || graph.class_names.size() != graph.edges.rows()) {
    throw ShapeError("encode_graph: " + graph.edges.shape_string() + " edge matrix with " +
                     std::to_string(graph.class_names.size()) + " class names");
  }
  nlohmann::json header = {{"format", "hkrm-graph"},
                           {"version", kGraphFormatVersion},
                           {"kind", to_string(graph.kind)},
                           {"similarity", graph.similarity},
                           {"num_classes", graph.num_classes()},
                           {"class_names", graph.class_names}};
  return frame_payload(header, graph.edges.values());
}

PriorGraph decode_graph(std::string_view bytes) {
  Framed f = unframe_payload(bytes, "hkrm-graph", kGraphFormatVersion);
  PriorGraph g;
  try {
    g.kind = graph_kind_from_string(f.header.at("kind").get<std::string>());
    g.similarity = f.header.at("similarity").get<bool>();
    g.class_names = f.header.at("class_names").get<std::vector<std::string>>();
    const auto c = f.header.at("num_classes").get<std::size_t>();
    if (g.class_names.size() != c || f.payload.size() != c * c)
      throw FormatError("graph header declares " + std::to_string(c) + " classes but carries " +
                        std::to_string(g.class_names.size()) + " names and " +
                        std::to_string(f.payload.size()) + " values");
    g.edges = Matrix(c, c, std::move(f.payload));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed graph header: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  return g;
}

void save_graph(const std::filesystem::path& path, const PriorGraph& graph) {
  write_file_atomic(path, encode_graph(graph));
}

PriorGraph load_graph(const std::filesystem::path& path) { return decode_graph(read_file(path)); }

std::string graph_to_csv(const PriorGraph& graph) {
  std::string out = "class";
  for (const auto& n : graph.class_names) out += "," + n;
  out += "\n";
  char buf[32];
  for (std::size_t i = 0; i < graph.num_classes(); ++i) {
    out += graph.class_names[i];
    for (std::size_t j = 0; j < graph.num_classes(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", graph.edges(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace hkrm
