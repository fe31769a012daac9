#include "hkrm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hkrm/error.hpp"

namespace hkrm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace

double Tally::rate() const {
  return total ? static_cast<double>(correct) / static_cast<double>(total) : kNaN;
}

double EdgeTally::mean() const { return count ? abs_error_sum / static_cast<double>(count) : kNaN; }

double Metrics::confusable_accuracy(bool spatial) const {
  Tally t;
  for (const auto& p : confusable)
    if (p.spatial == spatial) t += p.tally;
  return t.rate();
}

double Metrics::mean_classification_loss() const {
  return overall.total ? classification_loss_sum / static_cast<double>(overall.total) : kNaN;
}

Metrics& Metrics::operator+=(const Metrics& o) {
  overall += o.overall;
  rare += o.rare;
  if (per_class.size() < o.per_class.size()) per_class.resize(o.per_class.size());
  for (std::size_t c = 0; c < o.per_class.size(); ++c) per_class[c] += o.per_class[c];
  if (confusable.empty()) confusable = o.confusable;
  else
    for (std::size_t i = 0; i < std::min(confusable.size(), o.confusable.size()); ++i)
      confusable[i].tally += o.confusable[i].tally;
  edge_attribute.abs_error_sum += o.edge_attribute.abs_error_sum;
  edge_attribute.count += o.edge_attribute.count;
  edge_relationship.abs_error_sum += o.edge_relationship.abs_error_sum;
  edge_relationship.count += o.edge_relationship.count;
  classification_loss_sum += o.classification_loss_sum;
  return *this;
}

EdgeTally edge_error(const ExplicitForward& fwd, const Scene& scene, const PriorGraph& prior) {
  const Matrix target = target_edges(scene.classes, prior);
  EdgeTally t;
  const std::size_t n = scene.num_regions();
  for (std::size_t i = 0; i < n; ++i) {
    if (scene.classes[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (scene.classes[j] == 0) continue;
      t.abs_error_sum += std::abs(fwd.edges.edges(i, j) - target(i, j));
      ++t.count;
    }
  }
  return t;
}

Metrics evaluate(const HkrmModel& model, const WorldSpec& world, std::span<const Scene> scenes) {
  if (scenes.empty()) throw DomainError("evaluate: empty scene set");
  Metrics m;
  m.per_class.resize(world.num_classes());
  for (const auto& p : world.confusable_pairs) m.confusable.push_back({p.a, p.b, p.spatial, {}});
  std::vector<bool> is_rare(world.num_classes(), false);
  for (std::size_t c : world.rare_classes) is_rare[c] = true;

  for (const Scene& scene : scenes) {
    const ModelForward fwd = model.forward(scene);
    m.classification_loss_sum +=
        softmax_cross_entropy(fwd.logits, scene.classes, nullptr) * static_cast<double>(scene.num_regions());
    for (std::size_t i = 0; i < scene.num_regions(); ++i) {
      const auto row = fwd.logits.row(i);
      const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      const std::size_t gt = scene.classes[i];
      const Tally hit{pred == gt ? 1u : 0u, 1u};
      m.overall += hit;
      m.per_class.at(gt) += hit;
      if (is_rare[gt]) m.rare += hit;
      for (auto& p : m.confusable)
        if (gt == p.a || gt == p.b) p.tally += hit;
    }
    if (fwd.attribute && model.attribute_prior().num_classes()) {
      const EdgeTally t = edge_error(*fwd.attribute, scene, model.attribute_prior());
      m.edge_attribute.abs_error_sum += t.abs_error_sum;
      m.edge_attribute.count += t.count;
    }
    if (fwd.relationship && model.relationship_prior().num_classes()) {
      const EdgeTally t = edge_error(*fwd.relationship, scene, model.relationship_prior());
      m.edge_relationship.abs_error_sum += t.abs_error_sum;
      m.edge_relationship.count += t.count;
    }
  }
  return m;
}

nlohmann::json metrics_to_json(const Metrics& m, const WorldSpec& world) {
  using nlohmann::json;
  json j;
  j["regions"] = m.overall.total;
  j["accuracy"] = number_or_null(m.accuracy());
  j["rare_accuracy"] = number_or_null(m.rare_accuracy());
  j["context_pair_accuracy"] = number_or_null(m.confusable_accuracy(false));
  j["spatial_pair_accuracy"] = number_or_null(m.confusable_accuracy(true));
  j["classification_loss"] = number_or_null(m.mean_classification_loss());
  j["edge_mae_attribute"] = number_or_null(m.edge_attribute.mean());
  j["edge_mae_relationship"] = number_or_null(m.edge_relationship.mean());
  j["per_class"] = json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    j["per_class"].push_back({{"class", c < world.class_names.size() ? world.class_names[c] : std::to_string(c)},
                              {"correct", m.per_class[c].correct},
                              {"total", m.per_class[c].total},
                              {"accuracy", number_or_null(m.per_class[c].rate())}});
  }
  j["confusable_pairs"] = json::array();
  for (const auto& p : m.confusable) {
    j["confusable_pairs"].push_back({{"a", world.class_names.at(p.a)},
                                     {"b", world.class_names.at(p.b)},
                                     {"kind", p.spatial ? "spatial" : "context"},
                                     {"correct", p.tally.correct},
                                     {"total", p.tally.total},
                                     {"accuracy", number_or_null(p.tally.rate())}});
  }
  return j;
}

double cluster_cohesion(const Matrix& embeddings, std::span<const std::size_t> labels,
                        std::span<const int> group_of_class) {
  if (labels.size() != embeddings.rows()) {
    throw ShapeError("cluster_cohesion: " + std::to_string(embeddings.rows()) + " embeddings but " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t c = group_of_class.size();
  const std::size_t e = embeddings.cols();
  Matrix means(c, e);
  std::vector<std::size_t> counts(c, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t cls = labels[i];
    if (cls >= c || group_of_class[cls] < 0) continue;
    ++counts[cls];
    auto dst = means.row(cls);
    const auto src = embeddings.row(i);
    for (std::size_t k = 0; k < e; ++k) dst[k] += src[k];
  }
  std::vector<std::size_t> used;
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (!counts[cls]) continue;
    for (double& v : means.row(cls)) v /= static_cast<double>(counts[cls]);
    used.push_back(cls);
  }
  if (used.size() < 2) throw DomainError("cluster_cohesion: need at least two grouped classes present");

  double within = 0.0, between = 0.0;
  std::size_t n_within = 0, n_between = 0;
  for (std::size_t x = 0; x < used.size(); ++x) {
    for (std::size_t y = x + 1; y < used.size(); ++y) {
      const auto a = means.row(used[x]);
      const auto b = means.row(used[y]);
      double dd = 0.0;
      for (std::size_t k = 0; k < e; ++k) dd += (a[k] - b[k]) * (a[k] - b[k]);
      const double d = std::sqrt(dd);
      if (group_of_class[used[x]] == group_of_class[used[y]]) {
        within += d;
        ++n_within;
      } else {
        between += d;
        ++n_between;
      }
    }
  }
  if (n_between == 0) throw DomainError("cluster_cohesion: all classes fall in a single group");
  if (n_within == 0) throw DomainError("cluster_cohesion: no group has two classes present");
  const double mean_between = between / static_cast<double>(n_between);
  if (!(mean_between > 0.0)) throw DomainError("cluster_cohesion: all class means coincide");
  return (within / static_cast<double>(n_within)) / mean_between;
}

}  // namespace hkrm
