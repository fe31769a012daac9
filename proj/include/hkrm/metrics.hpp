#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hkrm/matrix.hpp"
#include "hkrm/model.hpp"
#include "hkrm/world.hpp"
#include "json.hpp"

namespace hkrm {

struct Tally {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  double rate() const;  // NaN when total == 0
  Tally& operator+=(const Tally& o) {
    correct += o.correct;
    total += o.total;
    return *this;
  }
};

struct PairTally {
  std::size_t a = 0;
  std::size_t b = 0;
  bool spatial = false;
  Tally tally;
};

struct EdgeTally {
  double abs_error_sum = 0.0;
  std::uint64_t count = 0;
  double mean() const;  // NaN when count == 0
};

// Sufficient statistics rather than ratios, so metrics of disjoint scene sets
// merge exactly.
struct Metrics {
  Tally overall;
  Tally rare;
  std::vector<Tally> per_class;
  std::vector<PairTally> confusable;
  EdgeTally edge_attribute;
  EdgeTally edge_relationship;
  double classification_loss_sum = 0.0;  // summed over regions

  double accuracy() const { return overall.rate(); }
  double rare_accuracy() const { return rare.rate(); }
  // Pooled accuracy over every confusable pair of the given kind.
  double confusable_accuracy(bool spatial) const;
  double mean_classification_loss() const;

  Metrics& operator+=(const Metrics& other);
};

// Mean |predicted - prior| over foreground pairs, per explicit branch.
EdgeTally edge_error(const ExplicitForward& fwd, const Scene& scene, const PriorGraph& prior);

// Throws DomainError for an empty scene set.
Metrics evaluate(const HkrmModel& model, const WorldSpec& world, std::span<const Scene> scenes);

nlohmann::json metrics_to_json(const Metrics& m, const WorldSpec& world);

// Ratio of the mean distance between class-mean embeddings of classes in the
// same group to the mean distance between classes of different groups.
// `group_of_class[c] < 0` excludes class c. Lower means tighter groups.
// Throws DomainError with fewer than two usable classes or when either
// distance set is empty (e.g. a single group).
double cluster_cohesion(const Matrix& embeddings, std::span<const std::size_t> labels,
                        std::span<const int> group_of_class);

}  // namespace hkrm
