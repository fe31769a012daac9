#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hkrm/explicit_module.hpp"
#include "hkrm/implicit_module.hpp"
#include "hkrm/params.hpp"
#include "hkrm/prior_graph.hpp"
#include "hkrm/world.hpp"

namespace hkrm {

struct BranchSet {
  bool attribute = false;
  bool relationship = false;
  bool spatial = false;

  bool any() const { return attribute || relationship || spatial; }
  bool operator==(const BranchSet&) const = default;
};

// "baseline" | "attr" | "rel" | "spatial" | "all", or a "+"-joined subset such as "attr+rel"
BranchSet branches_for_ablation(const std::string& name);
std::string ablation_name(const BranchSet& b);

struct ModelConfig {
  BranchSet branches;
  ExplicitConfig explicit_branch;  // shared by attribute and relationship branches
  ImplicitConfig implicit_branch;
  double edge_loss_weight = 1.0;   // lambda on the summed edge losses
};

// Per-scene forward state of the composed model.
struct ModelForward {
  Matrix geometry;  // q, only when the spatial branch ran
  std::optional<ExplicitForward> attribute;
  std::optional<ExplicitForward> relationship;
  std::optional<ImplicitForward> spatial;
  Matrix logits;  // N x C
};

struct SceneLoss {
  double total = 0.0;
  double classification = 0.0;
  double edge_attribute = 0.0;
  double edge_relationship = 0.0;
  std::size_t correct = 0;
  std::size_t regions = 0;
};

// Composed classifier: logits = [f | f'_a | f'_r | g'] * H + b, where H is
// stored as one block per input segment so a disabled branch simply has no
// block. Priors supply the explicit-branch edge targets.
class HkrmModel {
 public:
  HkrmModel() = default;
  HkrmModel(std::size_t feature_dim, std::size_t num_classes, const ModelConfig& config,
            std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t feature_dim() const { return head_features_.rows(); }
  std::size_t num_classes() const { return head_bias_.cols(); }

  void set_priors(PriorGraph attribute, PriorGraph relationship);
  const PriorGraph& attribute_prior() const { return attribute_prior_; }
  const PriorGraph& relationship_prior() const { return relationship_prior_; }

  ExplicitBranch& attribute_branch() { return attribute_; }
  ExplicitBranch& relationship_branch() { return relationship_; }
  ImplicitBranch& spatial_branch() { return spatial_; }
  const ExplicitBranch& attribute_branch() const { return attribute_; }
  const ExplicitBranch& relationship_branch() const { return relationship_; }
  const ImplicitBranch& spatial_branch() const { return spatial_; }

  // `active` restricts which enabled branches run; inactive ones contribute
  // zero to the logits (phase one of the two-phase schedule).
  ModelForward forward(const Scene& scene, std::optional<BranchSet> active = std::nullopt) const;

  // Mean softmax cross-entropy over regions plus lambda times the explicit
  // edge losses (foreground-only supervision). When `grads` is non-null it
  // receives gradients aligned with parameters().
  SceneLoss loss(const Scene& scene, GradList* grads, std::optional<BranchSet> active = std::nullopt) const;

  // Same as loss() but also returns dLoss/dFeatures (used by gradient checks).
  SceneLoss loss_with_feature_grad(const Scene& scene, GradList* grads, Matrix* feature_grad) const;

  ParamList parameters();
  // Which tensors belong to the baseline (head on f, bias).
  std::vector<bool> baseline_mask();

 private:
  SceneLoss loss_impl(const Scene& scene, GradList* grads, Matrix* feature_grad,
                      std::optional<BranchSet> active) const;

  ModelConfig config_;
  ExplicitBranch attribute_;
  ExplicitBranch relationship_;
  ImplicitBranch spatial_;
  Matrix head_features_;      // D x C
  Matrix head_attribute_;     // E_a x C
  Matrix head_relationship_;  // E_r x C
  Matrix head_spatial_;       // E_g x C
  Matrix head_bias_;          // 1 x C
  PriorGraph attribute_prior_;
  PriorGraph relationship_prior_;
};

// Supervision mask: regions with a foreground ground-truth class.
std::vector<bool> foreground_mask(const Scene& scene);

// Row-wise softmax cross-entropy, averaged over rows; `grad` receives dLoss/dLogits.
double softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels, Matrix* grad);

}  // namespace hkrm
