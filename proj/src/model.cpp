#include "hkrm/model.hpp"

#include <algorithm>
#include <cmath>

#include "hkrm/error.hpp"
#include "hkrm/rng.hpp"

namespace hkrm {

BranchSet branches_for_ablation(const std::string& name) {
  if (name == "baseline") return {};
  if (name == "attr") return {true, false, false};
  if (name == "rel") return {false, true, false};
  if (name == "spatial") return {false, false, true};
  if (name == "all") return {true, true, true};
  // "+"-joined subsets such as "attr+rel"
  BranchSet b;
  std::size_t start = 0;
  while (start <= name.size()) {
    const std::size_t end = std::min(name.find('+', start), name.size());
    const std::string part = name.substr(start, end - start);
    if (part == "attr" && !b.attribute) b.attribute = true;
    else if (part == "rel" && !b.relationship) b.relationship = true;
    else if (part == "spatial" && !b.spatial) b.spatial = true;
    else throw DomainError("unknown ablation '" + name + "' (expected baseline|attr|rel|spatial|all)");
    start = end + 1;
  }
  return b;
}

std::string ablation_name(const BranchSet& b) {
  if (b == BranchSet{}) return "baseline";
  if (b == BranchSet{true, false, false}) return "attr";
  if (b == BranchSet{false, true, false}) return "rel";
  if (b == BranchSet{false, false, true}) return "spatial";
  if (b == BranchSet{true, true, true}) return "all";
  std::string s;
  if (b.attribute) s += "attr+";
  if (b.relationship) s += "rel+";
  if (b.spatial) s += "spatial+";
  s.pop_back();
  return s;
}

std::vector<bool> foreground_mask(const Scene& scene) {
  std::vector<bool> m(scene.num_regions());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = scene.classes[i] != 0;
  return m;
}

double softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels, Matrix* grad) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(logits.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (grad) *grad = Matrix(n, c);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    if (labels[i] >= c) throw DomainError("softmax_cross_entropy: label out of range");
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    const double log_denom = std::log(denom);
    loss -= (z[labels[i]] - zmax - log_denom);
    if (grad) {
      auto g = grad->row(i);
      for (std::size_t k = 0; k < c; ++k) g[k] = std::exp(z[k] - zmax - log_denom) * inv_n;
      g[labels[i]] -= inv_n;
    }
  }
  return loss * inv_n;
}

HkrmModel::HkrmModel(std::size_t feature_dim, std::size_t num_classes, const ModelConfig& config,
                     std::uint64_t seed)
    : config_(config) {
  if (feature_dim == 0 || num_classes < 2) throw DomainError("model: need D >= 1 and C >= 2");
  if (config.branches.attribute)
    attribute_ = ExplicitBranch(feature_dim, config.explicit_branch, derive_seed(seed, "attribute"));
  if (config.branches.relationship)
    relationship_ = ExplicitBranch(feature_dim, config.explicit_branch, derive_seed(seed, "relationship"));
  if (config.branches.spatial)
    spatial_ = ImplicitBranch(feature_dim, config.implicit_branch, derive_seed(seed, "spatial"));
  head_features_ = glorot_uniform(feature_dim, num_classes, derive_seed(seed, "head.features"));
  if (config.branches.attribute)
    head_attribute_ = glorot_uniform(config.explicit_branch.embed_dim, num_classes,
                                     derive_seed(seed, "head.attribute"));
  if (config.branches.relationship)
    head_relationship_ = glorot_uniform(config.explicit_branch.embed_dim, num_classes,
                                        derive_seed(seed, "head.relationship"));
  if (config.branches.spatial)
    head_spatial_ = glorot_uniform(config.implicit_branch.embed_dim, num_classes,
                                   derive_seed(seed, "head.spatial"));
  head_bias_ = Matrix(1, num_classes);
}

void HkrmModel::set_priors(PriorGraph attribute, PriorGraph relationship) {
  attribute_prior_ = std::move(attribute);
  relationship_prior_ = std::move(relationship);
}

ParamList HkrmModel::parameters() {
  ParamList p;
  if (config_.branches.attribute) attribute_.collect(p, "attribute");
  if (config_.branches.relationship) relationship_.collect(p, "relationship");
  if (config_.branches.spatial) spatial_.collect(p, "spatial");
  p.push_back({"head.features", &head_features_});
  if (config_.branches.attribute) p.push_back({"head.attribute", &head_attribute_});
  if (config_.branches.relationship) p.push_back({"head.relationship", &head_relationship_});
  if (config_.branches.spatial) p.push_back({"head.spatial", &head_spatial_});
  p.push_back({"head.bias", &head_bias_});
  return p;
}

std::vector<bool> HkrmModel::baseline_mask() {
  const ParamList p = parameters();
  std::vector<bool> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = p[i].name == "head.features" || p[i].name == "head.bias";
  return m;
}

ModelForward HkrmModel::forward(const Scene& scene, std::optional<BranchSet> active) const {
  const Matrix& f = scene.features;
  if (f.cols() != feature_dim()) {
    throw ShapeError("forward_model: scene features have " + std::to_string(f.cols()) +
                     " columns, model expects " + std::to_string(feature_dim()));
  }
  if (f.rows() != scene.num_regions()) throw ShapeError("forward_model: feature rows != region count");
  BranchSet run = config_.branches;
  if (active) {
    run.attribute = run.attribute && active->attribute;
    run.relationship = run.relationship && active->relationship;
    run.spatial = run.spatial && active->spatial;
  }

  ModelForward out;
  out.logits = matmul(f, head_features_);
  if (run.attribute) {
    out.attribute = attribute_.forward(f);
    out.logits += matmul(out.attribute->output, head_attribute_);
  }
  if (run.relationship) {
    out.relationship = relationship_.forward(f);
    out.logits += matmul(out.relationship->output, head_relationship_);
  }
  if (run.spatial) {
    out.geometry = geometry_features(scene.boxes, scene.image_w, scene.image_h, scene.fg_prob);
    out.spatial = spatial_.forward(out.geometry, f);
    out.logits += matmul(out.spatial->output, head_spatial_);
  }
  for (std::size_t i = 0; i < out.logits.rows(); ++i) {
    auto row = out.logits.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += head_bias_[k];
  }
  return out;
}

SceneLoss HkrmModel::loss(const Scene& scene, GradList* grads, std::optional<BranchSet> active) const {
  return loss_impl(scene, grads, nullptr, active);
}

SceneLoss HkrmModel::loss_with_feature_grad(const Scene& scene, GradList* grads,
                                            Matrix* feature_grad) const {
  return loss_impl(scene, grads, feature_grad, std::nullopt);
}

namespace {

void append_zero_explicit(GradList& out, const ExplicitBranch& b) {
  for (const auto& l : b.predictor().layers()) {
    out.emplace_back(l.weight.rows(), l.weight.cols());
    out.emplace_back(l.bias.rows(), l.bias.cols());
  }
  out.emplace_back(b.embed().rows(), b.embed().cols());
}

void append_zero_implicit(GradList& out, const ImplicitBranch& b) {
  for (const auto& p : b.predictors())
    for (const auto& l : p.layers()) {
      out.emplace_back(l.weight.rows(), l.weight.cols());
      out.emplace_back(l.bias.rows(), l.bias.cols());
    }
  out.emplace_back(b.embed().rows(), b.embed().cols());
}

}  // namespace

SceneLoss HkrmModel::loss_impl(const Scene& scene, GradList* grads, Matrix* feature_grad,
                               std::optional<BranchSet> active) const {
  const ModelForward fwd = forward(scene, active);
  const Matrix& f = scene.features;
  const bool need_grad = grads != nullptr || feature_grad != nullptr;

  SceneLoss out;
  out.regions = scene.num_regions();
  Matrix d_logits;
  out.classification = softmax_cross_entropy(fwd.logits, scene.classes, need_grad ? &d_logits : nullptr);
  for (std::size_t i = 0; i < out.regions; ++i) {
    const auto row = fwd.logits.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == scene.classes[i]) ++out.correct;
  }

  const std::vector<bool> fg = foreground_mask(scene);
  const Matrix weights = supervision_weights(fg);
  const double lambda = config_.edge_loss_weight;
  std::optional<EdgeLoss> attr_loss, rel_loss;
  if (fwd.attribute) {
    if (attribute_prior_.num_classes() == 0) throw DomainError("model: attribute branch has no prior graph");
    attr_loss = attribute_.supervise(*fwd.attribute, target_edges(scene.classes, attribute_prior_), &weights);
    out.edge_attribute = attr_loss->value;
    attr_loss->grad *= lambda;
  }
  if (fwd.relationship) {
    if (relationship_prior_.num_classes() == 0)
      throw DomainError("model: relationship branch has no prior graph");
    rel_loss = relationship_.supervise(*fwd.relationship, target_edges(scene.classes, relationship_prior_),
                                       &weights);
    out.edge_relationship = rel_loss->value;
    rel_loss->grad *= lambda;
  }
  out.total = out.classification + lambda * (out.edge_attribute + out.edge_relationship);
  if (!need_grad) return out;

  const bool want_f = feature_grad != nullptr;
  Matrix d_features;
  if (want_f) d_features = matmul_nt(d_logits, head_features_);

  GradList g;
  std::optional<Matrix> g_head_attr, g_head_rel, g_head_spatial;
  if (config_.branches.attribute) {
    if (fwd.attribute) {
      g_head_attr = matmul_tn(fwd.attribute->output, d_logits);
      ExplicitGrads bg = attribute_.backward(*fwd.attribute, f, matmul_nt(d_logits, head_attribute_),
                                             &attr_loss->grad, want_f);
      if (want_f) d_features += bg.features;
      ExplicitBranch::append(g, std::move(bg));
    } else {
      g_head_attr = Matrix(head_attribute_.rows(), head_attribute_.cols());
      append_zero_explicit(g, attribute_);
    }
  }
  if (config_.branches.relationship) {
    if (fwd.relationship) {
      g_head_rel = matmul_tn(fwd.relationship->output, d_logits);
      ExplicitGrads bg = relationship_.backward(*fwd.relationship, f,
                                                matmul_nt(d_logits, head_relationship_), &rel_loss->grad, want_f);
      if (want_f) d_features += bg.features;
      ExplicitBranch::append(g, std::move(bg));
    } else {
      g_head_rel = Matrix(head_relationship_.rows(), head_relationship_.cols());
      append_zero_explicit(g, relationship_);
    }
  }
  if (config_.branches.spatial) {
    if (fwd.spatial) {
      g_head_spatial = matmul_tn(fwd.spatial->output, d_logits);
      ImplicitGrads bg = spatial_.backward(*fwd.spatial, fwd.geometry, f, matmul_nt(d_logits, head_spatial_), want_f);
      if (want_f) d_features += bg.features;
      ImplicitBranch::append(g, std::move(bg));
    } else {
      g_head_spatial = Matrix(head_spatial_.rows(), head_spatial_.cols());
      append_zero_implicit(g, spatial_);
    }
  }
  g.push_back(matmul_tn(f, d_logits));
  if (g_head_attr) g.push_back(std::move(*g_head_attr));
  if (g_head_rel) g.push_back(std::move(*g_head_rel));
  if (g_head_spatial) g.push_back(std::move(*g_head_spatial));
  g.emplace_back(1, d_logits.cols(), column_sums(d_logits));

  if (grads) *grads = std::move(g);
  if (feature_grad) *feature_grad = std::move(d_features);
  return out;
}

}  // namespace hkrm
