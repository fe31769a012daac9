#include "hkrm/implicit_module.hpp"

#include "hkrm/error.hpp"
#include "hkrm/rng.hpp"

namespace hkrm {

Matrix geometry_features(const Matrix& boxes, double image_w, double image_h,
                         std::span<const double> fg_prob) {
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw DomainError("geometry_features: image size must be positive, got " +
                      std::to_string(image_w) + "x" + std::to_string(image_h));
  }
  if (boxes.cols() != 4) throw ShapeError("geometry_features: boxes must be N x 4, got " + boxes.shape_string());
  if (fg_prob.size() != boxes.rows()) {
    throw ShapeError("geometry_features: " + std::to_string(boxes.rows()) + " boxes but " +
                     std::to_string(fg_prob.size()) + " foreground scores");
  }
  Matrix q(boxes.rows(), ImplicitBranch::kGeometryDim);
  for (std::size_t i = 0; i < boxes.rows(); ++i) {
    q(i, 0) = boxes(i, 0) / image_w;
    q(i, 1) = boxes(i, 1) / image_h;
    q(i, 2) = boxes(i, 2) / image_w;
    q(i, 3) = boxes(i, 3) / image_h;
    q(i, 4) = fg_prob[i];
  }
  return q;
}

void validate(const ImplicitConfig& config) {
  if (config.num_graphs == 0) throw DomainError("implicit module: num_graphs must be >= 1");
  if (config.mlp_dims.empty() || config.mlp_dims.back() != 1)
    throw DomainError("implicit module: last edge-MLP dimension must be 1");
  for (std::size_t d : config.mlp_dims)
    if (d == 0) throw DomainError("implicit module: edge-MLP dimensions must be positive");
  if (config.embed_dim == 0) throw DomainError("implicit module: embed_dim must be >= 1");
  if (!(config.normalize_epsilon >= 0.0))
    throw DomainError("implicit module: normalize epsilon must be >= 0");
}

ImplicitEdges implicit_edges(const Matrix& q, std::span<const Mlp> predictors) {
  if (predictors.empty()) throw DomainError("implicit_edges: need at least one graph (M = 0)");
  ImplicitEdges out;
  const std::size_t n = q.rows();
  out.combined = Matrix(n, n);
  out.graphs.reserve(predictors.size());
  for (const Mlp& p : predictors) {
    out.graphs.push_back(predict_edges_cached(q, p));
    const Matrix& e = out.graphs.back().edges;
    for (std::size_t i = 0; i < e.size(); ++i) out.combined[i] += relu(e[i]);
  }
  const double inv_m = 1.0 / static_cast<double>(predictors.size());
  out.combined *= inv_m;
  for (std::size_t i = 0; i < n; ++i) out.combined(i, i) += 1.0;
  return out;
}

ImplicitBranch::ImplicitBranch(std::size_t feature_dim, const ImplicitConfig& config,
                               std::uint64_t seed)
    : config_(config) {
  validate(config);
  predictors_.reserve(config.num_graphs);
  for (std::size_t m = 0; m < config.num_graphs; ++m) {
    predictors_.push_back(Mlp::he_uniform(kGeometryDim, config.mlp_dims, Activation::identity,
                                          derive_seed(seed, "graph", m)));
  }
  embed_ = glorot_uniform(feature_dim, config.embed_dim, derive_seed(seed, "embed"));
}

ImplicitForward ImplicitBranch::forward(const Matrix& q, const Matrix& f) const {
  if (q.rows() != f.rows()) {
    throw ShapeError("implicit forward: " + std::to_string(q.rows()) + " geometry rows vs " +
                     std::to_string(f.rows()) + " feature rows");
  }
  ImplicitForward out;
  out.edges = implicit_edges(q, predictors_);
  out.adjacency = config_.normalize
                      ? normalize_rows(out.edges.combined, config_.normalize_epsilon, false)
                      : out.edges.combined;
  out.propagated = matmul(out.adjacency, f);
  out.output = matmul(out.propagated, embed_);
  return out;
}

ImplicitGrads ImplicitBranch::backward(const ImplicitForward& fwd, const Matrix& q, const Matrix& f,
                                       const Matrix& output_grad, bool want_feature_grad) const {
  require_same_shape(output_grad, fwd.output, "implicit backward");
  ImplicitGrads g;
  g.embed = matmul_tn(fwd.propagated, output_grad);
  const Matrix d_prop = matmul_nt(output_grad, embed_);
  const Matrix d_adj = matmul_nt(d_prop, f);
  const Matrix d_combined =
      config_.normalize ? normalize_rows_backward(fwd.edges.combined, fwd.adjacency, d_adj,
                                                  config_.normalize_epsilon, false)
                        : d_adj;
  const double inv_m = 1.0 / static_cast<double>(predictors_.size());
  g.predictors.reserve(predictors_.size());
  for (std::size_t m = 0; m < predictors_.size(); ++m) {
    const Matrix& e = fwd.edges.graphs[m].edges;
    Matrix d_e(e.rows(), e.cols());
    for (std::size_t i = 0; i < e.size(); ++i) d_e[i] = e[i] > 0.0 ? inv_m * d_combined[i] : 0.0;
    g.predictors.push_back(predict_edges_backward(predictors_[m], fwd.edges.graphs[m], q, d_e, nullptr));
  }
  if (want_feature_grad) g.features = matmul_tn(fwd.adjacency, d_prop);
  return g;
}

void ImplicitBranch::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t m = 0; m < predictors_.size(); ++m)
    predictors_[m].collect(out, prefix + ".graph" + std::to_string(m));
  out.push_back({prefix + ".embed", &embed_});
}

void ImplicitBranch::append(GradList& out, ImplicitGrads&& grads) {
  for (auto& p : grads.predictors) Mlp::append(out, std::move(p));
  out.push_back(std::move(grads.embed));
}

}  // namespace hkrm
