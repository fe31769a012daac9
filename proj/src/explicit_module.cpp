#include "hkrm/explicit_module.hpp"

#include <cmath>

#include "hkrm/error.hpp"
#include "hkrm/rng.hpp"

namespace hkrm {

Matrix pairwise_l1(const Matrix& f) {
  const std::size_t n = f.rows();
  const std::size_t d = f.cols();
  Matrix out(n * n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi = f.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto fj = f.row(j);
      auto o = out.row(i * n + j);
      for (std::size_t k = 0; k < d; ++k) o[k] = std::abs(fi[k] - fj[k]);
    }
  }
  return out;
}

PairIndex::PairIndex(std::size_t num_regions) : n_(num_regions) {
  pairs_.reserve(n_ * (n_ + 1) / 2);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i; j < n_; ++j) pairs_.emplace_back(i, j);
}

namespace {

Matrix unique_pair_l1(const Matrix& x, const PairIndex& pairs) {
  const std::size_t d = x.cols();
  Matrix out(pairs.size(), d);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    const auto xi = x.row(i);
    const auto xj = x.row(j);
    auto o = out.row(p);
    for (std::size_t k = 0; k < d; ++k) o[k] = std::abs(xi[k] - xj[k]);
  }
  return out;
}

}  // namespace

EdgeCache predict_edges_cached(const Matrix& x, const Mlp& predictor) {
  if (x.rows() == 0) throw DomainError("predict_edges: need at least one region");
  if (x.cols() != predictor.input_dim()) {
    throw ShapeError("predict_edges: features have " + std::to_string(x.cols()) +
                     " columns, predictor expects " + std::to_string(predictor.input_dim()));
  }
  if (predictor.output_dim() != 1) throw ShapeError("predict_edges: predictor must output 1 value");
  EdgeCache cache;
  cache.pairs = PairIndex(x.rows());
  cache.mlp = predictor.forward_cached(unique_pair_l1(x, cache.pairs));
  const std::size_t n = x.rows();
  cache.edges = Matrix(n, n);
  for (std::size_t p = 0; p < cache.pairs.size(); ++p) {
    const auto [i, j] = cache.pairs[p];
    cache.edges(i, j) = cache.mlp.output[p];
    cache.edges(j, i) = cache.mlp.output[p];
  }
  return cache;
}

Matrix predict_edges(const Matrix& x, const Mlp& predictor) {
  return predict_edges_cached(x, predictor).edges;
}

MlpGradients predict_edges_backward(const Mlp& predictor, const EdgeCache& cache, const Matrix& x,
                                    const Matrix& edges_grad, Matrix* x_grad) {
  require_same_shape(edges_grad, cache.edges, "predict_edges_backward");
  Matrix pair_grad(cache.pairs.size(), 1);
  for (std::size_t p = 0; p < cache.pairs.size(); ++p) {
    const auto [i, j] = cache.pairs[p];
    pair_grad[p] = i == j ? edges_grad(i, i) : edges_grad(i, j) + edges_grad(j, i);
  }
  MlpGradients g = predictor.backward(cache.mlp, pair_grad, x_grad != nullptr);
  if (x_grad) {
    *x_grad = Matrix(x.rows(), x.cols());
    for (std::size_t p = 0; p < cache.pairs.size(); ++p) {
      const auto [i, j] = cache.pairs[p];
      if (i == j) continue;
      const auto gp = g.input.row(p);
      const auto xi = x.row(i);
      const auto xj = x.row(j);
      auto gi = x_grad->row(i);
      auto gj = x_grad->row(j);
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double diff = xi[k] - xj[k];
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        gi[k] += s * gp[k];
        gj[k] -= s * gp[k];
      }
    }
    g.input = Matrix();
  }
  return g;
}

Matrix target_edges(std::span<const std::size_t> gt_classes, const PriorGraph& prior) {
  const std::size_t c = prior.num_classes();
  for (std::size_t cls : gt_classes) {
    if (cls >= c) {
      throw DomainError("target_edges: class id " + std::to_string(cls) + " outside prior graph of " +
                        std::to_string(c) + " classes");
    }
  }
  const std::size_t n = gt_classes.size();
  Matrix t(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t(i, j) = prior.edges(gt_classes[i], gt_classes[j]);
  return t;
}

Matrix supervision_weights(const std::vector<bool>& supervised) {
  const std::size_t n = supervised.size();
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = supervised[i] && supervised[j] ? 1.0 : 0.0;
  return w;
}

EdgeLoss edge_loss(const Matrix& predicted, const Matrix& target, const Matrix* weights,
                   double scale) {
  require_same_shape(predicted, target, "edge_loss");
  if (weights) require_same_shape(predicted, *weights, "edge_loss weights");
  EdgeLoss out;
  out.grad = Matrix(predicted.rows(), predicted.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    const double diff = predicted[i] - target[i];
    acc += w * 0.5 * diff * diff;
    out.grad[i] = scale * w * diff;
  }
  out.value = scale * acc;
  return out;
}

Matrix normalize_rows(const Matrix& raw, double epsilon, bool clamp) {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto r = raw.row(i);
    auto o = out.row(i);
    double total = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      o[j] = clamp ? relu(r[j]) : r[j];
      total += o[j];
    }
    const double denom = total + epsilon;
    if (denom == 0.0) continue;
    for (double& v : o) v /= denom;
  }
  return out;
}

Matrix normalize_rows_backward(const Matrix& raw, const Matrix& normalized, const Matrix& grad,
                               double epsilon, bool clamp) {
  require_same_shape(raw, grad, "normalize_rows_backward");
  require_same_shape(normalized, grad, "normalize_rows_backward");
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto r = raw.row(i);
    const auto a = normalized.row(i);
    const auto g = grad.row(i);
    double total = 0.0;
    for (double v : r) total += clamp ? relu(v) : v;
    const double denom = total + epsilon;
    if (denom == 0.0) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) dot += g[j] * a[j];
    auto o = out.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (clamp && !(r[k] > 0.0)) continue;
      o[k] = (g[k] - dot) / denom;
    }
  }
  return out;
}

Matrix propagate(const Matrix& adj, const Matrix& f, const Matrix& weight) {
  if (adj.rows() != adj.cols() || adj.cols() != f.rows() || f.cols() != weight.rows()) {
    throw ShapeError("propagate: shapes do not chain, adjacency " + adj.shape_string() +
                     ", features " + f.shape_string() + ", weight " + weight.shape_string());
  }
  return matmul(matmul(adj, f), weight);
}

PropagateGrads propagate_backward(const Matrix& adj, const Matrix& f, const Matrix& weight,
                                  const Matrix& grad_out) {
  if (grad_out.rows() != adj.rows() || grad_out.cols() != weight.cols())
    throw ShapeError("propagate_backward: upstream gradient " + grad_out.shape_string());
  PropagateGrads g;
  const Matrix af = matmul(adj, f);
  g.weight = matmul_tn(af, grad_out);
  const Matrix d_af = matmul_nt(grad_out, weight);
  g.adjacency = matmul_nt(d_af, f);
  g.features = matmul_tn(adj, d_af);
  return g;
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

void validate(const ExplicitConfig& config) {
  if (config.mlp_dims.empty() || config.mlp_dims.back() != 1)
    throw DomainError("explicit module: last edge-MLP dimension must be 1");
  for (std::size_t d : config.mlp_dims)
    if (d == 0) throw DomainError("explicit module: edge-MLP dimensions must be positive");
  if (config.embed_dim == 0) throw DomainError("explicit module: embed_dim must be >= 1");
  if (!(config.normalize_epsilon >= 0.0))
    throw DomainError("explicit module: normalize epsilon must be >= 0");
}

ExplicitBranch::ExplicitBranch(std::size_t feature_dim, const ExplicitConfig& config,
                               std::uint64_t seed)
    : config_(config) {
  validate(config);
  predictor_ = Mlp::he_uniform(feature_dim, config.mlp_dims, config.final_activation,
                               derive_seed(seed, "edge_mlp"));
  embed_ = glorot_uniform(feature_dim, config.embed_dim, derive_seed(seed, "embed"));
}

ExplicitForward ExplicitBranch::forward(const Matrix& f) const {
  ExplicitForward out;
  out.edges = predict_edges_cached(f, predictor_);
  out.adjacency = normalize_rows(out.edges.edges, config_.normalize_epsilon, true);
  out.propagated = matmul(out.adjacency, f);
  out.output = matmul(out.propagated, embed_);
  return out;
}

EdgeLoss ExplicitBranch::supervise(const ExplicitForward& fwd, const Matrix& target,
                                   const Matrix* weights) const {
  const double n = static_cast<double>(fwd.edges.edges.rows());
  return edge_loss(fwd.edges.edges, target, weights, config_.mean_edge_loss ? 1.0 / (n * n) : 1.0);
}

ExplicitGrads ExplicitBranch::backward(const ExplicitForward& fwd, const Matrix& f,
                                       const Matrix& output_grad, const Matrix* edges_grad,
                                       bool want_feature_grad) const {
  require_same_shape(output_grad, fwd.output, "explicit backward");
  ExplicitGrads g;
  g.embed = matmul_tn(fwd.propagated, output_grad);
  const Matrix d_prop = matmul_nt(output_grad, embed_);
  const Matrix d_adj = matmul_nt(d_prop, f);
  Matrix d_edges = normalize_rows_backward(fwd.edges.edges, fwd.adjacency, d_adj,
                                           config_.normalize_epsilon, true);
  if (edges_grad) d_edges += *edges_grad;
  Matrix x_grad;
  g.predictor = predict_edges_backward(predictor_, fwd.edges, f, d_edges,
                                       want_feature_grad ? &x_grad : nullptr);
  if (want_feature_grad) {
    g.features = matmul_tn(fwd.adjacency, d_prop);
    g.features += x_grad;
  }
  return g;
}

void ExplicitBranch::collect(ParamList& out, const std::string& prefix) {
  predictor_.collect(out, prefix + ".edge_mlp");
  out.push_back({prefix + ".embed", &embed_});
}

void ExplicitBranch::append(GradList& out, ExplicitGrads&& grads) {
  Mlp::append(out, std::move(grads.predictor));
  out.push_back(std::move(grads.embed));
}

}  // namespace hkrm
