#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hkrm/matrix.hpp"
#include "hkrm/mlp.hpp"
#include "hkrm/params.hpp"
#include "hkrm/prior_graph.hpp"

namespace hkrm {

// ---------------------------------------------------------------------------
// Region-to-region edge machinery shared by the explicit and implicit modules.
// ---------------------------------------------------------------------------

// All N^2 pairwise absolute differences: row i*N + j holds |f_i - f_j|.
Matrix pairwise_l1(const Matrix& f);

// Unordered region pairs i <= j in row-major upper-triangle order. The edge
// predictor only ever sees these, which makes the predicted matrix exactly
// symmetric.
class PairIndex {
 public:
  explicit PairIndex(std::size_t num_regions);
  std::size_t num_regions() const { return n_; }
  std::size_t size() const { return pairs_.size(); }
  const std::pair<std::size_t, std::size_t>& operator[](std::size_t p) const { return pairs_[p]; }

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

// Pair-level cache of one predictor evaluated on |x_i - x_j| for all i <= j.
struct EdgeCache {
  PairIndex pairs{0};
  MlpCache mlp;
  Matrix edges;  // N x N, symmetric
};

EdgeCache predict_edges_cached(const Matrix& x, const Mlp& predictor);
// edges(i, j) = predictor(|x_i - x_j|); the diagonal is predictor(0).
Matrix predict_edges(const Matrix& x, const Mlp& predictor);

// Backpropagates dLoss/dEdges (N x N, any symmetry) into the predictor and,
// when `x_grad` is non-null, into x. The subgradient of |.| at 0 is 0.
MlpGradients predict_edges_backward(const Mlp& predictor, const EdgeCache& cache, const Matrix& x,
                                    const Matrix& edges_grad, Matrix* x_grad);

// target(i, j) = prior.edges(c_i, c_j). Throws DomainError for an
// out-of-range class id.
Matrix target_edges(std::span<const std::size_t> gt_classes, const PriorGraph& prior);

// weights(i, j) = 1 when both regions carry supervision, else 0.
Matrix supervision_weights(const std::vector<bool>& supervised);

struct EdgeLoss {
  double value = 0.0;
  Matrix grad;  // dLoss/dPredicted
};

// scale * sum_ij w_ij * 0.5 * (predicted_ij - target_ij)^2; w = 1 when
// `weights` is null.
EdgeLoss edge_loss(const Matrix& predicted, const Matrix& target, const Matrix* weights = nullptr,
                   double scale = 1.0);

// Clamps negatives to 0 (when `clamp`), then divides each row by
// (row sum + epsilon). With epsilon == 0 an all-zero row stays zero.
Matrix normalize_rows(const Matrix& raw, double epsilon = 0.0, bool clamp = true);
Matrix normalize_rows_backward(const Matrix& raw, const Matrix& normalized, const Matrix& grad,
                               double epsilon = 0.0, bool clamp = true);

// out = adj * f * weight
Matrix propagate(const Matrix& adj, const Matrix& f, const Matrix& weight);

struct PropagateGrads {
  Matrix adjacency;
  Matrix features;
  Matrix weight;
};

PropagateGrads propagate_backward(const Matrix& adj, const Matrix& f, const Matrix& weight,
                                  const Matrix& grad_out);

// ---------------------------------------------------------------------------
// Explicit knowledge branch: edge predictor + embedding W_e.
// ---------------------------------------------------------------------------

struct ExplicitConfig {
  std::vector<std::size_t> mlp_dims{256, 128, 64, 1};
  std::size_t embed_dim = 256;
  Activation final_activation = Activation::identity;
  double normalize_epsilon = 0.0;
  // Scale the edge loss by 1/N^2 instead of the plain double sum.
  bool mean_edge_loss = false;
};

void validate(const ExplicitConfig& config);

struct ExplicitForward {
  EdgeCache edges;   // raw predicted edges
  Matrix adjacency;  // normalized
  Matrix propagated; // adjacency * f
  Matrix output;     // f' = adjacency * f * W_e
};

struct ExplicitGrads {
  MlpGradients predictor;
  Matrix embed;
  Matrix features;  // empty unless requested
};

class ExplicitBranch {
 public:
  ExplicitBranch() = default;
  ExplicitBranch(std::size_t feature_dim, const ExplicitConfig& config, std::uint64_t seed);

  const ExplicitConfig& config() const { return config_; }
  std::size_t feature_dim() const { return predictor_.input_dim(); }
  std::size_t output_dim() const { return embed_.cols(); }

  Mlp& predictor() { return predictor_; }
  const Mlp& predictor() const { return predictor_; }
  Matrix& embed() { return embed_; }
  const Matrix& embed() const { return embed_; }

  ExplicitForward forward(const Matrix& f) const;

  // Edge loss against `target` with the configured scaling.
  EdgeLoss supervise(const ExplicitForward& fwd, const Matrix& target, const Matrix* weights) const;

  // `edges_grad` (may be null) is added to the gradient flowing into the raw
  // edges, typically lambda * EdgeLoss::grad.
  ExplicitGrads backward(const ExplicitForward& fwd, const Matrix& f, const Matrix& output_grad,
                         const Matrix* edges_grad, bool want_feature_grad) const;

  void collect(ParamList& out, const std::string& prefix);
  static void append(GradList& out, ExplicitGrads&& grads);

 private:
  ExplicitConfig config_;
  Mlp predictor_;
  Matrix embed_;  // D x E
};

// Glorot-uniform fill, limit sqrt(6 / (rows + cols)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace hkrm
