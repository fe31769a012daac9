#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hkrm/explicit_module.hpp"
#include "hkrm/matrix.hpp"
#include "hkrm/mlp.hpp"

namespace hkrm {

// Scale-invariant region geometry, one row per region:
//   (x / image_w, y / image_h, w / image_w, h / image_h, p)
// `boxes` is N x 4 holding (x, y, w, h); `fg_prob` is the foreground score.
Matrix geometry_features(const Matrix& boxes, double image_w, double image_h,
                         std::span<const double> fg_prob);

struct ImplicitConfig {
  std::size_t num_graphs = 10;
  std::vector<std::size_t> mlp_dims{5, 1};
  std::size_t embed_dim = 256;
  bool normalize = true;  // row-normalize the combined edges before propagation
  double normalize_epsilon = 0.0;
};

void validate(const ImplicitConfig& config);

struct ImplicitEdges {
  std::vector<EdgeCache> graphs;  // raw per-graph predictions
  Matrix combined;                // mean of clamped graphs + I
};

// combined = (1/M) sum_m max(0, edges_m) + I, with edges_m = predict_edges(q, predictors[m]).
ImplicitEdges implicit_edges(const Matrix& q, std::span<const Mlp> predictors);

struct ImplicitForward {
  ImplicitEdges edges;
  Matrix adjacency;   // combined, row-normalized unless disabled
  Matrix propagated;  // adjacency * f
  Matrix output;      // g' = adjacency * f * W_g
};

struct ImplicitGrads {
  std::vector<MlpGradients> predictors;
  Matrix embed;
  Matrix features;  // empty unless requested
};

// Implicit spatial branch: M edge predictors over geometry, one shared W_g.
class ImplicitBranch {
 public:
  static constexpr std::size_t kGeometryDim = 5;

  ImplicitBranch() = default;
  ImplicitBranch(std::size_t feature_dim, const ImplicitConfig& config, std::uint64_t seed);

  const ImplicitConfig& config() const { return config_; }
  std::size_t output_dim() const { return embed_.cols(); }

  std::vector<Mlp>& predictors() { return predictors_; }
  const std::vector<Mlp>& predictors() const { return predictors_; }
  Matrix& embed() { return embed_; }
  const Matrix& embed() const { return embed_; }

  ImplicitForward forward(const Matrix& q, const Matrix& f) const;
  ImplicitGrads backward(const ImplicitForward& fwd, const Matrix& q, const Matrix& f,
                         const Matrix& output_grad, bool want_feature_grad) const;

  void collect(ParamList& out, const std::string& prefix);
  static void append(GradList& out, ImplicitGrads&& grads);

 private:
  ImplicitConfig config_;
  std::vector<Mlp> predictors_;
  Matrix embed_;  // D x E_g
};

}  // namespace hkrm
