#include "hkrm/mlp.hpp"

#include <cmath>

#include "hkrm/error.hpp"
#include "hkrm/rng.hpp"

namespace hkrm {

GradList zeros_like(const ParamList& params) {
  GradList g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.value->rows(), p.value->cols());
  return g;
}

double squared_norm(const GradList& grads) {
  double acc = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) acc += v * v;
  return acc;
}

void accumulate(GradList& out, const GradList& g, double scale) {
  if (out.size() != g.size()) {
    throw ShapeError("accumulate: gradient lists have " + std::to_string(out.size()) + " and " +
                     std::to_string(g.size()) + " entries");
  }
  for (std::size_t i = 0; i < out.size(); ++i) axpy(scale, g[i], out[i]);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear" || s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw DomainError("unknown activation '" + s + "'");
}

namespace {

void apply_activation(Activation a, Matrix& m) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu:
      for (double& v : m.values()) v = relu(v);
      break;
    case Activation::sigmoid:
      for (double& v : m.values()) v = 1.0 / (1.0 + std::exp(-v));
      break;
  }
}

// upstream *= activation'(pre), evaluated from the pre-activation.
void activation_backward(Activation a, const Matrix& pre, Matrix& upstream) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu:
      for (std::size_t i = 0; i < pre.size(); ++i)
        if (!(pre[i] > 0.0)) upstream[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < pre.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-pre[i]));
        upstream[i] *= s * (1.0 - s);
      }
      break;
  }
}

Matrix affine(const Matrix& x, const Linear& layer) {
  Matrix y = matmul(x, layer.weight);
  const auto b = layer.bias.values();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  return y;
}

}  // namespace

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
         Activation final_activation)
    : final_(final_activation) {
  if (layer_dims.empty()) throw DomainError("mlp needs at least one layer");
  std::size_t in = input_dim;
  for (std::size_t out : layer_dims) {
    if (in == 0 || out == 0) throw DomainError("mlp layer dimensions must be positive");
    layers_.push_back({Matrix(in, out), Matrix(1, out)});
    in = out;
  }
}

Mlp Mlp::he_uniform(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
                    Activation final_activation, std::uint64_t seed) {
  Mlp mlp(input_dim, layer_dims, final_activation);
  for (std::size_t l = 0; l < mlp.layers_.size(); ++l) {
    Rng rng(derive_seed(seed, "layer", l));
    Matrix& w = mlp.layers_[l].weight;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows()));
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
  }
  return mlp;
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

void Mlp::check_input(const Matrix& input) const {
  if (input.cols() != input_dim()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(input.cols()) +
                     " columns but first layer expects " + std::to_string(input_dim()));
  }
}

Matrix Mlp::forward(const Matrix& input) const {
  check_input(input);
  Matrix x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = affine(x, layers_[l]);
    apply_activation(l + 1 == layers_.size() ? final_ : Activation::relu, x);
  }
  return x;
}

MlpCache Mlp::forward_cached(const Matrix& input) const {
  check_input(input);
  MlpCache cache;
  cache.inputs.reserve(layers_.size());
  cache.pre.reserve(layers_.size());
  Matrix x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = affine(x, layers_[l]);
    cache.inputs.push_back(std::move(x));
    x = z;
    apply_activation(l + 1 == layers_.size() ? final_ : Activation::relu, x);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(x);
  return cache;
}

MlpGradients Mlp::backward(const MlpCache& cache, const Matrix& upstream,
                           bool want_input_grad) const {
  if (cache.pre.size() != layers_.size() || cache.inputs.size() != layers_.size()) {
    throw ShapeError("mlp_backward: cache holds " + std::to_string(cache.pre.size()) +
                     " layers, network has " + std::to_string(layers_.size()));
  }
  require_same_shape(upstream, cache.output, "mlp_backward upstream");

  MlpGradients g;
  g.weight.resize(layers_.size());
  g.bias.resize(layers_.size());
  Matrix delta = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    activation_backward(l + 1 == layers_.size() ? final_ : Activation::relu, cache.pre[l], delta);
    g.weight[l] = matmul_tn(cache.inputs[l], delta);
    g.bias[l] = Matrix(1, delta.cols(), column_sums(delta));
    if (l > 0 || want_input_grad) delta = matmul_nt(delta, layers_[l].weight);
  }
  if (want_input_grad) g.input = std::move(delta);
  return g;
}

void Mlp::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back({prefix + "." + std::to_string(l) + ".weight", &layers_[l].weight});
    out.push_back({prefix + "." + std::to_string(l) + ".bias", &layers_[l].bias});
  }
}

void Mlp::append(GradList& out, MlpGradients&& grads) {
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    out.push_back(std::move(grads.weight[l]));
    out.push_back(std::move(grads.bias[l]));
  }
}

}  // namespace hkrm
