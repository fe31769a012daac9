#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hkrm/matrix.hpp"
#include "hkrm/params.hpp"

namespace hkrm {

enum class Activation { identity, relu, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected layer y = x * weight + bias, weight is in x out.
struct Linear {
  Matrix weight;
  Matrix bias;  // 1 x out
};

// Everything backward() needs from one forward pass.
struct MlpCache {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
};

struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<Matrix> bias;
  Matrix input;  // empty unless requested
};

// Stack of linear layers with ReLU between them and a configurable
// activation after the last one.
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized stack; layer_dims are output sizes.
  Mlp(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
      Activation final_activation = Activation::identity);

  // He-uniform weights (limit sqrt(6 / fan_in)), zero biases. Layer l draws
  // from derive_seed(seed, "layer", l).
  static Mlp he_uniform(std::size_t input_dim, const std::vector<std::size_t>& layer_dims,
                        Activation final_activation, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;
  Activation final_activation() const { return final_; }

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

  Matrix forward(const Matrix& input) const;
  MlpCache forward_cached(const Matrix& input) const;
  MlpGradients backward(const MlpCache& cache, const Matrix& upstream,
                        bool want_input_grad = true) const;

  // Appends "<prefix>.<l>.weight" and "<prefix>.<l>.bias" for every layer.
  void collect(ParamList& out, const std::string& prefix);
  // Appends gradients in collect() order.
  static void append(GradList& out, MlpGradients&& grads);

 private:
  void check_input(const Matrix& input) const;

  std::vector<Linear> layers_;
  Activation final_ = Activation::identity;
};

double relu(double x);

}  // namespace hkrm
