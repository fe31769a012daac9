#pragma once

#include <span>

#include "hkrm/params.hpp"

namespace hkrm {

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// Classical momentum with L2 weight decay folded into the gradient:
//   v <- momentum * v - lr * (grad + weight_decay * param)
//   param <- param + v
class SgdMomentum {
 public:
  SgdMomentum(const SgdConfig& config, const ParamList& params);

  // `trainable`, when non-empty, masks which tensors are updated; frozen
  // tensors keep both their value and their velocity. Throws NumericError
  // naming the tensor and entry on the first non-finite gradient, before any
  // parameter is touched.
  void step(const ParamList& params, const GradList& grads, std::span<const bool> trainable = {});

  const SgdConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const GradList& velocity() const { return velocity_; }

 private:
  SgdConfig config_;
  GradList velocity_;
};

}  // namespace hkrm
