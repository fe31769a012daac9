#include "hkrm/sgd.hpp"

#include <cmath>
#include <sstream>

#include "hkrm/error.hpp"

namespace hkrm {

SgdMomentum::SgdMomentum(const SgdConfig& config, const ParamList& params)
    : config_(config), velocity_(zeros_like(params)) {
  if (!(config.learning_rate >= 0.0)) throw DomainError("sgd: learning rate must be >= 0");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0))
    throw DomainError("sgd: momentum must lie in [0, 1)");
  if (!(config.weight_decay >= 0.0)) throw DomainError("sgd: weight decay must be >= 0");
}

void SgdMomentum::step(const ParamList& params, const GradList& grads,
                       std::span<const bool> trainable) {
  if (params.size() != grads.size() || params.size() != velocity_.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(velocity_.size()) + " velocity buffers");
  }
  if (!trainable.empty() && trainable.size() != params.size())
    throw ShapeError("sgd_step: trainable mask size mismatch");

  for (std::size_t t = 0; t < params.size(); ++t) {
    require_same_shape(*params[t].value, grads[t], "sgd_step");
    require_same_shape(velocity_[t], grads[t], "sgd_step velocity");
    const auto g = grads[t].values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "sgd_step: non-finite gradient in '" << params[t].name << "' at entry " << i
            << " (value " << g[i] << ")";
        throw NumericError(msg.str());
      }
    }
  }

  const double lr = config_.learning_rate;
  const double mu = config_.momentum;
  const double wd = config_.weight_decay;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!trainable.empty() && !trainable[t]) continue;
    auto p = params[t].value->values();
    auto v = velocity_[t].values();
    const auto g = grads[t].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] - lr * (g[i] + wd * p[i]);
      p[i] += v[i];
    }
  }
}

}  // namespace hkrm
