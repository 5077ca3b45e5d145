#include "graphaf/adam.hpp"

#include <cmath>

#include "graphaf/error.hpp"

namespace graphaf {

AdamState::AdamState(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr >= 0.0)) throw UsageError("Adam learning rate must be non-negative");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw UsageError("Adam betas must lie in [0, 1)");
  }
  for (const auto& p : store) {
    m_.emplace_back(p.value.shape(), 0.0);
    v_.emplace_back(p.value.shape(), 0.0);
  }
}

void adam_step(ParamStore& store, std::span<const Tensor> grads, AdamState& state, double lr_scale) {
  if (grads.size() != store.size() || state.m_.size() != store.size()) {
    throw ShapeError("adam_step: gradient count does not match parameter count");
  }
  for (std::size_t k = 0; k < store.size(); ++k) {
    if (!store[k].trainable) continue;
    if (!grads[k].same_shape(store[k].value)) {
      throw ShapeError("adam_step: gradient shape " + grads[k].shape_string() + " vs parameter " +
                       store[k].name + " " + store[k].value.shape_string());
    }
    if (!grads[k].all_finite()) throw NumericalError("non-finite gradient for parameter " + store[k].name);
  }
  const auto& cfg = state.cfg_;
  ++state.steps_;
  const double t = static_cast<double>(state.steps_);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const double lr = cfg.lr * lr_scale;
  for (std::size_t k = 0; k < store.size(); ++k) {
    if (!store[k].trainable) continue;
    auto& theta = store[k].value;
    auto& m = state.m_[k];
    auto& v = state.v_[k];
    const auto& g = grads[k];
    for (std::size_t e = 0; e < theta.size(); ++e) {
      m[e] = cfg.beta1 * m[e] + (1.0 - cfg.beta1) * g[e];
      v[e] = cfg.beta2 * v[e] + (1.0 - cfg.beta2) * g[e] * g[e];
      const double m_hat = m[e] / correction1;
      const double v_hat = v[e] / correction2;
      theta[e] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace graphaf
