#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphaf/params.hpp"

namespace graphaf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam moments for every trainable tensor of a store.
class AdamState {
 public:
  AdamState(const ParamStore& store, AdamConfig cfg);

  const AdamConfig& config() const { return cfg_; }
  std::size_t steps() const { return steps_; }
  const Tensor& first_moment(std::size_t k) const { return m_.at(k); }
  const Tensor& second_moment(std::size_t k) const { return v_.at(k); }

 private:
  friend void adam_step(ParamStore&, std::span<const Tensor>, AdamState&, double);
  AdamConfig cfg_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// One update of every trainable parameter with learning rate cfg.lr * lr_scale.
// Throws NumericalError naming the parameter on a non-finite gradient.
void adam_step(ParamStore& store, std::span<const Tensor> grads, AdamState& state,
               double lr_scale = 1.0);

}  // namespace graphaf
