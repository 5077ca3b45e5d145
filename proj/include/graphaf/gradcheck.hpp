#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graphaf/autodiff.hpp"
#include "graphaf/params.hpp"

namespace graphaf {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Builds a scalar on `tape` from the given leaves.
using LeafFn = std::function<Var(Tape& tape, const std::vector<Var>& leaves)>;

// Compares reverse-mode gradients with central differences of step h for
// every entry of every input:
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckResult grad_check(const LeafFn& f, std::vector<Tensor> inputs, double h = 1e-5);

// Same over the trainable tensors of a store (restored on return).
using ModelFn = std::function<Var(const ParamBinding& params)>;
GradCheckResult grad_check(const ModelFn& f, ParamStore& store, double h = 1e-5);

}  // namespace graphaf
