#include "graphaf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace graphaf {
namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

void consider(GradCheckResult& result, const std::string& name, std::size_t index, double analytic,
              double numeric) {
  ++result.checked;
  const double err = relative_error(analytic, numeric);
  if (result.checked == 1 || err > result.max_rel_error) {
    result.max_rel_error = err;
    result.worst_name = name;
    result.worst_index = index;
    result.analytic = analytic;
    result.numeric = numeric;
  }
}

}  // namespace

GradCheckResult grad_check(const LeafFn& f, std::vector<Tensor> inputs, double h) {
  auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(with_grad ? tape.variable_ref(t) : tape.constant_ref(t));
    Var out = f(tape, leaves);
    if (with_grad) {
      tape.backward(out);
      for (const auto& v : leaves) grads->push_back(tape.grad(v));
    }
    return out.value().item();
  };
  std::vector<Tensor> analytic;
  evaluate(true, &analytic);
  GradCheckResult result;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    for (std::size_t e = 0; e < inputs[p].size(); ++e) {
      const double saved = inputs[p][e];
      inputs[p][e] = saved + h;
      const double up = evaluate(false, nullptr);
      inputs[p][e] = saved - h;
      const double down = evaluate(false, nullptr);
      inputs[p][e] = saved;
      consider(result, "input" + std::to_string(p), e, analytic[p][e], (up - down) / (2.0 * h));
    }
  }
  return result;
}

GradCheckResult grad_check(const ModelFn& f, ParamStore& store, double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    ParamBinding binding(tape, store, true);
    Var out = f(binding);
    tape.backward(out);
    analytic = binding.gradients();
  }
  auto evaluate = [&] {
    Tape tape;
    ParamBinding binding(tape, store, false);
    return f(binding).value().item();
  };
  GradCheckResult result;
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (!store[p].trainable) continue;
    auto& values = store[p].value;
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double saved = values[e];
      values[e] = saved + h;
      const double up = evaluate();
      values[e] = saved - h;
      const double down = evaluate();
      values[e] = saved;
      consider(result, store[p].name, e, analytic[p][e], (up - down) / (2.0 * h));
    }
  }
  return result;
}

}  // namespace graphaf
