#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "graphaf/autodiff.hpp"

namespace graphaf {

// Probability that argmax(mu + alpha * eps), eps ~ N(0, I), equals each
// category: P(c) = integral phi(t) prod_{j != c} Phi((mu_c + alpha_c t - mu_j) / alpha_j) dt,
// evaluated by the trapezoid rule and normalised to sum to one.
std::vector<double> category_probabilities(std::span<const double> mu, std::span<const double> alpha);

// Unnormalised quadrature values and their derivatives:
// d_mu[k * m + l] = dP_k / dmu_l, likewise d_alpha.
struct CategoryJacobian {
  std::vector<double> p;
  std::vector<double> d_mu;
  std::vector<double> d_alpha;
};
CategoryJacobian category_jacobian(std::span<const double> mu, std::span<const double> alpha);

// log P(category | allowed), renormalised over the allowed categories (all
// when `allowed` is empty).
double action_logprob(std::span<const double> mu, std::span<const double> alpha, std::size_t category,
                      std::span<const std::uint8_t> allowed = {});

namespace ad {

// Row-wise action log-probabilities (r x 1) for r x m Gaussian parameters.
// allowed[r] may be empty (every category allowed).
Var action_logprob(Var mu, Var alpha, const std::vector<std::size_t>& categories,
                   const std::vector<std::vector<std::uint8_t>>& allowed);

}  // namespace ad

}  // namespace graphaf
