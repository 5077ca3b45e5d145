#include <gtest/gtest.h>

#include <cmath>

#include "graphaf/action_prob.hpp"
#include "graphaf/dequantize.hpp"
#include "graphaf/error.hpp"
#include "graphaf/gradcheck.hpp"
#include "graphaf/random.hpp"

using namespace graphaf;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void random_params(std::size_t m, Rng& rng, std::vector<double>& mu, std::vector<double>& alpha) {
  mu.resize(m);
  alpha.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    mu[k] = 2.0 * uniform01(rng) - 1.0;
    alpha[k] = 0.3 + 1.5 * uniform01(rng);
  }
}

}  // namespace

TEST(ActionProb, TwoCategoriesClosedForm) {
  Rng rng(1);
  std::vector<double> mu, alpha;
  for (int trial = 0; trial < 50; ++trial) {
    random_params(2, rng, mu, alpha);
    const auto p = category_probabilities(mu, alpha);
    const double expected = phi_cdf((mu[0] - mu[1]) / std::hypot(alpha[0], alpha[1]));
    EXPECT_NEAR(p[0], expected, 1e-9);
    EXPECT_NEAR(p[1], 1.0 - expected, 1e-9);
  }
}

TEST(ActionProb, IdentityFlowIsUniform) {
  for (std::size_t m : {2u, 3u, 4u}) {
    const std::vector<double> mu(m, 0.0), alpha(m, 1.0);
    for (double p : category_probabilities(mu, alpha)) EXPECT_NEAR(p, 1.0 / static_cast<double>(m), 1e-10);
  }
  const std::vector<double> one_mu{0.3}, one_alpha{2.0};
  EXPECT_EQ(action_logprob(one_mu, one_alpha, 0), 0.0);
}

TEST(ActionProb, QuadratureIsNormalised) {
  Rng rng(2);
  std::vector<double> mu, alpha;
  for (int trial = 0; trial < 20; ++trial) {
    random_params(4, rng, mu, alpha);
    const auto raw = category_jacobian(mu, alpha).p;
    double total = 0.0;
    for (double p : raw) total += p;
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(ActionProb, MatchesArgmaxFrequencies) {
  Rng rng(3);
  const std::vector<double> mu{0.4, -0.2, 0.1, 0.0}, alpha{0.7, 1.4, 0.5, 1.0};
  const auto p = category_probabilities(mu, alpha);
  const std::size_t draws = 200000;
  std::vector<double> counts(4, 0.0);
  for (std::size_t s = 0; s < draws; ++s) {
    std::vector<double> z(4);
    for (std::size_t k = 0; k < 4; ++k) z[k] = mu[k] + alpha[k] * standard_normal(rng);
    counts[argmax_category(z)] += 1.0;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double f = counts[k] / draws;
    EXPECT_NEAR(f, p[k], 4.0 * std::sqrt(p[k] * (1 - p[k]) / draws)) << "category " << k;
  }
}

TEST(ActionProb, JacobianMatchesFiniteDifferences) {
  Rng rng(4);
  std::vector<double> mu, alpha;
  random_params(4, rng, mu, alpha);
  const auto jac = category_jacobian(mu, alpha);
  const double h = 1e-6;
  for (std::size_t l = 0; l < 4; ++l) {
    for (auto* v : {&mu, &alpha}) {
      const double keep = (*v)[l];
      (*v)[l] = keep + h;
      const auto plus = category_jacobian(mu, alpha).p;
      (*v)[l] = keep - h;
      const auto minus = category_jacobian(mu, alpha).p;
      (*v)[l] = keep;
      const auto& d = v == &mu ? jac.d_mu : jac.d_alpha;
      for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(d[k * 4 + l], (plus[k] - minus[k]) / (2 * h), 1e-7);
    }
  }
}

TEST(ActionProb, TapeGradientMatchesFiniteDifferences) {
  Rng rng(5);
  Tensor mu = Tensor::matrix(3, 4), raw = Tensor::matrix(3, 4);
  for (auto& v : mu.values()) v = 2.0 * uniform01(rng) - 1.0;
  for (auto& v : raw.values()) v = uniform01(rng) - 0.5;
  const std::vector<std::size_t> categories{0, 3, 2};
  const std::vector<std::vector<std::uint8_t>> allowed{{}, {1, 0, 1, 1}, {0, 0, 1, 1}};
  const auto result = grad_check(
      [&](Tape&, const std::vector<Var>& in) {
        return ad::sum(ad::action_logprob(in[0], ad::exp(in[1]), categories, allowed));
      },
      {mu, raw});
  EXPECT_LT(result.max_rel_error, 1e-6) << result.worst_name << " " << result.analytic << " vs " << result.numeric;
}

TEST(ActionProb, AllowedMaskRenormalises) {
  const std::vector<double> mu{0.2, -0.1, 0.5, 0.0}, alpha{1.0, 0.8, 1.2, 0.6};
  const auto p = category_probabilities(mu, alpha);
  const std::vector<std::uint8_t> allowed{1, 0, 0, 1};
  EXPECT_NEAR(action_logprob(mu, alpha, 3, allowed), std::log(p[3] / (p[0] + p[3])), 1e-12);
  EXPECT_NEAR(action_logprob(mu, alpha, 2), std::log(p[2]), 1e-12);
  EXPECT_THROW(action_logprob(mu, alpha, 1, allowed), DataError);
  EXPECT_THROW(action_logprob(mu, alpha, 4), ShapeError);
}

TEST(ActionProb, RejectsBadScales) {
  const std::vector<double> mu{0.0, 0.0}, zero{1.0, 0.0}, nan{1.0, std::nan("")};
  EXPECT_THROW(category_probabilities(mu, zero), NumericalError);
  EXPECT_THROW(category_probabilities(mu, nan), NumericalError);
}
