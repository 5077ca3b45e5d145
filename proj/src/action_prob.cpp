#include "graphaf/action_prob.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "graphaf/error.hpp"

namespace graphaf {
namespace {

constexpr double kRange = 9.0;
constexpr std::size_t kMaxPoints = 200001;
constexpr double kFloor = 1e-300;

double normal_pdf(double x) { return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void check_inputs(std::span<const double> mu, std::span<const double> alpha) {
  if (mu.size() != alpha.size() || mu.empty()) throw ShapeError("category probabilities need matching non-empty mu and alpha");
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw NumericalError("category probabilities need finite alpha > 0");
  }
  for (double m : mu) {
    if (!std::isfinite(m)) throw NumericalError("non-finite mean in category probabilities");
  }
}

// Trapezoid grid on [-kRange, kRange] fine enough for the steepest CDF.
std::pair<std::size_t, double> grid(std::span<const double> alpha) {
  const auto [lo, hi] = std::minmax_element(alpha.begin(), alpha.end());
  const double ratio = *hi / *lo;
  const double h = std::min(0.25, 0.5 / ratio);
  const std::size_t points = std::min(kMaxPoints, static_cast<std::size_t>(std::ceil(2.0 * kRange / h)) + 1);
  return {points, 2.0 * kRange / static_cast<double>(points - 1)};
}

}  // namespace

CategoryJacobian category_jacobian(std::span<const double> mu, std::span<const double> alpha) {
  check_inputs(mu, alpha);
  const std::size_t m = mu.size();
  CategoryJacobian out;
  out.p.assign(m, 0.0);
  out.d_mu.assign(m * m, 0.0);
  out.d_alpha.assign(m * m, 0.0);
  if (m == 1) {
    out.p[0] = 1.0;
    return out;
  }
  const auto [points, h] = grid(alpha);
  std::vector<double> u(m), cdf(m), pdf(m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t s = 0; s < points; ++s) {
      const double t = -kRange + h * static_cast<double>(s);
      const double w = (s == 0 || s + 1 == points ? 0.5 * h : h) * normal_pdf(t);
      const double x = mu[k] + alpha[k] * t;
      double prod = 1.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == k) continue;
        u[j] = (x - mu[j]) / alpha[j];
        cdf[j] = normal_cdf(u[j]);
        pdf[j] = normal_pdf(u[j]);
        prod *= cdf[j];
      }
      out.p[k] += w * prod;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == k) continue;
        double others = 1.0;
        for (std::size_t l = 0; l < m; ++l) {
          if (l != k && l != j) others *= cdf[l];
        }
        const double g = w * pdf[j] * others / alpha[j];
        out.d_mu[k * m + k] += g;
        out.d_alpha[k * m + k] += g * t;
        out.d_mu[k * m + j] -= g;
        out.d_alpha[k * m + j] -= g * u[j];
      }
    }
  }
  return out;
}

std::vector<double> category_probabilities(std::span<const double> mu, std::span<const double> alpha) {
  auto p = category_jacobian(mu, alpha).p;
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

namespace {

// log P(c | allowed) and its gradient with respect to mu and alpha.
double logprob_with_grad(std::span<const double> mu, std::span<const double> alpha, std::size_t category,
                         std::span<const std::uint8_t> allowed, double* g_mu, double* g_alpha) {
  const std::size_t m = mu.size();
  if (category >= m) throw ShapeError("action category out of range");
  if (!allowed.empty() && allowed.size() != m) throw ShapeError("allowed mask has the wrong length");
  if (!allowed.empty() && !allowed[category]) throw DataError("action category is not allowed in its state");
  const auto jac = category_jacobian(mu, alpha);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (allowed.empty() || allowed[k]) total += jac.p[k];
  }
  const double pc = std::max(jac.p[category], kFloor);
  total = std::max(total, kFloor);
  if (g_mu) {
    for (std::size_t l = 0; l < m; ++l) {
      double dm = jac.d_mu[category * m + l] / pc;
      double da = jac.d_alpha[category * m + l] / pc;
      for (std::size_t k = 0; k < m; ++k) {
        if (!allowed.empty() && !allowed[k]) continue;
        dm -= jac.d_mu[k * m + l] / total;
        da -= jac.d_alpha[k * m + l] / total;
      }
      g_mu[l] = dm;
      g_alpha[l] = da;
    }
  }
  return std::log(pc) - std::log(total);
}

}  // namespace

double action_logprob(std::span<const double> mu, std::span<const double> alpha, std::size_t category,
                      std::span<const std::uint8_t> allowed) {
  return logprob_with_grad(mu, alpha, category, allowed, nullptr, nullptr);
}

namespace ad {

Var action_logprob(Var mu, Var alpha, const std::vector<std::size_t>& categories,
                   const std::vector<std::vector<std::uint8_t>>& allowed) {
  const Tensor& mv = mu.value();
  const Tensor& av = alpha.value();
  if (!mv.same_shape(av)) throw ShapeError("action_logprob: mu and alpha shapes differ");
  const std::size_t rows = mv.rows();
  const std::size_t m = mv.cols();
  if (categories.size() != rows || allowed.size() != rows) throw ShapeError("action_logprob: one action per row");
  Tensor out = Tensor::matrix(rows, 1);
  auto g_mu = std::make_shared<Tensor>(Tensor::matrix(rows, m));
  auto g_alpha = std::make_shared<Tensor>(Tensor::matrix(rows, m));
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = logprob_with_grad(mv.row_span(r), av.row_span(r), categories[r], allowed[r],
                               g_mu->data() + r * m, g_alpha->data() + r * m);
  }
  return mu.tape().record(std::move(out), {mu, alpha}, [mu, alpha, g_mu, g_alpha, rows, m](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(mu)) {
      Tensor& gm = tape.grad_buffer(mu);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < m; ++c) gm[r * m + c] += g[r] * (*g_mu)[r * m + c];
    }
    if (tape.requires_grad(alpha)) {
      Tensor& ga = tape.grad_buffer(alpha);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += g[r] * (*g_alpha)[r * m + c];
    }
  });
}

}  // namespace ad
}  // namespace graphaf
