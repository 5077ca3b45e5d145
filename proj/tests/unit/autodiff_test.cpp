#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "graphaf/autodiff.hpp"
#include "graphaf/error.hpp"
#include "graphaf/gradcheck.hpp"
#include "graphaf/random.hpp"

using namespace graphaf;

namespace {

// Entries in +-[0.2, 1.2], away from the kinks of relu/clamp/minimum.
Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * (0.2 + uniform01(rng));
  return t;
}

Tensor positive_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = 0.5 + uniform01(rng);
  return t;
}

// Weighted sum so every output entry matters to the checked scalar.
Var weighted(Tape& tape, Var v, Rng& rng) {
  Tensor w(v.value().shape());
  for (auto& x : w.values()) x = 2.0 * uniform01(rng) - 1.0;
  return ad::sum(ad::mul(v, tape.constant(w)));
}

double check(const std::function<Var(Tape&, const std::vector<Var>&)>& f, std::vector<Tensor> inputs,
             std::uint64_t seed) {
  return grad_check(
             [&](Tape& tape, const std::vector<Var>& in) {
               Rng rng(seed);
               return weighted(tape, f(tape, in), rng);
             },
             std::move(inputs))
      .max_rel_error;
}

}  // namespace

TEST(Ops, ReluExample) {
  Tape tape;
  Var x = tape.variable(Tensor({1, 2}, std::vector<double>{-1.0, 2.0}));
  Var y = ad::relu(x);
  EXPECT_EQ(y.value(), Tensor({1, 2}, std::vector<double>{0.0, 2.0}));
  tape.backward(ad::sum(y));
  EXPECT_EQ(tape.grad(x), Tensor({1, 2}, std::vector<double>{0.0, 1.0}));
}

TEST(Ops, MatmulIdentity) {
  Rng rng(1);
  Tape tape;
  const Tensor m = random_tensor(3, 4, rng);
  Tensor eye = Tensor::matrix(3, 3);
  for (std::size_t k = 0; k < 3; ++k) eye(k, k) = 1.0;
  EXPECT_EQ(ad::matmul(tape.constant(eye), tape.constant(m)).value(), m);
}

TEST(Ops, ShapeErrorsNameBothShapes) {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 3));
  Var b = tape.constant(Tensor::matrix(2, 3));
  try {
    ad::matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2x3]"), std::string::npos) << what;
  }
  EXPECT_THROW(ad::add(a, tape.constant(Tensor::matrix(3, 2))), ShapeError);
}

TEST(Ops, DomainErrors) {
  Tape tape;
  Var zero = tape.constant(Tensor({1, 2}, std::vector<double>{1.0, 0.0}));
  EXPECT_THROW(ad::log(zero), NumericalError);
  EXPECT_THROW(ad::div(tape.constant(Tensor::matrix(1, 2, 1.0)), zero), NumericalError);
  EXPECT_THROW(ad::gaussian_logpdf(zero, zero, zero), NumericalError);
}

TEST(Ops, FiniteDifferenceFuzz) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const std::uint64_t s = 100 + trial;
    const Tensor a = random_tensor(3, 4, rng), b = random_tensor(3, 4, rng), w = random_tensor(4, 2, rng);
    const Tensor p = positive_tensor(3, 4, rng), row = random_tensor(1, 4, rng);
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::matmul(in[0], in[1]); }, {a, w}, s), 1e-6) << "matmul";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::add(in[0], in[1]); }, {a, b}, s), 1e-6) << "add";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::sub(in[0], in[1]); }, {a, b}, s), 1e-6) << "sub";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::mul(in[0], in[1]); }, {a, b}, s), 1e-6) << "mul";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::div(in[0], in[1]); }, {a, p}, s), 1e-6) << "div";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::exp(in[0]); }, {a}, s), 1e-6) << "exp";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::log(in[0]); }, {p}, s), 1e-6) << "log";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::relu(in[0]); }, {a}, s), 1e-6) << "relu";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::tanh(in[0]); }, {a}, s), 1e-6) << "tanh";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::clamp(in[0], -0.7, 0.7); }, {a}, s), 1e-6) << "clamp";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::minimum(in[0], in[1]); }, {a, b}, s), 1e-6) << "minimum";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::scale(in[0], -2.5); }, {a}, s), 1e-6) << "scale";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::add_row(in[0], in[1]); }, {a, row}, s), 1e-6) << "add_row";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::mean(ad::mul(in[0], in[0])); }, {a}, s), 1e-6) << "mean";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::concat({in[0], in[1]}, 0); }, {a, b}, s), 1e-6) << "concat0";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::concat({in[0], in[1]}, 1); }, {a, b}, s), 1e-6) << "concat1";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::slice(in[0], 1, 1, 3); }, {a}, s), 1e-6) << "slice";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::gather_rows(in[0], {2, 0, 2}); }, {a}, s), 1e-6) << "gather";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::segment_sum(in[0], {0, 1, 3}); }, {a}, s), 1e-6) << "segment";
    EXPECT_LT(check([](Tape&, const auto& in) { return ad::gaussian_logpdf(in[0], in[1], in[2]); }, {a, b, p}, s), 1e-6)
        << "gaussian_logpdf";
    EXPECT_LT(check(
                  [](Tape&, const auto& in) {
                    Tensor mean = Tensor::matrix(1, 4), var = Tensor::matrix(1, 4, 1.0);
                    return ad::batch_norm(in[0], in[1], in[2], mean, var, true);
                  },
                  {a, row, Tensor::row(b.row_span(0))}, s),
              1e-6)
        << "batch_norm";
    EXPECT_LT(check(
                  [](Tape&, const auto& in) {
                    const Tensor mean = Tensor::matrix(1, 4, 0.1), var = Tensor::matrix(1, 4, 2.0);
                    return ad::batch_norm_eval(in[0], in[1], in[2], mean, var);
                  },
                  {a, row, row}, s),
              1e-6)
        << "batch_norm_eval";
  }
}

TEST(Ops, SparseMatchesDense) {
  Rng rng(3);
  auto m = std::make_shared<SparseMatrix>();
  m->cols = 3;
  m->push(0, 0.5);
  m->push(2, -1.0);
  m->end_row();
  m->end_row();
  m->push(1, 2.0);
  m->end_row();
  const Tensor x = random_tensor(3, 2, rng);
  Tape tape;
  Var sparse = ad::spmm(m, tape.constant(x));
  Var dense = ad::matmul(tape.constant(m->dense()), tape.constant(x));
  EXPECT_EQ(sparse.value(), dense.value());
  EXPECT_LT(check([m](Tape&, const auto& in) { return ad::spmm(m, in[0]); }, {x}, 4), 1e-6);
}

TEST(Ops, GaussianLogpdfValues) {
  Tape tape;
  auto scalar = [&](double v) { return tape.constant(Tensor::scalar(v)); };
  EXPECT_NEAR(ad::gaussian_logpdf(scalar(0), scalar(0), scalar(1)).value().item(), -0.91893853320467274, 1e-15);
  const double alpha = 2.5;
  EXPECT_NEAR(ad::gaussian_logpdf(scalar(1.3), scalar(1.3), scalar(alpha)).value().item(),
              -0.5 * std::log(2.0 * std::numbers::pi) - std::log(alpha), 1e-15);
  const double x = 0.4, mu = -0.2, a = 0.7;
  EXPECT_NEAR(ad::gaussian_logpdf(scalar(x), scalar(mu), scalar(a)).value().item(),
              -0.5 * std::log(2.0 * std::numbers::pi) - std::log(a) - (x - mu) * (x - mu) / (2 * a * a), 1e-15);
}

TEST(Ops, SharedSubexpressionsSumAllPaths) {
  Rng rng(5);
  const Tensor x = random_tensor(2, 3, rng);
  Tape t1;
  Var a = t1.variable(x);
  Var shared = ad::tanh(a);
  t1.backward(ad::sum(ad::add(ad::mul(shared, shared), shared)));
  // Oracle: the same function written without reuse.
  Tape t2;
  Var b = t2.variable(x);
  t2.backward(ad::sum(ad::add(ad::mul(ad::tanh(b), ad::tanh(b)), ad::tanh(b))));
  const Tensor g1 = t1.grad(a), g2 = t2.grad(b);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = std::tanh(x[k]);
    EXPECT_NEAR(g1[k], (2 * t + 1) * (1 - t * t), 1e-14);
    EXPECT_NEAR(g1[k], g2[k], 1e-15);
  }
}

TEST(Ops, BatchNormRunningStatistics) {
  Tape tape;
  const Tensor x = Tensor::from_rows({{1.0, 10.0}, {3.0, 14.0}});
  Tensor mean = Tensor::matrix(1, 2), var = Tensor::matrix(1, 2, 1.0);
  Var gamma = tape.constant(Tensor::matrix(1, 2, 1.0)), beta = tape.constant(Tensor::matrix(1, 2));
  Var y = ad::batch_norm(tape.constant(x), gamma, beta, mean, var, true);
  // Batch mean (2, 12), unbiased variance (2, 8), momentum 0.9 on the old value.
  EXPECT_NEAR(mean[0], 0.2, 1e-15);
  EXPECT_NEAR(mean[1], 1.2, 1e-15);
  EXPECT_NEAR(var[0], 0.9 + 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(var[1], 0.9 + 0.1 * 8.0, 1e-15);
  EXPECT_NEAR(y.value()(0, 0), -1.0 / std::sqrt(1.0 + 1e-5), 1e-12);
  const Tensor before_mean = mean;
  ad::batch_norm(tape.constant(x), gamma, beta, mean, var, false);
  EXPECT_EQ(mean, before_mean);
}
