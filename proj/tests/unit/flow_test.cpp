#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "graphaf/bfs.hpp"
#include "graphaf/error.hpp"
#include "graphaf/flow.hpp"
#include "graphaf/generators.hpp"
#include "graphaf/gradcheck.hpp"

using namespace graphaf;

namespace {

ModelConfig small_config(std::size_t width = 8, std::size_t layers = 2) {
  ModelConfig c;
  c.rgcn.width = width;
  c.rgcn.layers = layers;
  return c;
}

GraphAF random_model(std::uint64_t seed, ModelConfig cfg = small_config(), double scale = 0.3,
                     Vocabulary vocab = Vocabulary::organic()) {
  Rng rng(seed);
  GraphAF model(std::move(vocab), cfg, rng);
  model.randomize(rng, scale);
  return model;
}

std::vector<MolecularGraph> bfs_graphs(std::size_t count, std::size_t max_atoms, std::uint64_t seed) {
  Rng rng(seed);
  auto graphs = gen_synthetic_molecules(count, max_atoms, Vocabulary::organic(), rng);
  for (auto& g : graphs) g = bfs_reorder(g, 0, rng).first;
  return graphs;
}

LatentSeq random_latent(const GraphAF& model, std::size_t n, Rng& rng) {
  LatentSeq latent;
  latent.steps = generation_steps(n, model.window_for(n));
  for (const auto& s : latent.steps) {
    std::vector<double> e(step_dimension(s, model.vocab()));
    for (auto& v : e) v = standard_normal(rng);
    latent.eps.push_back(std::move(e));
  }
  return latent;
}

// log|det| by Gaussian elimination with partial pivoting.
double log_abs_det(std::vector<std::vector<double>> m) {
  const std::size_t n = m.size();
  double out = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[pivot][c])) pivot = r;
    std::swap(m[c], m[pivot]);
    out += std::log(std::abs(m[c][c]));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return out;
}

}  // namespace

TEST(Flow, GenerationOrder) {
  using enum StepKind;
  const std::vector<Step> full{{Node, 0, 0}, {Node, 1, 0}, {Edge, 1, 0}, {Node, 2, 0}, {Edge, 2, 0}, {Edge, 2, 1}};
  EXPECT_EQ(generation_steps(3, 2), full);
  const std::vector<Step> windowed{{Node, 0, 0}, {Node, 1, 0}, {Edge, 1, 0}, {Node, 2, 0}, {Edge, 2, 1}};
  EXPECT_EQ(generation_steps(3, 1), windowed);
  EXPECT_EQ(generation_steps(12, 11).size(), 12u + 66u);
}

TEST(Flow, FreshModelIsIdentity) {
  Rng rng(1);
  GraphAF model(Vocabulary::organic(), small_config(), rng);
  const auto g = bfs_graphs(1, 8, 2).front();
  for (const auto& step : generation_steps(g.size(), model.window_for(g.size()))) {
    const auto gauss = step_conditional(model, g, step);
    ASSERT_EQ(gauss.mu.size(), step_dimension(step, model.vocab()));
    for (std::size_t c = 0; c < gauss.mu.size(); ++c) {
      EXPECT_EQ(gauss.mu[c], 0.0);
      EXPECT_EQ(gauss.alpha[c], 1.0);
    }
  }
}

TEST(Flow, ScaleIsPositiveUnderRandomParameters) {
  const auto g = bfs_graphs(1, 6, 3).front();
  const std::vector<Step> steps{{StepKind::Node, g.size() - 1, 0}, {StepKind::Edge, g.size() - 1, g.size() - 2}};
  Rng rng(4);
  GraphAF model(Vocabulary::organic(), small_config(4, 1), rng);
  for (int draw = 0; draw < 10000; ++draw) {
    model.randomize(rng, draw % 2 ? 20.0 : 1.0);
    Tape tape;
    ParamBinding binding(tape, model.params(), false);
    const auto cond = compute_conditionals(binding, model, g, steps);
    for (double a : cond.node_alpha.value().values()) ASSERT_GT(a, 0.0);
    for (double a : cond.edge_alpha.value().values()) ASSERT_GT(a, 0.0);
  }
  EXPECT_EQ(positivity_map(0.0), 1.0);
  EXPECT_GT(positivity_map(-1e6), 0.0);
  EXPECT_TRUE(std::isfinite(positivity_map(1e6)));
}

TEST(Flow, HeadGradientsMatchFiniteDifferences) {
  GraphAF model = random_model(5, small_config(4, 1), 0.5);
  Rng rng(6);
  const std::size_t k = model.config().rgcn.width;
  Tensor h = Tensor::matrix(2, k), hi = Tensor::matrix(2, k), hj = Tensor::matrix(2, k);
  for (auto* t : {&h, &hi, &hj})
    for (auto& v : t->values()) v = standard_normal(rng);
  Tensor w_node = Tensor::matrix(2, model.vocab().node_types()), w_edge = Tensor::matrix(2, 4);
  for (auto* t : {&w_node, &w_edge})
    for (auto& v : t->values()) v = standard_normal(rng);
  const auto result = grad_check(
      [&](const ParamBinding& p) {
        Tape& tape = p.tape();
        auto [nmu, nalpha] = node_conditional(p, model, tape.constant(h));
        auto [emu, ealpha] =
            edge_conditional(p, model, tape.constant(h), tape.constant(hi), tape.constant(hj));
        Var s = ad::sum(ad::mul(ad::add(nmu, nalpha), tape.constant(w_node)));
        return ad::add(s, ad::sum(ad::mul(ad::add(emu, ealpha), tape.constant(w_edge))));
      },
      model.params());
  EXPECT_LT(result.max_rel_error, 1e-6) << result.worst_name << "[" << result.worst_index << "]";
  EXPECT_GT(result.checked, 0u);
}

TEST(Flow, TransformExamples) {
  const std::vector<double> mu{1, 2}, alpha{2, 3}, eps{0.5, -1};
  EXPECT_EQ(forward_transform(eps, mu, alpha), (std::vector<double>{2, -1}));
  EXPECT_EQ(forward_transform(eps, std::vector<double>{0, 0}, std::vector<double>{1, 1}), eps);
  const auto back = inverse_transform(forward_transform(eps, mu, alpha), mu, alpha);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(back[c], eps[c], 1e-15);
  EXPECT_THROW(forward_transform(eps, std::vector<double>{0}, alpha), ShapeError);
}

TEST(Flow, ParallelMatchesSequential) {
  const GraphAF model = random_model(7);
  Rng rng(8);
  for (const auto& g : bfs_graphs(10, 10, 9)) {
    const auto z = dequantize(g, model.vocab(), rng);
    const auto par = log_likelihood_parallel(model, g, z);
    const auto seq = log_likelihood_sequential(model, g, z);
    EXPECT_NEAR(par.total, seq.total, 1e-10 * std::max(1.0, std::abs(seq.total)));
    ASSERT_EQ(par.node_terms.size(), seq.node_terms.size());
    ASSERT_EQ(par.edge_terms.size(), seq.edge_terms.size());
    for (std::size_t t = 0; t < par.node_terms.size(); ++t) EXPECT_NEAR(par.node_terms[t], seq.node_terms[t], 1e-10);
    for (std::size_t t = 0; t < par.edge_terms.size(); ++t) EXPECT_NEAR(par.edge_terms[t], seq.edge_terms[t], 1e-10);
    EXPECT_NEAR(par.total, par.base + par.log_det, 1e-9);
  }
}

TEST(Flow, LogDeterminantMatchesNumericalJacobian) {
  // Two node types, one bond type; a 2-node graph has 2 + 2 + 2 latent values.
  Vocabulary vocab{AtomVocab({"A", "B"}, {2, 2}), BondVocab({1})};
  const GraphAF model = random_model(10, small_config(4, 2), 0.5, vocab);
  DequantizedGraph z;
  z.n = 2;
  z.no_edge = 1;
  z.nodes = Tensor::from_rows({{1.3, 0.2}, {0.4, 1.6}});
  z.edges = Tensor::from_rows({{1.5, 0.3}});
  MolecularGraph g = quantize(z);
  ASSERT_TRUE(g.has_bond(1, 0));

  auto flat_eps = [&](const DequantizedGraph& zz) {
    std::vector<double> out;
    for (const auto& e : flow_inverse(model, zz).eps) out.insert(out.end(), e.begin(), e.end());
    return out;
  };
  std::vector<double*> slots;
  for (std::size_t k = 0; k < 2; ++k) slots.push_back(&z.nodes(0, k));
  for (std::size_t k = 0; k < 2; ++k) slots.push_back(&z.nodes(1, k));
  for (std::size_t k = 0; k < 2; ++k) slots.push_back(&z.edges(0, k));
  // Step order is node 0, node 1, edge (1, 0), matching `slots`.
  const double h = 1e-6;
  std::vector<std::vector<double>> jac(6, std::vector<double>(6));
  for (std::size_t c = 0; c < 6; ++c) {
    const double keep = *slots[c];
    *slots[c] = keep + h;
    const auto plus = flat_eps(z);
    *slots[c] = keep - h;
    const auto minus = flat_eps(z);
    *slots[c] = keep;
    for (std::size_t r = 0; r < 6; ++r) jac[r][c] = (plus[r] - minus[r]) / (2 * h);
  }
  const auto ll = log_likelihood_parallel(model, g, z);
  EXPECT_NEAR(ll.log_det, log_abs_det(jac), 1e-7);
  double base = 0.0;
  for (double e : flat_eps(z)) base += -0.5 * std::log(2 * std::numbers::pi) - 0.5 * e * e;
  EXPECT_NEAR(ll.base, base, 1e-12);
  EXPECT_NEAR(ll.total, base + ll.log_det, 1e-12);
}

TEST(Flow, InverseOfForwardRecoversLatents) {
  const GraphAF model = random_model(11);
  Rng rng(12);
  for (std::size_t n : {1u, 2u, 5u, 9u}) {
    const auto latent = random_latent(model, n, rng);
    const auto decoded = flow_forward(model, latent, n);
    const auto back = flow_inverse(model, decoded.z);
    ASSERT_EQ(back.steps, latent.steps);
    double worst = 0.0;
    for (std::size_t t = 0; t < latent.eps.size(); ++t)
      for (std::size_t c = 0; c < latent.eps[t].size(); ++c)
        worst = std::max(worst, std::abs(back.eps[t][c] - latent.eps[t][c]));
    EXPECT_LT(worst, 1e-12) << "n=" << n;
  }
}

TEST(Flow, ForwardIsAutoregressive) {
  const GraphAF model = random_model(13);
  Rng rng(14);
  const std::size_t n = 6;
  auto latent = random_latent(model, n, rng);
  const auto base = flow_forward(model, latent, n);
  for (std::size_t t = 0; t < latent.steps.size(); ++t) {
    auto changed = latent;
    for (auto& v : changed.eps[t]) v += 3.0;
    const auto out = flow_forward(model, changed, n);
    for (std::size_t s = 0; s < t; ++s) {
      const Step& step = latent.steps[s];
      const auto a = step.kind == StepKind::Node ? base.z.node(step.i) : base.z.edge(step.i, step.j);
      const auto b = step.kind == StepKind::Node ? out.z.node(step.i) : out.z.edge(step.i, step.j);
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << "step " << s << " changed by step " << t;
    }
  }
}

TEST(Flow, RejectsGraphsOutsideTheOrdering) {
  const GraphAF model = random_model(15);
  Rng rng(16);
  // Star centred at node 2 with leaves 0, 1, 3: node 1 is not adjacent to node 0.
  MolecularGraph star({0, 0, 0, 0}, 3);
  star.set_edge(2, 0, 0);
  star.set_edge(2, 1, 0);
  star.set_edge(2, 3, 0);
  EXPECT_THROW(log_likelihood_parallel(model, star, rng), DataError);
  EXPECT_THROW(log_likelihood_parallel(model, MolecularGraph(3), rng), DataError);
  ModelConfig narrow = small_config();
  narrow.window = 1;
  const GraphAF tight = random_model(17, narrow);
  MolecularGraph triangle({0, 0, 0}, 3);
  triangle.set_edge(1, 0, 0);
  triangle.set_edge(2, 0, 0);
  triangle.set_edge(2, 1, 0);
  EXPECT_THROW(log_likelihood_parallel(tight, triangle, rng), DataError);
}
