#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphaf/error.hpp"
#include "graphaf/generators.hpp"
#include "graphaf/rgcn.hpp"

using namespace graphaf;

namespace {

using Dense = std::vector<std::vector<double>>;

Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

Dense dense_matmul(const Dense& a, const Tensor& w) {
  Dense out = zeros(a.size(), w.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j)
      for (std::size_t p = 0; p < w.rows(); ++p) out[i][j] += a[i][p] * w(p, j);
  return out;
}

// D^-1/2 (E + I) D^-1/2 of one relation, written out densely.
Dense dense_adjacency(const MolecularGraph& g, std::size_t n, std::size_t relation,
                      const PrefixView& view) {
  Dense e = zeros(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    e[a][a] = 1.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && view.known(a, b) && g.edge(a, b) == relation) e[a][b] = 1.0;
    }
  }
  std::vector<double> d(n);
  for (std::size_t a = 0; a < n; ++a) d[a] = std::accumulate(e[a].begin(), e[a].end(), 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) e[a][b] /= std::sqrt(d[a]) * std::sqrt(d[b]);
  return e;
}

// Independent dense encoder used as an oracle.
NodeEmbeddings dense_encode(const ParamStore& store, const RgcnParams& p, const MolecularGraph& g,
                            const PrefixView& view) {
  const std::size_t n = view.nodes;
  Dense h = zeros(n, p.node_types);
  for (std::size_t a = 0; a < n; ++a) h[a][g.node_type(a)] = 1.0;
  for (const auto& layer : p.weights) {
    Dense next = zeros(n, p.config.width);
    for (std::size_t r = 0; r < p.relations; ++r) {
      const Dense adj = dense_adjacency(g, n, r, view);
      const Dense hw = dense_matmul(h, store[layer[r]].value);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t c = 0; c < p.config.width; ++c) {
          double m = 0.0;
          for (std::size_t b = 0; b < n; ++b) m += adj[a][b] * hw[b][c];
          next[a][c] += std::max(0.0, m) / static_cast<double>(p.relations);
        }
    }
    h = std::move(next);
  }
  NodeEmbeddings out{Tensor::matrix(n, p.config.width), Tensor::matrix(1, p.config.width)};
  const auto& gamma = store[p.bn_gamma].value;
  const auto& beta = store[p.bn_beta].value;
  const auto& mean = store[p.bn_mean].value;
  const auto& var = store[p.bn_var].value;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < p.config.width; ++c) {
      out.nodes(a, c) = (h[a][c] - mean[c]) / std::sqrt(var[c] + 1e-5) * gamma[c] + beta[c];
      out.graph(0, c) += out.nodes(a, c);
    }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

RgcnConfig config(std::size_t layers, std::size_t width, bool no_edge_relation) {
  RgcnConfig c;
  c.layers = layers;
  c.width = width;
  c.no_edge_relation = no_edge_relation;
  return c;
}

struct Fixture {
  Vocabulary vocab = Vocabulary::organic();
  ParamStore store;
  RgcnParams layout;

  explicit Fixture(std::uint64_t seed, RgcnConfig cfg = config(3, 8, true)) {
    Rng rng(seed);
    layout = RgcnParams::create(store, cfg, vocab.node_types(), vocab.edge_categories(), rng);
    // Non-trivial normalisation so the oracle exercises every term.
    for (auto idx : {layout.bn_gamma, layout.bn_beta, layout.bn_mean}) {
      for (auto& v : store[idx].value.values()) v = uniform01(rng) - 0.5;
    }
    for (auto& v : store[layout.bn_var].value.values()) v = 0.5 + uniform01(rng);
  }
};

std::vector<MolecularGraph> random_graphs(std::size_t count, std::size_t max_atoms, std::uint64_t seed) {
  Rng rng(seed);
  return gen_synthetic_molecules(count, max_atoms, Vocabulary::organic(), rng);
}

}  // namespace

TEST(Rgcn, SingleNodeCollapsesToIdentityNormalisation) {
  Fixture f(1);
  MolecularGraph g({2}, f.vocab.bonds.no_edge());
  const auto enc = encode(f.store, f.layout, g);
  // H^1 = mean_r relu(x W_r), and so on per layer.
  std::vector<double> h(f.vocab.node_types(), 0.0);
  h[2] = 1.0;
  for (const auto& layer : f.layout.weights) {
    const std::size_t k = f.layout.config.width;
    std::vector<double> next(k, 0.0);
    for (auto w : layer) {
      const auto& wv = f.store[w].value;
      for (std::size_t c = 0; c < k; ++c) {
        double m = 0.0;
        for (std::size_t p = 0; p < h.size(); ++p) m += h[p] * wv(p, c);
        next[c] += std::max(0.0, m) / static_cast<double>(layer.size());
      }
    }
    h = next;
  }
  for (std::size_t c = 0; c < h.size(); ++c) {
    const double expected = (h[c] - f.store[f.layout.bn_mean].value[c]) /
                                std::sqrt(f.store[f.layout.bn_var].value[c] + 1e-5) *
                                f.store[f.layout.bn_gamma].value[c] +
                            f.store[f.layout.bn_beta].value[c];
    EXPECT_NEAR(enc.nodes(0, c), expected, 1e-14);
    EXPECT_EQ(enc.graph(0, c), enc.nodes(0, c));
  }
}

TEST(Rgcn, MatchesDenseOracle) {
  Fixture f(2);
  for (const auto& g : random_graphs(20, 9, 3)) {
    const auto enc = encode(f.store, f.layout, g);
    const auto ref = dense_encode(f.store, f.layout, g, PrefixView::complete(g.size()));
    EXPECT_LT(max_abs_diff(enc.nodes, ref.nodes), 1e-12);
    EXPECT_LT(max_abs_diff(enc.graph, ref.graph), 1e-12);
  }
}

TEST(Rgcn, NormalisedAdjacencyMatchesDense) {
  const auto vocab = Vocabulary::organic();
  for (const auto& g : random_graphs(20, 9, 4)) {
    for (std::size_t r = 0; r < vocab.edge_categories(); ++r) {
      const auto view = PrefixView::complete(g.size());
      const Tensor sparse = normalized_adjacency(g, view, r).dense();
      const Dense ref = dense_adjacency(g, g.size(), r, view);
      for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = 0; b < g.size(); ++b) EXPECT_NEAR(sparse(a, b), ref[a][b], 1e-15);
    }
  }
}

TEST(Rgcn, RegularGraphRowsAreUniform) {
  // 6-cycle of single bonds: every node has degree 2, so D~ = 3 I and each
  // non-zero entry of the single-bond relation is 1/3.
  MolecularGraph g(std::vector<std::size_t>(6, 0), 3);
  for (std::size_t a = 0; a < 6; ++a) g.set_edge(a, (a + 1) % 6, 0);
  const Tensor adj = normalized_adjacency(g, PrefixView::complete(6), 0).dense();
  for (std::size_t a = 0; a < 6; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < 6; ++b) {
      row += adj(a, b);
      if (adj(a, b) != 0.0) {
        EXPECT_NEAR(adj(a, b), 1.0 / 3.0, 1e-15);
      }
    }
    EXPECT_NEAR(row, 1.0, 1e-15);
  }
}

TEST(Rgcn, PermutationEquivariance) {
  Fixture f(5);
  Rng rng(6);
  for (const auto& g : random_graphs(20, 6, 7)) {
    std::vector<std::size_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = encode(f.store, f.layout, g);
    const auto b = encode(f.store, f.layout, permute(g, perm));
    for (std::size_t k = 0; k < g.size(); ++k)
      for (std::size_t c = 0; c < a.nodes.cols(); ++c) EXPECT_NEAR(b.nodes(k, c), a.nodes(perm[k], c), 1e-12);
    EXPECT_LT(max_abs_diff(a.graph, b.graph), 1e-12);
  }
}

TEST(Rgcn, ZeroWeightsLeaveOnlyTheShift) {
  Fixture f(8);
  for (const auto& layer : f.layout.weights)
    for (auto w : layer) f.store[w].value.fill(0.0);
  const auto g = random_graphs(1, 8, 9).front();
  const auto enc = encode(f.store, f.layout, g);
  for (std::size_t c = 0; c < enc.nodes.cols(); ++c) {
    const double shift = -f.store[f.layout.bn_mean].value[c] /
                             std::sqrt(f.store[f.layout.bn_var].value[c] + 1e-5) *
                             f.store[f.layout.bn_gamma].value[c] +
                         f.store[f.layout.bn_beta].value[c];
    for (std::size_t a = 0; a < g.size(); ++a) EXPECT_NEAR(enc.nodes(a, c), shift, 1e-15);
    EXPECT_NEAR(enc.graph(0, c), shift * static_cast<double>(g.size()), 1e-13);
  }
}

TEST(Rgcn, PrefixBatchEqualsPerPrefixEncodingExactly) {
  Fixture f(10);
  for (const auto& g : random_graphs(10, 10, 11)) {
    std::vector<std::size_t> sizes(g.size());
    std::iota(sizes.begin(), sizes.end(), 1);
    const auto batch = encode_prefix_batch(f.store, f.layout, g, sizes);
    for (std::size_t t = 0; t < sizes.size(); ++t) {
      const auto single = encode(f.store, f.layout, g.prefix(sizes[t]));
      EXPECT_EQ(batch[t].nodes, single.nodes);
      EXPECT_EQ(batch[t].graph, single.graph);
    }
    const std::vector<std::size_t> full{g.size()};
    EXPECT_EQ(encode_prefix_batch(f.store, f.layout, g, full).front().nodes, encode(f.store, f.layout, g).nodes);
  }
}

TEST(Rgcn, PrefixBatchRejectsBadSizes) {
  Fixture f(12);
  const auto g = random_graphs(1, 6, 13).front();
  const std::vector<std::size_t> decreasing{2, 1};
  const std::vector<std::size_t> too_big{g.size() + 1};
  EXPECT_THROW(encode_prefix_batch(f.store, f.layout, g, decreasing), ShapeError);
  EXPECT_THROW(encode_prefix_batch(f.store, f.layout, g, too_big), ShapeError);
}

TEST(Rgcn, MaskingIgnoresLaterNodesAndUnknownEdges) {
  Fixture f(14);
  Rng rng(15);
  for (const auto& g : random_graphs(10, 10, 16)) {
    if (g.size() < 4) continue;
    const std::size_t i = g.size() - 2;
    // Changing the type of a later node leaves prefix i untouched.
    MolecularGraph changed = g;
    changed.set_node_type(g.size() - 1, (g.node_type(g.size() - 1) + 1) % 3);
    const std::vector<std::size_t> sizes{i};
    EXPECT_EQ(encode_prefix_batch(f.store, f.layout, g, sizes)[0].nodes,
              encode_prefix_batch(f.store, f.layout, changed, sizes)[0].nodes);

    // Edge step (last, j): bonds from the newest node to j and beyond are unseen.
    const std::size_t last = i - 1, j = uniform_index(rng, last);
    const PrefixView view{i, j};
    MolecularGraph rewired = g;
    for (std::size_t b = j; b < last; ++b) rewired.set_edge(last, b, uniform_index(rng, 4));
    auto run = [&](const MolecularGraph& graph) {
      Tape tape;
      ParamBinding binding(tape, f.store, false);
      return encode_prefixes(binding, f.layout, graph, std::span(&view, 1)).node_rows.value();
    };
    EXPECT_EQ(run(g), run(rewired));
    EXPECT_LT(max_abs_diff(run(g), dense_encode(f.store, f.layout, g, view).nodes), 1e-12);
  }
}

TEST(Rgcn, DimensionMismatchIsAnError) {
  Fixture f(17);
  MolecularGraph g({5}, 3);
  EXPECT_THROW(encode(f.store, f.layout, g), ShapeError);
  EXPECT_THROW(encode(f.store, f.layout, MolecularGraph(3)), ShapeError);
}

TEST(Rgcn, ConfigSwitchDropsNoEdgeRelation) {
  Fixture with(18);
  Fixture without(18, config(2, 4, false));
  EXPECT_EQ(with.layout.relations, 4u);
  EXPECT_EQ(without.layout.relations, 3u);
  EXPECT_EQ(without.layout.weights.size(), 2u);
}
