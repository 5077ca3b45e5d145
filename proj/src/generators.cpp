#include "graphaf/generators.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "graphaf/error.hpp"

namespace graphaf {
namespace {

// Hop distance from `from` to every node (max size_t when unreachable).
std::vector<std::size_t> hop_distances(const MolecularGraph& g, std::size_t from) {
  std::vector<std::size_t> dist(g.size(), std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : g.neighbors(u)) {
      if (dist[v] == std::numeric_limits<std::size_t>::max()) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

MolecularGraph grow_molecule(std::size_t target, const Vocabulary& vocab, Rng& rng) {
  const auto& atoms = vocab.atoms;
  const auto& bonds = vocab.bonds;
  MolecularGraph g(bonds.no_edge());
  g.add_node(uniform_index(rng, atoms.size()));
  while (g.size() < target) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (bond_order_sum(g, bonds, i) < atoms.valence(g.node_type(i))) open.push_back(i);
    }
    if (open.empty()) break;
    const auto anchor = open[uniform_index(rng, open.size())];
    const auto type = uniform_index(rng, atoms.size());
    const int room = std::min(atoms.valence(g.node_type(anchor)) - bond_order_sum(g, bonds, anchor),
                              atoms.valence(type));
    std::vector<std::size_t> allowed;
    for (std::size_t c = 0; c < bonds.size(); ++c) {
      if (bonds.order(c) <= room) allowed.push_back(c);
    }
    if (allowed.empty()) break;
    const auto node = g.add_node(type);
    g.set_edge(node, anchor, allowed[uniform_index(rng, allowed.size())]);
  }
  // Ring closure between atoms 2..5 hops apart (rings of size 3..6).
  constexpr double kRingProbability = 0.3;
  const auto single = bonds.category_of(bonds.orders().front());
  if (g.size() >= 3 && uniform01(rng) < kRingProbability) {
    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t a = 0; a < g.size(); ++a) {
      const auto dist = hop_distances(g, a);
      for (std::size_t b = a + 1; b < g.size(); ++b) {
        if (dist[b] >= 2 && dist[b] <= 5 && check_valency(g, atoms, bonds, a, b, *single)) {
          candidates.emplace_back(a, b);
        }
      }
    }
    if (!candidates.empty()) {
      const auto [a, b] = candidates[uniform_index(rng, candidates.size())];
      g.set_edge(a, b, *single);
    }
  }
  return g;
}

}  // namespace

std::vector<MolecularGraph> gen_synthetic_molecules(std::size_t count, std::size_t max_atoms,
                                                    const Vocabulary& vocab, Rng& rng) {
  if (max_atoms < 1) throw UsageError("max_atoms must be >= 1");
  const std::size_t lo = (max_atoms + 1) / 2;
  std::vector<MolecularGraph> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t target = lo + uniform_index(rng, max_atoms - lo + 1);
    out.push_back(grow_molecule(target, vocab, rng));
  }
  return out;
}

std::vector<MolecularGraph> gen_community_graphs(std::size_t count, std::size_t nodes_per_community,
                                                 double p_intra, double p_inter, Rng& rng,
                                                 std::size_t max_attempts) {
  if (p_intra < 0 || p_intra > 1 || p_inter < 0 || p_inter > 1) {
    throw UsageError("community probabilities must lie in [0, 1]");
  }
  if (nodes_per_community < 1) throw UsageError("nodes_per_community must be >= 1");
  const std::size_t n = 2 * nodes_per_community;
  std::vector<MolecularGraph> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    bool done = false;
    for (std::size_t attempt = 0; attempt < max_attempts && !done; ++attempt) {
      MolecularGraph g(std::vector<std::size_t>(n, 0), 1);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          const bool same = (i < nodes_per_community) == (j < nodes_per_community);
          if (uniform01(rng) < (same ? p_intra : p_inter)) g.set_edge(i, j, 0);
        }
      }
      if (is_connected(g)) {
        out.push_back(std::move(g));
        done = true;
      }
    }
    if (!done) {
      throw DataError("no connected community graph after " + std::to_string(max_attempts) +
                      " draws (p_intra=" + std::to_string(p_intra) +
                      ", p_inter=" + std::to_string(p_inter) + ")");
    }
  }
  return out;
}

std::vector<MolecularGraph> gen_erdos_renyi(std::size_t count, std::size_t n, double p, Rng& rng) {
  if (p < 0 || p > 1) throw UsageError("edge probability must lie in [0, 1]");
  std::vector<MolecularGraph> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    MolecularGraph g(std::vector<std::size_t>(n, 0), 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (uniform01(rng) < p) g.set_edge(i, j, 0);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace graphaf
