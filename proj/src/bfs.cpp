#include "graphaf/bfs.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "graphaf/error.hpp"

namespace graphaf {

std::pair<MolecularGraph, BfsOrder> bfs_reorder(const MolecularGraph& g, std::size_t start,
                                                Rng& rng) {
  const std::size_t n = g.size();
  if (start >= n) throw DataError("BFS start node out of range");
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> depth(n, kUnseen);
  BfsOrder order;
  order.permutation.reserve(n);
  std::deque<std::size_t> queue{start};
  depth[start] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    order.permutation.push_back(u);
    std::vector<std::size_t> fresh;
    for (std::size_t v = 0; v < n; ++v) {
      if (v != u && depth[v] == kUnseen && g.has_bond(u, v)) fresh.push_back(v);
    }
    // Fisher-Yates with our own index draw so the order is library independent.
    for (std::size_t k = fresh.size(); k > 1; --k) {
      std::swap(fresh[k - 1], fresh[uniform_index(rng, k)]);
    }
    for (auto v : fresh) {
      depth[v] = depth[u] + 1;
      queue.push_back(v);
    }
  }
  if (order.permutation.size() != n) {
    for (std::size_t v = 0; v < n; ++v) {
      if (depth[v] == kUnseen) {
        throw DataError("graph is disconnected: node " + std::to_string(v) +
                        " is unreachable from node " + std::to_string(start));
      }
    }
  }
  order.depths.reserve(n);
  for (auto old : order.permutation) order.depths.push_back(depth[old]);
  return {permute(g, order.permutation), std::move(order)};
}

std::pair<MolecularGraph, BfsOrder> random_bfs_reorder(const MolecularGraph& g, Rng& rng) {
  if (g.empty()) return {g, BfsOrder{}};
  return bfs_reorder(g, uniform_index(rng, g.size()), rng);
}

std::size_t max_dependency_distance(const MolecularGraph& g, const BfsOrder& order) {
  const std::size_t n = g.size();
  std::vector<std::size_t> position(n);
  for (std::size_t k = 0; k < n; ++k) position[order.permutation.at(k)] = k;
  std::size_t worst = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      if (!g.has_bond(a, b)) continue;
      const auto pa = position[a], pb = position[b];
      worst = std::max(worst, pa > pb ? pa - pb : pb - pa);
    }
  }
  return worst;
}

std::size_t max_bond_span(const MolecularGraph& g) {
  std::size_t worst = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (g.has_bond(i, j)) worst = std::max(worst, i - j);
    }
  }
  return worst;
}

bool is_bfs_ordered(const MolecularGraph& g) {
  // Node k > 0 must have its smallest-index neighbour before it, and those
  // parents must appear in non-decreasing order.
  std::size_t last_parent = 0;
  for (std::size_t k = 1; k < g.size(); ++k) {
    std::size_t parent = k;
    for (std::size_t j = 0; j < k; ++j) {
      if (g.has_bond(k, j)) {
        parent = j;
        break;
      }
    }
    if (parent == k || parent < last_parent) return false;
    last_parent = parent;
  }
  return true;
}

}  // namespace graphaf
