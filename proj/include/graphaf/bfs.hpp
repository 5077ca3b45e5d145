#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "graphaf/graph.hpp"
#include "graphaf/random.hpp"

namespace graphaf {

struct BfsOrder {
  std::vector<std::size_t> permutation;  // new index -> old index
  std::vector<std::size_t> depths;       // BFS depth of each new index
};

// Relabels g in breadth-first order from `start`. Unvisited neighbours of
// each expanded node are enqueued in uniformly random order. Throws DataError
// naming an unreachable node when g is disconnected.
std::pair<MolecularGraph, BfsOrder> bfs_reorder(const MolecularGraph& g, std::size_t start,
                                                Rng& rng);

// Same, with a uniformly random start node.
std::pair<MolecularGraph, BfsOrder> random_bfs_reorder(const MolecularGraph& g, Rng& rng);

// Largest i - j over bonds (i, j), i > j, after relabeling g by `order`.
std::size_t max_dependency_distance(const MolecularGraph& g, const BfsOrder& order);

// Largest i - j over bonds of a graph taken in its current node order.
std::size_t max_bond_span(const MolecularGraph& g);

// True iff the current node order is a breadth-first order of g from node 0
// (for some tie-breaking). Requires g connected.
bool is_bfs_ordered(const MolecularGraph& g);

}  // namespace graphaf
