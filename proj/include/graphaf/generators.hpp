#pragma once

#include <cstddef>
#include <vector>

#include "graphaf/graph.hpp"
#include "graphaf/random.hpp"

namespace graphaf {

// Connected molecules grown atom by atom; every bond respects the valences of
// both endpoints, so all outputs pass the valency audit. Sizes are drawn
// uniformly from [ceil(max_atoms / 2), max_atoms]; a few small rings are
// closed with single bonds.
std::vector<MolecularGraph> gen_synthetic_molecules(std::size_t count, std::size_t max_atoms,
                                                    const Vocabulary& vocab, Rng& rng);

// Two equally sized communities with intra/inter edge probabilities, single
// node and edge type. Disconnected draws are resampled; throws DataError when
// no connected graph appears within `max_attempts` draws.
std::vector<MolecularGraph> gen_community_graphs(std::size_t count, std::size_t nodes_per_community,
                                                 double p_intra, double p_inter, Rng& rng,
                                                 std::size_t max_attempts = 10000);

// G(n, p) graphs with the generic vocabulary; connectivity is not enforced.
std::vector<MolecularGraph> gen_erdos_renyi(std::size_t count, std::size_t n, double p, Rng& rng);

}  // namespace graphaf
