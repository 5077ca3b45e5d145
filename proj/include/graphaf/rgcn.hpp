#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphaf/autodiff.hpp"
#include "graphaf/graph.hpp"
#include "graphaf/params.hpp"
#include "graphaf/random.hpp"

namespace graphaf {

struct RgcnConfig {
  std::size_t layers = 3;
  std::size_t width = 32;
  // Give the virtual no-edge category its own relation weights.
  bool no_edge_relation = true;
  BatchNormConfig batch_norm;
};

// Indices of the encoder tensors inside a ParamStore.
struct RgcnParams {
  RgcnConfig config;
  std::size_t node_types = 0;
  std::size_t relations = 0;
  std::vector<std::vector<std::size_t>> weights;  // [layer][relation]
  std::size_t bn_gamma = 0;
  std::size_t bn_beta = 0;
  std::size_t bn_mean = 0;  // running statistics (buffers)
  std::size_t bn_var = 0;

  // Registers Glorot-uniform relation weights and identity batch norm.
  static RgcnParams create(ParamStore& store, const RgcnConfig& config, std::size_t node_types,
                           std::size_t edge_categories, Rng& rng);
};

// The first `nodes` nodes of a graph in generation order. The newest node
// (index nodes-1) only knows its edges to nodes below `known_last`; pairs it
// has not generated yet are masked out of every relation.
struct PrefixView {
  std::size_t nodes = 0;
  std::size_t known_last = 0;

  static PrefixView complete(std::size_t nodes) { return {nodes, nodes ? nodes - 1 : 0}; }
  bool known(std::size_t a, std::size_t b) const;
};

struct EncodedPrefixes {
  Var pre_norm;   // stacked H^L rows of all prefixes, before batch norm
  Var node_rows;  // same rows after batch norm
  Var graph;      // one sum-pooled row per prefix
  std::vector<std::size_t> offsets;  // row range of prefix p: [offsets[p], offsets[p+1])
};

// Symmetrically normalised (E_r + I) of a prefix for relation r, as the
// block used by the encoder.
SparseMatrix normalized_adjacency(const MolecularGraph& g, const PrefixView& prefix,
                                  std::size_t relation, std::size_t row_offset = 0);

// Encodes every prefix in one stacked pass. Rows of different prefixes never
// interact, so results equal per-prefix encoding exactly.
EncodedPrefixes encode_prefixes(const ParamBinding& params, const RgcnParams& layout,
                                const MolecularGraph& g, std::span<const PrefixView> prefixes);

struct NodeEmbeddings {
  Tensor nodes;  // n x k
  Tensor graph;  // 1 x k
};

NodeEmbeddings encode(const ParamStore& store, const RgcnParams& layout, const MolecularGraph& prefix);

// Embeddings of the complete prefixes of g with the given sizes.
std::vector<NodeEmbeddings> encode_prefix_batch(const ParamStore& store, const RgcnParams& layout,
                                                const MolecularGraph& g,
                                                std::span<const std::size_t> prefix_sizes);

}  // namespace graphaf
