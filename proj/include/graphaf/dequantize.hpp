#pragma once

#include <cstddef>
#include <span>

#include "graphaf/graph.hpp"
#include "graphaf/random.hpp"
#include "graphaf/tensor.hpp"

namespace graphaf {

// Continuous image of a graph: one-hot categories plus U[0,1) noise.
// Edge slot (i, j) with j < i lives in row i(i-1)/2 + j of `edges`.
struct DequantizedGraph {
  std::size_t n = 0;
  std::size_t no_edge = 0;
  Tensor nodes;  // n x d
  Tensor edges;  // n(n-1)/2 x (b+1)

  static std::size_t slot(std::size_t i, std::size_t j) { return i * (i - 1) / 2 + j; }
  std::span<const double> node(std::size_t i) const { return nodes.row_span(i); }
  std::span<const double> edge(std::size_t i, std::size_t j) const { return edges.row_span(slot(i, j)); }
};

DequantizedGraph dequantize(const MolecularGraph& g, const Vocabulary& vocab, Rng& rng);

// Index of the largest entry; ties go to the lowest index. Throws
// NumericalError on NaN.
std::size_t argmax_category(std::span<const double> values);

MolecularGraph quantize(const DequantizedGraph& z);

}  // namespace graphaf
