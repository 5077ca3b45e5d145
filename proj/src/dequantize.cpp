#include "graphaf/dequantize.hpp"

#include <cmath>

#include "graphaf/error.hpp"

namespace graphaf {

DequantizedGraph dequantize(const MolecularGraph& g, const Vocabulary& vocab, Rng& rng) {
  const std::size_t n = g.size();
  const std::size_t d = vocab.node_types();
  const std::size_t e = vocab.edge_categories();
  DequantizedGraph z;
  z.n = n;
  z.no_edge = vocab.bonds.no_edge();
  z.nodes = Tensor::matrix(n, d);
  z.edges = Tensor::matrix(n * (n > 0 ? n - 1 : 0) / 2, e);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      z.nodes(i, c) = (g.node_type(i) == c ? 1.0 : 0.0) + uniform01(rng);
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const auto row = DequantizedGraph::slot(i, j);
      for (std::size_t c = 0; c < e; ++c) {
        z.edges(row, c) = (g.edge(i, j) == c ? 1.0 : 0.0) + uniform01(rng);
      }
    }
  }
  return z;
}

std::size_t argmax_category(std::span<const double> values) {
  if (values.empty()) throw NumericalError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (std::isnan(values[c])) throw NumericalError("NaN entry in argmax at index " + std::to_string(c));
    if (values[c] > values[best]) best = c;
  }
  return best;
}

MolecularGraph quantize(const DequantizedGraph& z) {
  std::vector<std::size_t> types(z.n);
  for (std::size_t i = 0; i < z.n; ++i) types[i] = argmax_category(z.node(i));
  MolecularGraph g(std::move(types), z.no_edge);
  for (std::size_t i = 1; i < z.n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const auto cat = argmax_category(z.edge(i, j));
      if (cat != z.no_edge) g.set_edge(i, j, cat);
    }
  }
  return g;
}

}  // namespace graphaf
