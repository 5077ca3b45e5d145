#include "graphaf/rgcn.hpp"

#include <cmath>

#include "graphaf/error.hpp"

namespace graphaf {

RgcnParams RgcnParams::create(ParamStore& store, const RgcnConfig& config, std::size_t node_types,
                              std::size_t edge_categories, Rng& rng) {
  if (config.layers < 1 || config.width < 1) throw UsageError("R-GCN needs layers >= 1 and width >= 1");
  RgcnParams p;
  p.config = config;
  p.node_types = node_types;
  p.relations = config.no_edge_relation ? edge_categories : edge_categories - 1;
  const std::size_t k = config.width;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t fan_in = l == 0 ? node_types : k;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + k));
    std::vector<std::size_t> layer;
    for (std::size_t r = 0; r < p.relations; ++r) {
      Tensor w = Tensor::matrix(fan_in, k);
      for (auto& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
      layer.push_back(store.add("rgcn.layer" + std::to_string(l) + ".rel" + std::to_string(r), std::move(w)));
    }
    p.weights.push_back(std::move(layer));
  }
  p.bn_gamma = store.add("rgcn.bn.gamma", Tensor({1, k}, 1.0));
  p.bn_beta = store.add("rgcn.bn.beta", Tensor({1, k}, 0.0));
  p.bn_mean = store.add("rgcn.bn.running_mean", Tensor({1, k}, 0.0), false);
  p.bn_var = store.add("rgcn.bn.running_var", Tensor({1, k}, 1.0), false);
  return p;
}

bool PrefixView::known(std::size_t a, std::size_t b) const {
  if (a >= nodes || b >= nodes || a == b) return false;
  const std::size_t last = nodes - 1;
  if (a == last) return b < known_last;
  if (b == last) return a < known_last;
  return true;
}

SparseMatrix normalized_adjacency(const MolecularGraph& g, const PrefixView& prefix,
                                  std::size_t relation, std::size_t row_offset) {
  const std::size_t n = prefix.nodes;
  std::vector<double> degree(n, 1.0);  // self loop
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (prefix.known(a, b) && g.edge(a, b) == relation) degree[a] += 1.0;
    }
  }
  SparseMatrix m;
  m.cols = row_offset + n;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || (prefix.known(a, b) && g.edge(a, b) == relation)) {
        m.push(row_offset + b, 1.0 / std::sqrt(degree[a] * degree[b]));
      }
    }
    m.end_row();
  }
  return m;
}

namespace {

// Appends the rows of `block` (whose columns are already offset) to `out`.
void append_rows(SparseMatrix& out, const SparseMatrix& block) {
  for (std::size_t r = 0; r < block.rows; ++r) {
    for (std::size_t k = block.row_ptr[r]; k < block.row_ptr[r + 1]; ++k) {
      out.push(block.col_index[k], block.values[k]);
    }
    out.end_row();
  }
}

}  // namespace

EncodedPrefixes encode_prefixes(const ParamBinding& params, const RgcnParams& layout,
                                const MolecularGraph& g, std::span<const PrefixView> prefixes) {
  Tape& tape = params.tape();
  const ParamStore& store = params.store();
  EncodedPrefixes out;
  out.offsets.push_back(0);
  for (const auto& p : prefixes) {
    if (p.nodes > g.size()) throw ShapeError("prefix larger than graph");
    out.offsets.push_back(out.offsets.back() + p.nodes);
  }
  const std::size_t total = out.offsets.back();

  Tensor features = Tensor::matrix(total, layout.node_types);
  for (std::size_t p = 0; p < prefixes.size(); ++p) {
    for (std::size_t a = 0; a < prefixes[p].nodes; ++a) {
      const auto type = g.node_type(a);
      if (type >= layout.node_types) throw ShapeError("node type exceeds encoder input width");
      features(out.offsets[p] + a, type) = 1.0;
    }
  }

  std::vector<std::shared_ptr<const SparseMatrix>> adjacency;
  for (std::size_t r = 0; r < layout.relations; ++r) {
    auto m = std::make_shared<SparseMatrix>();
    m->cols = total;
    for (std::size_t p = 0; p < prefixes.size(); ++p) {
      append_rows(*m, normalized_adjacency(g, prefixes[p], r, out.offsets[p]));
    }
    adjacency.push_back(std::move(m));
  }

  Var h = tape.constant(std::move(features));
  const double inv_relations = 1.0 / static_cast<double>(layout.relations);
  for (std::size_t l = 0; l < layout.weights.size(); ++l) {
    Var agg;
    for (std::size_t r = 0; r < layout.relations; ++r) {
      Var message = ad::relu(ad::spmm(adjacency[r], ad::matmul(h, params[layout.weights[l][r]])));
      agg = r == 0 ? message : ad::add(agg, message);
    }
    h = ad::scale(agg, inv_relations);
  }
  out.pre_norm = h;
  out.node_rows = ad::batch_norm_eval(h, params[layout.bn_gamma], params[layout.bn_beta],
                                      store[layout.bn_mean].value, store[layout.bn_var].value,
                                      layout.config.batch_norm);
  out.graph = ad::segment_sum(out.node_rows, out.offsets);
  return out;
}

NodeEmbeddings encode(const ParamStore& store, const RgcnParams& layout, const MolecularGraph& prefix) {
  if (prefix.empty()) throw ShapeError("encode needs a non-empty prefix");
  Tape tape;
  ParamBinding binding(tape, store, false);
  const PrefixView view = PrefixView::complete(prefix.size());
  auto enc = encode_prefixes(binding, layout, prefix, std::span(&view, 1));
  return {enc.node_rows.value(), enc.graph.value()};
}

std::vector<NodeEmbeddings> encode_prefix_batch(const ParamStore& store, const RgcnParams& layout,
                                                const MolecularGraph& g,
                                                std::span<const std::size_t> prefix_sizes) {
  std::vector<PrefixView> views;
  for (std::size_t k = 0; k < prefix_sizes.size(); ++k) {
    if (prefix_sizes[k] > g.size()) throw ShapeError("prefix size exceeds graph size");
    if (k && prefix_sizes[k] <= prefix_sizes[k - 1]) throw ShapeError("prefix sizes must increase");
    views.push_back(PrefixView::complete(prefix_sizes[k]));
  }
  Tape tape;
  ParamBinding binding(tape, store, false);
  auto enc = encode_prefixes(binding, layout, g, views);
  std::vector<NodeEmbeddings> out;
  const Tensor& rows = enc.node_rows.value();
  const Tensor& graphs = enc.graph.value();
  for (std::size_t p = 0; p < views.size(); ++p) {
    NodeEmbeddings e;
    e.nodes = Tensor::matrix(views[p].nodes, rows.cols());
    for (std::size_t a = 0; a < views[p].nodes; ++a) {
      for (std::size_t c = 0; c < rows.cols(); ++c) e.nodes(a, c) = rows(enc.offsets[p] + a, c);
    }
    e.graph = Tensor::row(graphs.row_span(p));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace graphaf
