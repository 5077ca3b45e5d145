#include "graphaf/flow.hpp"

#include <algorithm>
#include <cmath>

#include "graphaf/bfs.hpp"
#include "graphaf/error.hpp"

namespace graphaf {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

MlpParams make_mlp(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                   std::size_t out, Rng& rng) {
  MlpParams p;
  Tensor w1 = Tensor::matrix(in, hidden);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + hidden));
  for (auto& v : w1.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  p.w1 = store.add(name + ".w1", std::move(w1));
  p.b1 = store.add(name + ".b1", Tensor({1, hidden}, 0.0));
  p.w2 = store.add(name + ".w2", Tensor({hidden, out}, 0.0));
  p.b2 = store.add(name + ".b2", Tensor({1, out}, 0.0));
  return p;
}

Var apply_mlp(const ParamBinding& params, const MlpParams& mlp, Var x) {
  Var hidden = ad::tanh(ad::add_row(ad::matmul(x, params[mlp.w1]), params[mlp.b1]));
  return ad::add_row(ad::matmul(hidden, params[mlp.w2]), params[mlp.b2]);
}

Tensor stack_rows(const std::vector<std::span<const double>>& rows, std::size_t cols) {
  Tensor out = Tensor::matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), out.data() + r * cols);
  return out;
}

void accumulate_detail(const Tensor& z, const Tensor& mu, const Tensor& alpha, const Tensor& logpdf,
                       std::vector<double>& terms, LogLik& detail) {
  const std::size_t cols = z.cols();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double term = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t k = r * cols + c;
      term += logpdf[k];
      const double eps = (z[k] - mu[k]) / alpha[k];
      detail.base += -kHalfLog2Pi - 0.5 * eps * eps;
      detail.log_det -= std::log(alpha[k]);
    }
    terms.push_back(term);
  }
}

}  // namespace

GraphAF::GraphAF(Vocabulary vocab, ModelConfig config, Rng& init_rng)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.max_size < 1) throw UsageError("max_size must be >= 1");
  const std::size_t k = config_.rgcn.width;
  const std::size_t d = vocab_.node_types();
  const std::size_t e = vocab_.edge_categories();
  rgcn_ = RgcnParams::create(params_, config_.rgcn, d, e, init_rng);
  node_mu_ = make_mlp(params_, "node_mu", k, k, d, init_rng);
  node_scale_ = make_mlp(params_, "node_scale", k, k, d, init_rng);
  edge_mu_ = make_mlp(params_, "edge_mu", 3 * k, k, e, init_rng);
  edge_scale_ = make_mlp(params_, "edge_scale", 3 * k, k, e, init_rng);
}

void GraphAF::randomize(Rng& rng, double scale) {
  for (auto& p : params_) {
    if (!p.trainable) continue;
    for (auto& v : p.value.values()) v = (2.0 * uniform01(rng) - 1.0) * scale;
  }
}

Var positivity_map(Var raw) { return ad::exp(ad::clamp(raw, -kLogScaleLimit, kLogScaleLimit)); }

double positivity_map(double raw) { return std::exp(std::clamp(raw, -kLogScaleLimit, kLogScaleLimit)); }

std::vector<Step> generation_steps(std::size_t n, std::size_t window) {
  std::vector<Step> steps;
  for (std::size_t i = 0; i < n; ++i) {
    steps.push_back({StepKind::Node, i, 0});
    const std::size_t first = i > window ? i - window : 0;
    for (std::size_t j = first; j < i; ++j) steps.push_back({StepKind::Edge, i, j});
  }
  return steps;
}

std::size_t step_dimension(const Step& step, const Vocabulary& vocab) {
  return step.kind == StepKind::Node ? vocab.node_types() : vocab.edge_categories();
}

PrefixView step_prefix(const Step& step) {
  if (step.kind == StepKind::Node) return PrefixView::complete(step.i);
  return {step.i + 1, step.j};
}

std::pair<Var, Var> node_conditional(const ParamBinding& params, const GraphAF& model, Var graph_embedding) {
  return {apply_mlp(params, model.node_mu(), graph_embedding),
          positivity_map(apply_mlp(params, model.node_scale(), graph_embedding))};
}

std::pair<Var, Var> edge_conditional(const ParamBinding& params, const GraphAF& model, Var graph_embedding,
                                     Var node_i, Var node_j) {
  Var input = ad::concat({graph_embedding, node_i, node_j}, 1);
  return {apply_mlp(params, model.edge_mu(), input),
          positivity_map(apply_mlp(params, model.edge_scale(), input))};
}

Conditionals compute_conditionals(const ParamBinding& params, const GraphAF& model,
                                  const MolecularGraph& g, std::span<const Step> steps) {
  std::vector<PrefixView> prefixes;
  prefixes.reserve(steps.size());
  for (const auto& s : steps) {
    if (s.i >= g.size() + (s.kind == StepKind::Node ? 1 : 0) || (s.kind == StepKind::Edge && s.j >= s.i)) {
      throw ShapeError("step out of range for graph");
    }
    prefixes.push_back(step_prefix(s));
  }
  Conditionals out;
  out.encoded = encode_prefixes(params, model.rgcn(), g, prefixes);
  std::vector<std::size_t> node_prefix, edge_prefix, row_i, row_j;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k].kind == StepKind::Node) {
      out.node_steps.push_back(k);
      node_prefix.push_back(k);
    } else {
      out.edge_steps.push_back(k);
      edge_prefix.push_back(k);
      row_i.push_back(out.encoded.offsets[k] + steps[k].i);
      row_j.push_back(out.encoded.offsets[k] + steps[k].j);
    }
  }
  if (!node_prefix.empty()) {
    Var h = ad::gather_rows(out.encoded.graph, node_prefix);
    std::tie(out.node_mu, out.node_alpha) = node_conditional(params, model, h);
  }
  if (!edge_prefix.empty()) {
    Var h = ad::gather_rows(out.encoded.graph, edge_prefix);
    Var hi = ad::gather_rows(out.encoded.node_rows, row_i);
    Var hj = ad::gather_rows(out.encoded.node_rows, row_j);
    std::tie(out.edge_mu, out.edge_alpha) = edge_conditional(params, model, h, hi, hj);
  }
  return out;
}

StepGaussian step_conditional(const GraphAF& model, const MolecularGraph& g, const Step& step) {
  Tape tape;
  ParamBinding binding(tape, model.params(), false);
  auto cond = compute_conditionals(binding, model, g, std::span(&step, 1));
  const Var mu = step.kind == StepKind::Node ? cond.node_mu : cond.edge_mu;
  const Var alpha = step.kind == StepKind::Node ? cond.node_alpha : cond.edge_alpha;
  const auto m = mu.value().values();
  const auto a = alpha.value().values();
  return {std::vector<double>(m.begin(), m.end()), std::vector<double>(a.begin(), a.end())};
}

std::vector<double> forward_transform(std::span<const double> eps, std::span<const double> mu,
                                      std::span<const double> alpha) {
  if (eps.size() != mu.size() || eps.size() != alpha.size()) throw ShapeError("forward_transform size mismatch");
  std::vector<double> z(eps.size());
  for (std::size_t k = 0; k < eps.size(); ++k) z[k] = eps[k] * alpha[k] + mu[k];
  return z;
}

std::vector<double> inverse_transform(std::span<const double> z, std::span<const double> mu,
                                      std::span<const double> alpha) {
  if (z.size() != mu.size() || z.size() != alpha.size()) throw ShapeError("inverse_transform size mismatch");
  std::vector<double> eps(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) eps[k] = (z[k] - mu[k]) * (1.0 / alpha[k]);
  return eps;
}

void require_window_ordered(const GraphAF& model, const MolecularGraph& g) {
  if (!is_bfs_ordered(g)) throw DataError("graph is not in breadth-first order (reorder it first)");
  if (max_bond_span(g) > model.window_for(g.size())) {
    throw DataError("a bond spans " + std::to_string(max_bond_span(g)) + " positions, beyond the window of " +
                    std::to_string(model.window_for(g.size())));
  }
}

Var log_likelihood_on_tape(const ParamBinding& params, const GraphAF& model, const MolecularGraph& g,
                           const DequantizedGraph& z, LogLik* detail, EncodedPrefixes* encoded) {
  if (g.empty()) throw DataError("log-likelihood of an empty graph");
  if (z.n != g.size()) throw ShapeError("dequantized graph does not match graph size");
  const std::size_t window = model.window_for(g.size());
  if (max_bond_span(g) > window) throw DataError("bond outside the dependency window");
  const auto steps = generation_steps(g.size(), window);
  auto cond = compute_conditionals(params, model, g, steps);
  Tape& tape = params.tape();

  std::vector<std::span<const double>> node_rows, edge_rows;
  for (auto k : cond.node_steps) node_rows.push_back(z.node(steps[k].i));
  for (auto k : cond.edge_steps) edge_rows.push_back(z.edge(steps[k].i, steps[k].j));
  Var zn = tape.constant(stack_rows(node_rows, z.nodes.cols()));
  Var node_lp = ad::gaussian_logpdf(zn, cond.node_mu, cond.node_alpha);
  Var total = ad::sum(node_lp);
  Var edge_lp;
  Var ze;
  if (!edge_rows.empty()) {
    ze = tape.constant(stack_rows(edge_rows, z.edges.cols()));
    edge_lp = ad::gaussian_logpdf(ze, cond.edge_mu, cond.edge_alpha);
    total = ad::add(total, ad::sum(edge_lp));
  }
  if (detail) {
    *detail = LogLik{};
    accumulate_detail(zn.value(), cond.node_mu.value(), cond.node_alpha.value(), node_lp.value(),
                      detail->node_terms, *detail);
    if (edge_lp.valid()) {
      accumulate_detail(ze.value(), cond.edge_mu.value(), cond.edge_alpha.value(), edge_lp.value(),
                        detail->edge_terms, *detail);
    }
    detail->total = total.value().item();
  }
  if (encoded) *encoded = cond.encoded;
  return total;
}

LogLik log_likelihood_parallel(const GraphAF& model, const MolecularGraph& g, Rng& rng) {
  require_window_ordered(model, g);
  return log_likelihood_parallel(model, g, dequantize(g, model.vocab(), rng));
}

LogLik log_likelihood_parallel(const GraphAF& model, const MolecularGraph& g, const DequantizedGraph& z) {
  require_window_ordered(model, g);
  Tape tape;
  ParamBinding binding(tape, model.params(), false);
  LogLik out;
  log_likelihood_on_tape(binding, model, g, z, &out);
  return out;
}

LogLik log_likelihood_sequential(const GraphAF& model, const MolecularGraph& g, const DequantizedGraph& z) {
  if (z.n != g.size()) throw ShapeError("dequantized graph does not match graph size");
  LogLik out;
  for (const auto& step : generation_steps(g.size(), model.window_for(g.size()))) {
    const auto gauss = step_conditional(model, g, step);
    const auto zrow = step.kind == StepKind::Node ? z.node(step.i) : z.edge(step.i, step.j);
    const auto eps = inverse_transform(zrow, gauss.mu, gauss.alpha);
    double term = 0.0;
    for (std::size_t c = 0; c < zrow.size(); ++c) {
      const double u = (zrow[c] - gauss.mu[c]) / gauss.alpha[c];
      term += -kHalfLog2Pi - std::log(gauss.alpha[c]) - 0.5 * u * u;
      out.base += -kHalfLog2Pi - 0.5 * eps[c] * eps[c];
      out.log_det -= std::log(gauss.alpha[c]);
    }
    (step.kind == StepKind::Node ? out.node_terms : out.edge_terms).push_back(term);
    out.total += term;
  }
  return out;
}

LatentSeq flow_inverse(const GraphAF& model, const DequantizedGraph& z) {
  const MolecularGraph g = quantize(z);
  LatentSeq out;
  out.steps = generation_steps(g.size(), model.window_for(g.size()));
  out.eps.resize(out.steps.size());
  Tape tape;
  ParamBinding binding(tape, model.params(), false);
  auto cond = compute_conditionals(binding, model, g, out.steps);
  for (std::size_t r = 0; r < cond.node_steps.size(); ++r) {
    const auto k = cond.node_steps[r];
    out.eps[k] = inverse_transform(z.node(out.steps[k].i), cond.node_mu.value().row_span(r),
                                   cond.node_alpha.value().row_span(r));
  }
  for (std::size_t r = 0; r < cond.edge_steps.size(); ++r) {
    const auto k = cond.edge_steps[r];
    out.eps[k] = inverse_transform(z.edge(out.steps[k].i, out.steps[k].j), cond.edge_mu.value().row_span(r),
                                   cond.edge_alpha.value().row_span(r));
  }
  return out;
}

Decoded flow_forward(const GraphAF& model, const LatentSeq& latent, std::size_t n) {
  const auto expected = generation_steps(n, model.window_for(n));
  if (latent.steps != expected || latent.eps.size() != expected.size()) {
    throw ShapeError("latent sequence does not match an " + std::to_string(n) + "-node generation order");
  }
  const auto& vocab = model.vocab();
  Decoded out;
  out.graph = MolecularGraph(vocab.bonds.no_edge());
  out.z.n = n;
  out.z.no_edge = vocab.bonds.no_edge();
  out.z.nodes = Tensor::matrix(n, vocab.node_types());
  out.z.edges = Tensor::matrix(n * (n > 0 ? n - 1 : 0) / 2, vocab.edge_categories(), 0.5);
  for (std::size_t r = 0; r < out.z.edges.rows(); ++r) out.z.edges(r, vocab.bonds.no_edge()) = 1.5;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const Step& step = expected[k];
    const auto gauss = step_conditional(model, out.graph, step);
    const auto z = forward_transform(latent.eps[k], gauss.mu, gauss.alpha);
    const auto category = argmax_category(z);
    if (step.kind == StepKind::Node) {
      std::copy(z.begin(), z.end(), out.z.nodes.data() + step.i * out.z.nodes.cols());
      out.graph.add_node(category);
    } else {
      const auto row = DequantizedGraph::slot(step.i, step.j);
      std::copy(z.begin(), z.end(), out.z.edges.data() + row * out.z.edges.cols());
      if (category != vocab.bonds.no_edge()) out.graph.set_edge(step.i, step.j, category);
    }
  }
  return out;
}

}  // namespace graphaf
