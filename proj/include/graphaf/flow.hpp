#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphaf/autodiff.hpp"
#include "graphaf/dequantize.hpp"
#include "graphaf/graph.hpp"
#include "graphaf/params.hpp"
#include "graphaf/random.hpp"
#include "graphaf/rgcn.hpp"

namespace graphaf {

struct ModelConfig {
  RgcnConfig rgcn;
  std::size_t max_size = 16;
  std::size_t window = 12;  // edges further back than this are always no-edge
};

// Two affine layers with tanh in between.
struct MlpParams {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

// All learnable tensors: the R-GCN plus mean and scale heads for nodes
// (k -> d) and edges (3k -> b+1). The last layer of every head starts at
// zero, so a fresh model is the identity flow (mu = 0, alpha = 1).
class GraphAF {
 public:
  GraphAF(Vocabulary vocab, ModelConfig config, Rng& init_rng);

  const Vocabulary& vocab() const { return vocab_; }
  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const RgcnParams& rgcn() const { return rgcn_; }
  const MlpParams& node_mu() const { return node_mu_; }
  const MlpParams& node_scale() const { return node_scale_; }
  const MlpParams& edge_mu() const { return edge_mu_; }
  const MlpParams& edge_scale() const { return edge_scale_; }

  // Effective dependency window for an n-node graph.
  std::size_t window_for(std::size_t n) const { return std::min(config_.window, n ? n - 1 : 0); }

  // Overwrites every trainable tensor (including the zero-initialised head
  // outputs) with U(-scale, scale) draws; used for tests and audits.
  void randomize(Rng& rng, double scale);

 private:
  Vocabulary vocab_;
  ModelConfig config_;
  ParamStore params_;
  RgcnParams rgcn_;
  MlpParams node_mu_, node_scale_, edge_mu_, edge_scale_;
};

// alpha = exp(clamp(s, -7, 7)).
constexpr double kLogScaleLimit = 7.0;
Var positivity_map(Var raw);
double positivity_map(double raw);

enum class StepKind { Node, Edge };

// One latent step: node i, or edge (i, j) with j < i.
struct Step {
  StepKind kind = StepKind::Node;
  std::size_t i = 0;
  std::size_t j = 0;

  bool operator==(const Step&) const = default;
};

// eps_1, eps_2, eps_21, eps_3, eps_31, eps_32, ... restricted to edges with
// i - j <= window.
std::vector<Step> generation_steps(std::size_t n, std::size_t window);
std::size_t step_dimension(const Step& step, const Vocabulary& vocab);
// Prefix a step conditions on: G_i for node i; G_i plus X_i and A_{i,<j} for edge (i, j).
PrefixView step_prefix(const Step& step);

struct Conditionals {
  std::vector<std::size_t> node_steps;  // indices into the step list
  std::vector<std::size_t> edge_steps;
  Var node_mu, node_alpha;  // |node_steps| x d (invalid when empty)
  Var edge_mu, edge_alpha;  // |edge_steps| x (b+1)
  EncodedPrefixes encoded;
};

// Gaussian parameters of every step given g, from one stacked encoding.
Conditionals compute_conditionals(const ParamBinding& params, const GraphAF& model,
                                  const MolecularGraph& g, std::span<const Step> steps);

// (mu, alpha) of a single step, without gradients.
struct StepGaussian {
  std::vector<double> mu;
  std::vector<double> alpha;
};
StepGaussian step_conditional(const GraphAF& model, const MolecularGraph& g, const Step& step);

// Node head on a pooled embedding and edge head on (h, H_i, H_j).
std::pair<Var, Var> node_conditional(const ParamBinding& params, const GraphAF& model, Var graph_embedding);
std::pair<Var, Var> edge_conditional(const ParamBinding& params, const GraphAF& model, Var graph_embedding,
                                     Var node_i, Var node_j);

// z = eps * alpha + mu and its inverse.
std::vector<double> forward_transform(std::span<const double> eps, std::span<const double> mu,
                                      std::span<const double> alpha);
std::vector<double> inverse_transform(std::span<const double> z, std::span<const double> mu,
                                      std::span<const double> alpha);

struct LogLik {
  double total = 0.0;
  std::vector<double> node_terms;  // per node step
  std::vector<double> edge_terms;  // per in-window edge step, generation order
  double base = 0.0;               // sum of standard-normal log densities of eps
  double log_det = 0.0;            // sum of log(1 / alpha)
};

// Throws DataError unless g is breadth-first ordered with every bond inside
// the model's window.
void require_window_ordered(const GraphAF& model, const MolecularGraph& g);

// Log-likelihood of a dequantized graph on a tape (differentiable). When
// `detail` is set it receives the per-step breakdown.
Var log_likelihood_on_tape(const ParamBinding& params, const GraphAF& model, const MolecularGraph& g,
                           const DequantizedGraph& z, LogLik* detail = nullptr,
                           EncodedPrefixes* encoded = nullptr);

// Dequantizes with fresh noise from rng and evaluates all steps in one pass.
LogLik log_likelihood_parallel(const GraphAF& model, const MolecularGraph& g, Rng& rng);
LogLik log_likelihood_parallel(const GraphAF& model, const MolecularGraph& g, const DequantizedGraph& z);
// Reference evaluation: one encoding per step, strictly in generation order.
LogLik log_likelihood_sequential(const GraphAF& model, const MolecularGraph& g, const DequantizedGraph& z);

struct LatentSeq {
  std::vector<Step> steps;
  std::vector<std::vector<double>> eps;
};

// z -> eps for all steps of quantize(z), evaluated in parallel.
LatentSeq flow_inverse(const GraphAF& model, const DequantizedGraph& z);

struct Decoded {
  MolecularGraph graph;
  DequantizedGraph z;  // edge slots outside the window hold no-edge one-hots
};

// eps -> z autoregressively for a fixed node count, decoding each step by
// argmax before conditioning the next (no valency check, no termination).
Decoded flow_forward(const GraphAF& model, const LatentSeq& latent, std::size_t n);

}  // namespace graphaf
