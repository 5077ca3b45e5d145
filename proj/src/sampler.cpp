#include "graphaf/sampler.hpp"

#include <cmath>
#include <ostream>

#include "graphaf/action_prob.hpp"
#include "graphaf/error.hpp"
#include "graphaf/parallel.hpp"

namespace graphaf {

void SamplerConfig::validate() const {
  if (max_size < 1) throw UsageError("sampler max_size must be >= 1");
  if (max_resample < 1) throw UsageError("sampler max_resample must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw UsageError("sampler temperature must be >= 0");
}

std::string to_string(Termination t) { return t == Termination::MaxSize ? "max-size" : "no-bonds"; }

namespace {

std::vector<double> draw_eps(std::size_t dim, double temperature, Rng& rng) {
  std::vector<double> eps(dim);
  for (auto& e : eps) e = temperature * standard_normal(rng);
  return eps;
}

std::vector<double> scaled(const std::vector<double>& alpha, double temperature) {
  std::vector<double> out(alpha);
  for (auto& a : out) a *= temperature;
  return out;
}

}  // namespace

std::pair<MolecularGraph, SampleTrace> sample_molecule(const GraphAF& model, const SamplerConfig& cfg, Rng& rng,
                                                       const SampleOptions& options) {
  cfg.validate();
  const auto& vocab = model.vocab();
  const std::size_t no_edge = vocab.bonds.no_edge();
  SampleTrace trace;
  MolecularGraph g = options.seed ? *options.seed : MolecularGraph(no_edge);
  trace.seed_nodes = g.size();
  const bool record = options.record_logprob && cfg.temperature > 0.0;

  auto logprob = [&](const StepGaussian& gauss, std::size_t category, const std::vector<std::uint8_t>& allowed) {
    return action_logprob(gauss.mu, scaled(gauss.alpha, cfg.temperature), category, allowed);
  };

  while (g.size() < cfg.max_size) {
    const std::size_t i = g.size();
    {
      const Step step{StepKind::Node, i, 0};
      const auto gauss = step_conditional(model, g, step);
      StepRecord rec{step, i, draw_eps(gauss.mu.size(), cfg.temperature, rng), 0, 0, false, {}, 0.0};
      rec.category = argmax_category(forward_transform(rec.eps, gauss.mu, gauss.alpha));
      if (record) rec.logprob = logprob(gauss, rec.category, rec.allowed);
      g.add_node(rec.category);
      trace.steps.push_back(std::move(rec));
    }
    const std::size_t first = i > cfg.window ? i - cfg.window : 0;
    bool bonded = false;
    for (std::size_t j = first; j < i; ++j) {
      const Step step{StepKind::Edge, i, j};
      const auto gauss = step_conditional(model, g, step);
      StepRecord rec{step, i + 1, {}, no_edge, 0, false, {}, 0.0};
      if (cfg.valency_check) {
        rec.allowed.resize(vocab.edge_categories());
        for (std::size_t c = 0; c < rec.allowed.size(); ++c) {
          rec.allowed[c] = check_valency(g, vocab.atoms, vocab.bonds, i, j, c) ? 1 : 0;
        }
      }
      for (;;) {
        rec.eps = draw_eps(gauss.mu.size(), cfg.temperature, rng);
        const std::size_t c = argmax_category(forward_transform(rec.eps, gauss.mu, gauss.alpha));
        if (!cfg.valency_check || rec.allowed[c]) {
          rec.category = c;
          break;
        }
        if (++rec.resamples == cfg.max_resample) {
          rec.forced = true;
          rec.category = no_edge;
          break;
        }
      }
      if (record && !rec.forced) rec.logprob = logprob(gauss, rec.category, rec.allowed);
      if (rec.category != no_edge) {
        g.set_edge(i, j, rec.category);
        bonded = true;
      }
      trace.steps.push_back(std::move(rec));
    }
    if (i > 0 && !bonded) {
      trace.generated = g;
      g.remove_last_node();
      trace.termination = Termination::NoBonds;
      return {std::move(g), std::move(trace)};
    }
  }
  trace.generated = g;
  trace.termination = Termination::MaxSize;
  return {std::move(g), std::move(trace)};
}

std::vector<std::pair<MolecularGraph, SampleTrace>> sample_batch(const GraphAF& model, const SamplerConfig& cfg,
                                                                 std::size_t count, std::uint64_t seed,
                                                                 std::size_t threads) {
  std::vector<std::pair<MolecularGraph, SampleTrace>> out(count);
  parallel_for(count, threads, [&](std::size_t k) {
    Rng rng = make_rng(seed, "sampler", k);
    out[k] = sample_molecule(model, cfg, rng);
  });
  return out;
}

MolecularGraph reconstruct(const GraphAF& model, const MolecularGraph& g, Rng& rng) {
  require_window_ordered(model, g);
  const auto z = dequantize(g, model.vocab(), rng);
  const auto latent = flow_inverse(model, z);
  return flow_forward(model, latent, g.size()).graph;
}

void write_trace(std::ostream& out, const SampleTrace& trace, const Vocabulary& vocab) {
  out << "trace steps=" << trace.steps.size() << " seed_nodes=" << trace.seed_nodes
      << " termination=" << to_string(trace.termination) << '\n';
  for (const auto& rec : trace.steps) {
    if (rec.step.kind == StepKind::Node) {
      out << "node " << rec.step.i << " prefix=" << rec.prefix_size << " type=" << vocab.atoms.symbol(rec.category);
    } else {
      out << "edge " << rec.step.i << ' ' << rec.step.j << " prefix=" << rec.prefix_size
          << " order=" << vocab.bonds.order(rec.category) << " resamples=" << rec.resamples;
      if (rec.forced) out << " forced";
    }
    out << " eps=";
    for (std::size_t c = 0; c < rec.eps.size(); ++c) out << (c ? "," : "") << rec.eps[c];
    out << '\n';
  }
}

}  // namespace graphaf
