#include <cmath>
#include <ostream>

#include "graphaf/commands.hpp"
#include "graphaf/error.hpp"
#include "graphaf/generators.hpp"
#include "graphaf/gradcheck.hpp"
#include "graphaf/sampler.hpp"
#include "graphaf/train.hpp"

namespace graphaf {
namespace {

GraphAF small_model(std::uint64_t seed, std::size_t width, double scale) {
  Rng init = make_rng(seed, "selfcheck-init");
  ModelConfig cfg;
  cfg.rgcn.width = width;
  cfg.max_size = 10;
  GraphAF model(Vocabulary::organic(), cfg, init);
  model.randomize(init, scale);
  return model;
}

std::vector<MolecularGraph> ordered_graphs(const GraphAF& model, std::size_t count, std::size_t max_atoms,
                                           std::uint64_t seed) {
  Rng rng = make_rng(seed, "selfcheck-data");
  auto graphs = gen_synthetic_molecules(count, max_atoms, model.vocab(), rng);
  for (auto& g : graphs) g = training_order(model, g, rng);
  return graphs;
}

double invertibility_error(std::uint64_t seed) {
  const GraphAF model = small_model(seed, 16, 0.5);
  double worst = 0.0;
  for (const auto& g : ordered_graphs(model, 5, 8, seed)) {
    Rng rng = make_rng(seed, "selfcheck-noise", g.size());
    const auto z = dequantize(g, model.vocab(), rng);
    const auto latent = flow_inverse(model, z);
    const auto decoded = flow_forward(model, latent, g.size());
    if (!(decoded.graph == g)) return INFINITY;
    for (std::size_t k = 0; k < latent.steps.size(); ++k) {
      const auto& s = latent.steps[k];
      const auto a = s.kind == StepKind::Node ? z.node(s.i) : z.edge(s.i, s.j);
      const auto b = s.kind == StepKind::Node ? decoded.z.node(s.i) : decoded.z.edge(s.i, s.j);
      for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a[c] - b[c]));
    }
  }
  return worst;
}

double masking_error(std::uint64_t seed) {
  const GraphAF model = small_model(seed + 1, 16, 0.5);
  double worst = 0.0;
  for (const auto& g : ordered_graphs(model, 5, 8, seed + 1)) {
    Rng rng = make_rng(seed, "selfcheck-mask", g.size());
    const auto z = dequantize(g, model.vocab(), rng);
    worst = std::max(worst, std::abs(log_likelihood_parallel(model, g, z).total -
                                     log_likelihood_sequential(model, g, z).total));
  }
  return worst;
}

double gradient_error(std::uint64_t seed) {
  GraphAF model = small_model(seed + 2, 4, 0.3);
  const auto g = ordered_graphs(model, 1, 3, seed + 2).front();
  Rng rng = make_rng(seed, "selfcheck-grad");
  const auto z = dequantize(g, model.vocab(), rng);
  const auto result = grad_check(
      [&](const ParamBinding& p) { return ad::neg(log_likelihood_on_tape(p, model, g, z)); }, model.params());
  return result.max_rel_error;
}

std::size_t valency_failures(std::uint64_t seed) {
  const GraphAF model = small_model(seed + 3, 16, 1.0);
  SamplerConfig cfg;
  cfg.max_size = 10;
  std::size_t failures = 0;
  for (const auto& [g, trace] : sample_batch(model, cfg, 50, seed)) {
    if (!valency_ok(g, model.vocab().atoms, model.vocab().bonds) || !is_connected(g)) ++failures;
  }
  return failures;
}

}  // namespace

bool run_selfcheck(std::uint64_t seed, std::ostream& out) {
  bool all = true;
  auto report = [&](const char* name, bool ok, double value, const char* bound) {
    out << (ok ? "PASS " : "FAIL ") << name << " value=" << value << " bound=" << bound << '\n';
    all = all && ok;
  };
  auto guarded = [&](const char* name, const char* bound, auto fn, auto ok) {
    try {
      const double v = static_cast<double>(fn());
      report(name, ok(v), v, bound);
    } catch (const Error& e) {
      out << "FAIL " << name << " error: " << e.what() << '\n';
      all = false;
    }
  };
  guarded("invertibility", "1e-12", [&] { return invertibility_error(seed); }, [](double v) { return v < 1e-12; });
  guarded("masking", "1e-9", [&] { return masking_error(seed); }, [](double v) { return v < 1e-9; });
  guarded("gradient", "1e-4", [&] { return gradient_error(seed); }, [](double v) { return v < 1e-4; });
  guarded("valency", "0", [&] { return valency_failures(seed); }, [](double v) { return v == 0.0; });
  return all;
}

}  // namespace graphaf
