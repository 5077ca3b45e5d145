#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graphaf/flow.hpp"

namespace graphaf {

struct SamplerConfig {
  std::size_t max_size = 16;
  std::size_t window = 12;
  bool valency_check = true;
  std::size_t max_resample = 100;
  double temperature = 1.0;  // eps ~ N(0, T^2); 0 gives greedy decoding

  void validate() const;
};

enum class Termination { MaxSize, NoBonds };
std::string to_string(Termination t);

struct StepRecord {
  Step step;
  std::size_t prefix_size = 0;  // nodes known when the step was taken
  std::vector<double> eps;      // accepted draw (scaled by the temperature)
  std::size_t category = 0;
  std::size_t resamples = 0;    // rejected proposals before acceptance
  bool forced = false;          // resample cap hit; no-edge imposed
  std::vector<std::uint8_t> allowed;  // valency-feasible categories; empty when unchecked
  double logprob = 0.0;         // set when log-probabilities are recorded
};

struct SampleTrace {
  std::vector<StepRecord> steps;
  Termination termination = Termination::MaxSize;
  std::size_t seed_nodes = 0;
  // Graph as generated, including a discarded terminal node.
  MolecularGraph generated;
};

struct SampleOptions {
  const MolecularGraph* seed = nullptr;  // continue generation from this prefix
  bool record_logprob = false;
};

// Node-by-node generation with valency-checked rejection sampling of bonds.
std::pair<MolecularGraph, SampleTrace> sample_molecule(const GraphAF& model, const SamplerConfig& cfg, Rng& rng,
                                                       const SampleOptions& options = {});

// Sample k uses the stream derive_seed(seed, "sampler", k).
std::vector<std::pair<MolecularGraph, SampleTrace>> sample_batch(const GraphAF& model, const SamplerConfig& cfg,
                                                                 std::size_t count, std::uint64_t seed,
                                                                 std::size_t threads = 1);

// dequantize -> eps -> z -> quantize. Requires g breadth-first ordered.
MolecularGraph reconstruct(const GraphAF& model, const MolecularGraph& g, Rng& rng);

void write_trace(std::ostream& out, const SampleTrace& trace, const Vocabulary& vocab);

}  // namespace graphaf
