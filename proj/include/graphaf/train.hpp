#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "graphaf/adam.hpp"
#include "graphaf/flow.hpp"

namespace graphaf {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch = 32;
  AdamConfig adam;
  std::size_t threads = 1;
};

struct TrainResult {
  std::vector<double> epoch_nll;  // mean per-graph negative log-likelihood
  std::size_t updates = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_nll)>;

// A random breadth-first relabeling of g whose bonds all fit the model's
// window. Retries a few random orders before giving up with DataError.
MolecularGraph training_order(const GraphAF& model, const MolecularGraph& g, Rng& rng);

// Negative log-likelihood of one graph and its parameter gradients; also
// returns the stacked pre-normalisation encoder rows.
struct GraphLoss {
  double nll = 0.0;
  std::vector<Tensor> grads;
  Tensor encoder_rows;
};
GraphLoss graph_loss(const GraphAF& model, const MolecularGraph& ordered, Rng& noise_rng);

// Minibatch Adam on the mean per-graph NLL. Each epoch reshuffles the data,
// draws new BFS orders and new dequantization noise; every draw comes from a
// sub-stream of `seed`, so results are independent of cfg.threads.
TrainResult train(GraphAF& model, const std::vector<MolecularGraph>& dataset, const TrainConfig& cfg,
                  std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace graphaf
