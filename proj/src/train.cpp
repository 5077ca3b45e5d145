#include "graphaf/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "graphaf/bfs.hpp"
#include "graphaf/error.hpp"
#include "graphaf/parallel.hpp"

namespace graphaf {

MolecularGraph training_order(const GraphAF& model, const MolecularGraph& g, Rng& rng) {
  constexpr int kAttempts = 32;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto [ordered, order] = random_bfs_reorder(g, rng);
    if (max_bond_span(ordered) <= model.window_for(ordered.size())) return ordered;
  }
  throw DataError("no breadth-first order of a " + std::to_string(g.size()) +
                  "-node graph fits the dependency window");
}

GraphLoss graph_loss(const GraphAF& model, const MolecularGraph& ordered, Rng& noise_rng) {
  const auto z = dequantize(ordered, model.vocab(), noise_rng);
  Tape tape;
  ParamBinding binding(tape, model.params(), true);
  EncodedPrefixes encoded;
  Var ll = log_likelihood_on_tape(binding, model, ordered, z, nullptr, &encoded);
  Var loss = ad::neg(ll);
  tape.backward(loss);
  return {loss.value().item(), binding.gradients(), encoded.pre_norm.value()};
}

TrainResult train(GraphAF& model, const std::vector<MolecularGraph>& dataset, const TrainConfig& cfg,
                  std::uint64_t seed, const EpochCallback& on_epoch) {
  if (dataset.empty()) throw DataError("training set is empty");
  if (cfg.batch == 0) throw UsageError("batch size must be positive");
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    if (dataset[k].size() > model.config().max_size) {
      throw DataError("training graph " + std::to_string(k) + " has " + std::to_string(dataset[k].size()) +
                      " nodes, above max_size " + std::to_string(model.config().max_size));
    }
    if (dataset[k].empty()) throw DataError("training graph " + std::to_string(k) + " is empty");
  }

  AdamState adam(model.params(), cfg.adam);
  const auto& layout = model.rgcn();
  const double momentum = layout.config.batch_norm.momentum;
  TrainResult result;
  std::vector<std::size_t> order(dataset.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(seed, "train-shuffle", epoch);
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[uniform_index(shuffle, k)]);

    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t count = std::min(cfg.batch, order.size() - start);
      std::vector<GraphLoss> losses(count);
      parallel_for(count, cfg.threads, [&](std::size_t b) {
        const std::size_t index = order[start + b];
        Rng rng = make_rng(seed, "noise", epoch * dataset.size() + index);
        const auto ordered = training_order(model, dataset[index], rng);
        losses[b] = graph_loss(model, ordered, rng);
      });

      auto grads = model.params().zero_grads();
      const double inv = 1.0 / static_cast<double>(count);
      for (std::size_t b = 0; b < count; ++b) {
        if (!std::isfinite(losses[b].nll)) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " on training graph " +
                               std::to_string(order[start + b]));
        }
        epoch_total += losses[b].nll;
        for (std::size_t p = 0; p < grads.size(); ++p) {
          auto& g = grads[p];
          const auto& src = losses[b].grads[p];
          for (std::size_t e = 0; e < g.size(); ++e) g[e] += src[e] * inv;
        }
      }
      adam_step(model.params(), grads, adam);
      ++result.updates;

      if (layout.config.batch_norm.momentum < 1.0) {
        std::size_t rows = 0;
        for (const auto& l : losses) rows += l.encoder_rows.rows();
        Tensor stacked = Tensor::matrix(rows, layout.config.width);
        double* dst = stacked.data();
        for (const auto& l : losses) dst = std::copy(l.encoder_rows.data(), l.encoder_rows.data() + l.encoder_rows.size(), dst);
        update_running_stats(stacked, model.params()[layout.bn_mean].value, model.params()[layout.bn_var].value,
                             momentum);
      }
    }
    const double mean = epoch_total / static_cast<double>(dataset.size());
    result.epoch_nll.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

}  // namespace graphaf
