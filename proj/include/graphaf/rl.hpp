#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "graphaf/adam.hpp"
#include "graphaf/flow.hpp"
#include "graphaf/sampler.hpp"
#include "graphaf/scorer.hpp"

namespace graphaf {

enum class RewardShape { Linear, Exponential };  // t1 * s  or  exp(s / t2)

struct RewardConfig {
  RewardShape shape = RewardShape::Linear;
  double t1 = 1.0;
  double t2 = 1.0;
  double gamma = 0.97;
  double penalty = -1.0;  // per rejected valency-violating proposal

  void validate() const;
  double shaped(double score) const;
};

struct TrajectoryStep {
  Step step;
  std::size_t category = 0;
  double old_logprob = 0.0;
  bool forced = false;  // fallback no-edge; not an action of the policy
  std::vector<std::uint8_t> allowed;
  std::size_t group = 0;  // index of the node step this action belongs to
  double penalty = 0.0;
  double ret = 0.0;
};

struct Trajectory {
  MolecularGraph state;   // graph as generated; step prefixes are read from it
  MolecularGraph result;  // emitted molecule
  std::size_t seed_nodes = 0;
  std::vector<TrajectoryStep> steps;
  double score = 0.0;
  double final_reward = 0.0;
  bool valid = true;
};

// return = gamma^(T-1-group) * final_reward + penalty, T = number of groups.
void assign_returns(Trajectory& t, double gamma);

struct CollectResult {
  std::vector<Trajectory> trajectories;  // valid ones only
  std::size_t scorer_failures = 0;
};

// Episode k uses stream derive_seed(seed, "rl", k); with seeds, it starts
// from subgraph_seed of seeds[k % seeds.size()].
CollectResult collect_trajectories(const GraphAF& model, const SamplerConfig& sampler, const RewardConfig& reward,
                                   const PropertyScorer& scorer, std::size_t count, std::uint64_t seed,
                                   const std::vector<MolecularGraph>* seeds = nullptr, std::size_t threads = 1);

// Per-step-index moving averages of returns.
class StepBaselines {
 public:
  explicit StepBaselines(double decay = 0.9);
  double value(std::size_t index) const;
  // Blends the batch mean return at each index; the first observation of an
  // index sets it directly.
  void update(const std::vector<Trajectory>& batch);
  double decay() const { return decay_; }

 private:
  double decay_;
  std::map<std::size_t, double> values_;
};

struct PpoConfig {
  double clip_ratio = 0.2;
  std::size_t epochs = 4;  // updates per collected batch
  std::size_t batch = 64;
  AdamConfig adam;
  std::size_t warmup = 0;  // linear learning-rate warm-up iterations

  void validate() const;
};

// -mean_traj mean_steps min(r V, clip(r, 1-e, 1+e) V), r = exp(new - old),
// V = return - baseline. Forced steps are skipped.
Var ppo_loss(const ParamBinding& params, const GraphAF& model, const std::vector<Trajectory>& batch,
             const StepBaselines& baselines, const PpoConfig& cfg, double temperature = 1.0);

struct FinetuneResult {
  std::vector<double> mean_reward;  // per iteration, before its update
  std::vector<double> mean_score;
  std::size_t scorer_failures = 0;
};

using IterationCallback = std::function<void(std::size_t iteration, double mean_reward)>;

FinetuneResult finetune(GraphAF& model, const SamplerConfig& sampler, const RewardConfig& reward,
                        const PpoConfig& ppo, const PropertyScorer& scorer, std::size_t iterations,
                        std::uint64_t seed, std::size_t threads = 1, const IterationCallback& on_iteration = {});

// Drops the last m nodes of a random breadth-first order (m uniform in
// {0..5} unless given, clamped to n - 1). The result is connected and
// breadth-first ordered.
MolecularGraph subgraph_seed(const MolecularGraph& g, Rng& rng);
MolecularGraph subgraph_seed(const MolecularGraph& g, std::size_t m, Rng& rng);

// Cosine similarity of histograms of hashed neighbourhood labels of radius
// 0, 1 and 2.
double graph_similarity(const MolecularGraph& a, const MolecularGraph& b);

struct ConstrainedConfig {
  std::size_t attempts = 50;  // seeded generations per molecule
  double delta = 0.4;
  std::size_t max_drop = 5;
};

struct ConstrainedResult {
  double improvement = 0.0;  // best qualifying score gain (the input itself counts as 0)
  double similarity = 1.0;   // similarity of that best output
  bool success = false;      // some qualifying output scores strictly higher
  MolecularGraph best;
};

std::vector<ConstrainedResult> optimize_constrained(const GraphAF& model, const std::vector<MolecularGraph>& molecules,
                                                    const SamplerConfig& sampler, const PropertyScorer& scorer,
                                                    const ConstrainedConfig& cfg, std::uint64_t seed,
                                                    std::size_t threads = 1);

}  // namespace graphaf
