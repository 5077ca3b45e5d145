#include "graphaf/rl.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "graphaf/action_prob.hpp"
#include "graphaf/bfs.hpp"
#include "graphaf/error.hpp"
#include "graphaf/parallel.hpp"

namespace graphaf {

void RewardConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("reward gamma must lie in (0, 1]");
  if (!(t2 > 0.0)) throw UsageError("reward t2 must be positive");
  if (!std::isfinite(t1) || !std::isfinite(penalty)) throw UsageError("reward t1 and penalty must be finite");
}

double RewardConfig::shaped(double score) const {
  return shape == RewardShape::Linear ? t1 * score : std::exp(score / t2);
}

void assign_returns(Trajectory& t, double gamma) {
  std::size_t groups = 0;
  for (const auto& s : t.steps) groups = std::max(groups, s.group + 1);
  for (auto& s : t.steps) {
    s.ret = std::pow(gamma, static_cast<double>(groups - 1 - s.group)) * t.final_reward + s.penalty;
  }
}

CollectResult collect_trajectories(const GraphAF& model, const SamplerConfig& sampler, const RewardConfig& reward,
                                   const PropertyScorer& scorer, std::size_t count, std::uint64_t seed,
                                   const std::vector<MolecularGraph>* seeds, std::size_t threads) {
  reward.validate();
  if (!(sampler.temperature > 0.0)) throw UsageError("policy fine-tuning needs a positive sampling temperature");
  if (seeds && seeds->empty()) throw DataError("empty seed molecule list");
  std::vector<Trajectory> all(count);
  parallel_for(count, threads, [&](std::size_t k) {
    Rng rng = make_rng(seed, "rl", k);
    MolecularGraph start;
    SampleOptions options;
    options.record_logprob = true;
    if (seeds) {
      start = subgraph_seed((*seeds)[k % seeds->size()], rng);
      options.seed = &start;
    }
    auto [graph, trace] = sample_molecule(model, sampler, rng, options);
    Trajectory& t = all[k];
    t.state = std::move(trace.generated);
    t.result = std::move(graph);
    t.seed_nodes = trace.seed_nodes;
    std::size_t group = 0;
    bool first = true;
    for (const auto& rec : trace.steps) {
      if (rec.step.kind == StepKind::Node) {
        if (!first) ++group;
        first = false;
      }
      TrajectoryStep s;
      s.step = rec.step;
      s.category = rec.category;
      s.old_logprob = rec.logprob;
      s.forced = rec.forced;
      s.allowed = rec.allowed;
      s.group = group;
      s.penalty = reward.penalty * static_cast<double>(rec.resamples);
      t.steps.push_back(std::move(s));
    }
    try {
      t.score = scorer.score(t.result);
      t.final_reward = reward.shaped(t.score);
      assign_returns(t, reward.gamma);
    } catch (const ScorerError&) {
      t.valid = false;
    }
  });
  CollectResult out;
  for (auto& t : all) {
    if (t.valid) {
      out.trajectories.push_back(std::move(t));
    } else {
      ++out.scorer_failures;
    }
  }
  return out;
}

StepBaselines::StepBaselines(double decay) : decay_(decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw UsageError("baseline decay must lie in (0, 1)");
}

double StepBaselines::value(std::size_t index) const {
  auto it = values_.find(index);
  return it == values_.end() ? 0.0 : it->second;
}

void StepBaselines::update(const std::vector<Trajectory>& batch) {
  std::map<std::size_t, std::pair<double, std::size_t>> sums;
  for (const auto& t : batch) {
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      auto& [sum, n] = sums[k];
      sum += t.steps[k].ret;
      ++n;
    }
  }
  for (const auto& [k, acc] : sums) {
    const double mean = acc.first / static_cast<double>(acc.second);
    auto it = values_.find(k);
    if (it == values_.end()) {
      values_.emplace(k, mean);
    } else {
      it->second = decay_ * it->second + (1.0 - decay_) * mean;
    }
  }
}

void PpoConfig::validate() const {
  if (!(clip_ratio > 0.0)) throw UsageError("clip_ratio must be positive");
  if (epochs == 0 || batch == 0) throw UsageError("PPO epochs and batch must be positive");
}

Var ppo_loss(const ParamBinding& params, const GraphAF& model, const std::vector<Trajectory>& batch,
             const StepBaselines& baselines, const PpoConfig& cfg, double temperature) {
  Tape& tape = params.tape();
  std::vector<Var> terms;
  for (const auto& t : batch) {
    std::vector<Step> steps;
    std::vector<std::size_t> positions;
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      if (t.steps[k].forced) continue;
      steps.push_back(t.steps[k].step);
      positions.push_back(k);
    }
    if (steps.empty()) continue;
    auto cond = compute_conditionals(params, model, t.state, steps);
    std::vector<Var> logprobs;
    std::vector<std::size_t> order;
    auto add_kind = [&](const std::vector<std::size_t>& rows, Var mu, Var alpha) {
      if (rows.empty()) return;
      std::vector<std::size_t> cats;
      std::vector<std::vector<std::uint8_t>> allowed;
      for (auto r : rows) {
        const auto& s = t.steps[positions[r]];
        cats.push_back(s.category);
        allowed.push_back(s.allowed);
        order.push_back(positions[r]);
      }
      logprobs.push_back(ad::action_logprob(mu, ad::scale(alpha, temperature), cats, allowed));
    };
    add_kind(cond.node_steps, cond.node_mu, cond.node_alpha);
    add_kind(cond.edge_steps, cond.edge_mu, cond.edge_alpha);
    Var lp = logprobs.size() == 1 ? logprobs[0] : ad::concat(logprobs, 0);

    Tensor old_lp = Tensor::matrix(order.size(), 1);
    Tensor advantage = Tensor::matrix(order.size(), 1);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& s = t.steps[order[r]];
      old_lp[r] = s.old_logprob;
      advantage[r] = s.ret - baselines.value(order[r]);
    }
    Var ratio = ad::exp(ad::sub(lp, tape.constant(std::move(old_lp))));
    Var v = tape.constant(std::move(advantage));
    Var clipped = ad::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    terms.push_back(ad::mean(ad::minimum(ad::mul(ratio, v), ad::mul(clipped, v))));
  }
  if (terms.empty()) return tape.constant(Tensor::scalar(0.0));
  Var total = terms.size() == 1 ? terms[0] : ad::sum(ad::concat(terms, 0));
  return ad::scale(total, -1.0 / static_cast<double>(terms.size()));
}

FinetuneResult finetune(GraphAF& model, const SamplerConfig& sampler, const RewardConfig& reward,
                        const PpoConfig& ppo, const PropertyScorer& scorer, std::size_t iterations,
                        std::uint64_t seed, std::size_t threads, const IterationCallback& on_iteration) {
  ppo.validate();
  reward.validate();
  AdamState adam(model.params(), ppo.adam);
  StepBaselines baselines;
  FinetuneResult result;
  for (std::size_t it = 0; it < iterations; ++it) {
    auto collected = collect_trajectories(model, sampler, reward, scorer, ppo.batch,
                                          derive_seed(seed, "rl-iteration", it), nullptr, threads);
    result.scorer_failures += collected.scorer_failures;
    const auto& batch = collected.trajectories;
    double reward_sum = 0.0, score_sum = 0.0;
    for (const auto& t : batch) {
      reward_sum += t.final_reward;
      score_sum += t.score;
    }
    const double n = std::max<double>(1.0, static_cast<double>(batch.size()));
    result.mean_reward.push_back(reward_sum / n);
    result.mean_score.push_back(score_sum / n);
    if (on_iteration) on_iteration(it, reward_sum / n);
    if (batch.empty()) continue;

    const double lr_scale =
        ppo.warmup ? std::min(1.0, static_cast<double>(it + 1) / static_cast<double>(ppo.warmup)) : 1.0;
    for (std::size_t e = 0; e < ppo.epochs; ++e) {
      Tape tape;
      ParamBinding binding(tape, model.params(), true);
      Var loss = ppo_loss(binding, model, batch, baselines, ppo, sampler.temperature);
      if (!std::isfinite(loss.value().item())) {
        throw NumericalError("non-finite PPO loss at iteration " + std::to_string(it));
      }
      tape.backward(loss);
      adam_step(model.params(), binding.gradients(), adam, lr_scale);
    }
    baselines.update(batch);
  }
  return result;
}

MolecularGraph subgraph_seed(const MolecularGraph& g, Rng& rng) {
  const std::size_t m = uniform_index(rng, 6);
  return subgraph_seed(g, m, rng);
}

MolecularGraph subgraph_seed(const MolecularGraph& g, std::size_t m, Rng& rng) {
  if (g.empty()) throw DataError("cannot seed from an empty graph");
  auto [ordered, order] = random_bfs_reorder(g, rng);
  m = std::min(m, g.size() - 1);
  return ordered.prefix(g.size() - m);
}

namespace {

std::unordered_map<std::uint64_t, double> label_histogram(const MolecularGraph& g) {
  std::unordered_map<std::uint64_t, double> hist;
  const std::size_t n = g.size();
  std::vector<std::uint64_t> labels(n), next(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = mix64(0x51ed27 + g.node_type(i));
  for (std::size_t radius = 0; radius <= 2; ++radius) {
    for (std::size_t i = 0; i < n; ++i) hist[mix64(labels[i] + radius)] += 1.0;
    if (radius == 2) break;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint64_t> around;
      for (auto j : g.neighbors(i)) around.push_back(mix64(labels[j] ^ (0x9e37 * (g.edge(i, j) + 1))));
      std::sort(around.begin(), around.end());
      std::uint64_t h = labels[i];
      for (auto a : around) h = mix64(h ^ a);
      next[i] = h;
    }
    labels.swap(next);
  }
  return hist;
}

}  // namespace

double graph_similarity(const MolecularGraph& a, const MolecularGraph& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty() ? 1.0 : 0.0;
  const auto ha = label_histogram(a);
  const auto hb = label_histogram(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : ha) {
    na += v * v;
    auto it = hb.find(k);
    if (it != hb.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : hb) nb += v * v;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

std::vector<ConstrainedResult> optimize_constrained(const GraphAF& model, const std::vector<MolecularGraph>& molecules,
                                                    const SamplerConfig& sampler, const PropertyScorer& scorer,
                                                    const ConstrainedConfig& cfg, std::uint64_t seed,
                                                    std::size_t threads) {
  std::vector<ConstrainedResult> out(molecules.size());
  parallel_for(molecules.size(), threads, [&](std::size_t q) {
    const auto& mol = molecules[q];
    Rng rng = make_rng(seed, "constrained", q);
    const double base = scorer.score(mol);
    ConstrainedResult best;
    best.best = mol;
    for (std::size_t k = 0; k < cfg.attempts; ++k) {
      const std::size_t m = uniform_index(rng, cfg.max_drop + 1);
      const auto start = subgraph_seed(mol, m, rng);
      SampleOptions options;
      options.seed = &start;
      auto [graph, trace] = sample_molecule(model, sampler, rng, options);
      const double sim = graph_similarity(mol, graph);
      if (sim < cfg.delta) continue;
      const double gain = scorer.score(graph) - base;
      if (gain > best.improvement) {
        best.improvement = gain;
        best.similarity = sim;
        best.success = true;
        best.best = std::move(graph);
      }
    }
    out[q] = std::move(best);
  });
  return out;
}

}  // namespace graphaf
