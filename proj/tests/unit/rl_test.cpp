#include <gtest/gtest.h>

#include <sys/stat.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "graphaf/action_prob.hpp"
#include "graphaf/bfs.hpp"
#include "graphaf/generators.hpp"
#include "graphaf/rl.hpp"

using namespace graphaf;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.rgcn.width = 8;
  c.rgcn.layers = 2;
  return c;
}

GraphAF random_model(std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  GraphAF model(Vocabulary::organic(), small_config(), rng);
  model.randomize(rng, scale);
  return model;
}

SamplerConfig sampler(std::size_t max_size = 8) {
  SamplerConfig s;
  s.max_size = max_size;
  return s;
}

Trajectory groups_trajectory(std::vector<std::size_t> groups, double reward) {
  Trajectory t;
  t.final_reward = reward;
  for (auto g : groups) {
    TrajectoryStep s;
    s.group = g;
    t.steps.push_back(s);
  }
  return t;
}

MolecularGraph path(std::size_t n) {
  MolecularGraph g(std::vector<std::size_t>(n, 0), 3);
  for (std::size_t k = 1; k < n; ++k) g.set_edge(k, k - 1, 0);
  return g;
}

double mean_advantage(const Trajectory& t, const StepBaselines& b) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < t.steps.size(); ++k) {
    if (t.steps[k].forced) continue;
    sum += t.steps[k].ret - b.value(k);
    ++n;
  }
  return sum / static_cast<double>(n);
}

double loss_value(const GraphAF& model, const std::vector<Trajectory>& batch, const StepBaselines& b,
                  std::vector<Tensor>* grads = nullptr) {
  Tape tape;
  ParamBinding binding(tape, model.params(), true);
  Var loss = ppo_loss(binding, model, batch, b, PpoConfig{});
  if (grads) {
    tape.backward(loss);
    *grads = binding.gradients();
  }
  return loss.value().item();
}

}  // namespace

TEST(Returns, DiscountPerNodeGroup) {
  auto t = groups_trajectory({0, 1, 1, 2, 2, 2}, 10.0);
  assign_returns(t, 1.0);
  for (const auto& s : t.steps) EXPECT_EQ(s.ret, 10.0);
  assign_returns(t, 0.9);
  EXPECT_NEAR(t.steps[0].ret, 8.1, 1e-12);
  EXPECT_NEAR(t.steps[1].ret, 9.0, 1e-12);
  EXPECT_NEAR(t.steps[2].ret, 9.0, 1e-12);
  EXPECT_EQ(t.steps[5].ret, 10.0);
  t.steps[2].penalty = -3.0;
  assign_returns(t, 0.9);
  EXPECT_NEAR(t.steps[2].ret, 6.0, 1e-12);
  EXPECT_NEAR(t.steps[1].ret, 9.0, 1e-12);
}

TEST(Returns, RewardShapes) {
  RewardConfig r;
  r.t1 = 2.0;
  EXPECT_EQ(r.shaped(0.25), 0.5);
  r.shape = RewardShape::Exponential;
  r.t2 = 3.0;
  EXPECT_NEAR(r.shaped(-3.0), std::exp(-1.0), 1e-15);
  r.gamma = 0.0;
  EXPECT_THROW(r.validate(), UsageError);
  r.gamma = 1.0;
  r.t2 = 0.0;
  EXPECT_THROW(r.validate(), UsageError);
}

TEST(Collect, PenaltiesMatchRejectionsInTheTrace) {
  const auto model = random_model(1);
  const AtomCountScorer scorer;
  const auto cfg = sampler(10);
  const auto collected = collect_trajectories(model, cfg, RewardConfig{}, scorer, 30, 2);
  ASSERT_EQ(collected.trajectories.size(), 30u);
  std::size_t rejections = 0;
  for (std::size_t k = 0; k < 30; ++k) {
    const auto& t = collected.trajectories[k];
    Rng rng = make_rng(2, "rl", k);
    SampleOptions options;
    options.record_logprob = true;
    const auto [g, trace] = sample_molecule(model, cfg, rng, options);
    EXPECT_EQ(g, t.result);
    EXPECT_EQ(t.score, static_cast<double>(g.size()));
    ASSERT_EQ(trace.steps.size(), t.steps.size());
    for (std::size_t s = 0; s < t.steps.size(); ++s) {
      EXPECT_EQ(t.steps[s].penalty, -static_cast<double>(trace.steps[s].resamples));
      rejections += trace.steps[s].resamples;
      if (!t.steps[s].forced) {
        EXPECT_TRUE(std::isfinite(t.steps[s].old_logprob));
        EXPECT_LE(t.steps[s].old_logprob, 0.0);
      }
    }
  }
  EXPECT_GT(rejections, 0u);
}

TEST(Collect, LoggedProbabilitiesMatchThePolicy) {
  const auto model = random_model(3);
  const AtomCountScorer scorer;
  const auto collected = collect_trajectories(model, sampler(6), RewardConfig{}, scorer, 5, 4);
  for (const auto& t : collected.trajectories) {
    for (const auto& s : t.steps) {
      if (s.forced) continue;
      const auto gauss = step_conditional(model, t.state, s.step);
      EXPECT_NEAR(s.old_logprob, action_logprob(gauss.mu, gauss.alpha, s.category, s.allowed), 1e-12);
    }
  }
}

TEST(Ppo, RatioOneGivesMinusMeanAdvantage) {
  const auto model = random_model(5);
  const AtomCountScorer scorer;
  auto batch = collect_trajectories(model, sampler(6), RewardConfig{}, scorer, 6, 6).trajectories;
  StepBaselines baselines;
  double expected = 0.0;
  for (const auto& t : batch) expected += mean_advantage(t, baselines);
  expected /= static_cast<double>(batch.size());
  EXPECT_NEAR(loss_value(model, batch, baselines), -expected, 1e-10);
  baselines.update(batch);
  baselines.update(batch);
  expected = 0.0;
  for (const auto& t : batch) expected += mean_advantage(t, baselines);
  expected /= static_cast<double>(batch.size());
  EXPECT_NEAR(loss_value(model, batch, baselines), -expected, 1e-10);
}

TEST(Ppo, ZeroAdvantageGivesZeroLossAndGradient) {
  const auto model = random_model(7);
  const AtomCountScorer scorer;
  auto batch = collect_trajectories(model, sampler(6), RewardConfig{}, scorer, 1, 8).trajectories;
  StepBaselines baselines;
  baselines.update(batch);  // first observation: baseline = return at every index
  std::vector<Tensor> grads;
  EXPECT_EQ(loss_value(model, batch, baselines, &grads), 0.0);
  for (const auto& g : grads)
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Ppo, ClippedSurrogateHandCase) {
  const auto model = random_model(9);
  const AtomCountScorer scorer;
  auto batch = collect_trajectories(model, sampler(4), RewardConfig{}, scorer, 1, 10).trajectories;
  ASSERT_EQ(batch.size(), 1u);
  auto& t = batch[0];
  const StepBaselines baselines;
  auto with = [&](double ratio, double advantage) {
    for (auto& s : t.steps) {
      s.old_logprob = action_logprob(step_conditional(model, t.state, s.step).mu,
                                     step_conditional(model, t.state, s.step).alpha, s.category, s.allowed) -
                      std::log(ratio);
      s.ret = advantage;
    }
    return loss_value(model, batch, baselines);
  };
  EXPECT_NEAR(with(1.5, 1.0), -1.2, 1e-9);
  EXPECT_NEAR(with(0.5, 1.0), -0.5, 1e-9);
  EXPECT_NEAR(with(1.5, -1.0), 1.5, 1e-9);
  EXPECT_NEAR(with(0.5, -1.0), 0.8, 1e-9);
}

TEST(Baselines, MovingAverage) {
  StepBaselines b(0.5);
  std::vector<Trajectory> batch{groups_trajectory({0, 0}, 0), groups_trajectory({0}, 0)};
  batch[0].steps[0].ret = 2.0;
  batch[0].steps[1].ret = 6.0;
  batch[1].steps[0].ret = 4.0;
  b.update(batch);
  EXPECT_EQ(b.value(0), 3.0);
  EXPECT_EQ(b.value(1), 6.0);
  EXPECT_EQ(b.value(7), 0.0);
  b.update(batch);
  EXPECT_EQ(b.value(0), 3.0);
  batch[1].steps[0].ret = 8.0;
  b.update(batch);
  EXPECT_EQ(b.value(0), 4.0);
  EXPECT_THROW(StepBaselines(1.0), UsageError);
}

TEST(Finetune, FixedSeedIsReproducibleAndZeroRateIsFlat) {
  const AtomFractionScorer scorer(Vocabulary::organic().atoms, "N");
  PpoConfig ppo;
  ppo.batch = 16;
  ppo.epochs = 1;
  auto run = [&](double lr) {
    auto model = std::make_unique<GraphAF>(random_model(11, 0.3));
    ppo.adam.lr = lr;
    auto result = finetune(*model, sampler(6), RewardConfig{}, ppo, scorer, 8, 12);
    return std::make_pair(std::move(model), result);
  };
  const auto [a, ra] = run(1e-3);
  const auto [b, rb] = run(1e-3);
  EXPECT_EQ(ra.mean_reward, rb.mean_reward);

  const auto [c, rc] = run(0.0);
  const auto initial = random_model(11, 0.3);
  for (std::size_t k = 0; k < initial.params().size(); ++k) EXPECT_EQ(c->params()[k].value, initial.params()[k].value);
  // Without updates the two halves of the trace differ only by sampling noise.
  double m1 = 0, m2 = 0, v = 0;
  for (std::size_t k = 0; k < 4; ++k) m1 += rc.mean_reward[k] / 4;
  for (std::size_t k = 4; k < 8; ++k) m2 += rc.mean_reward[k] / 4;
  for (double r : rc.mean_reward) v += (r - (m1 + m2) / 2) * (r - (m1 + m2) / 2) / 7;
  EXPECT_LT(std::abs(m1 - m2), 4.0 * std::sqrt(v / 2) + 1e-12);
}

TEST(Seeding, SubgraphSeeds) {
  Rng rng(13);
  const auto p6 = path(6);
  const auto same = subgraph_seed(p6, 0, rng);
  EXPECT_EQ(same.size(), 6u);
  EXPECT_EQ(same.bond_count(), 5u);
  const auto p4 = subgraph_seed(p6, 2, rng);
  EXPECT_EQ(p4.size(), 4u);
  EXPECT_EQ(p4.bond_count(), 3u);
  EXPECT_TRUE(is_connected(p4));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_LE(p4.degree(k), 2u);
  EXPECT_EQ(subgraph_seed(p6, 10, rng).size(), 1u);

  auto graphs = gen_synthetic_molecules(1000, 12, Vocabulary::organic(), rng);
  for (const auto& g : graphs) {
    const auto s = subgraph_seed(g, rng);
    EXPECT_TRUE(is_connected(s));
    EXPECT_TRUE(is_bfs_ordered(s));
    EXPECT_GE(s.size() + 5, g.size());
  }
}

TEST(Similarity, Properties) {
  Rng rng(14);
  auto graphs = gen_synthetic_molecules(40, 10, Vocabulary::organic(), rng);
  for (std::size_t k = 0; k + 1 < graphs.size(); k += 2) {
    EXPECT_NEAR(graph_similarity(graphs[k], graphs[k]), 1.0, 1e-12);
    const double ab = graph_similarity(graphs[k], graphs[k + 1]);
    EXPECT_EQ(ab, graph_similarity(graphs[k + 1], graphs[k]));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
  MolecularGraph carbon({0, 0, 0}, 3), oxygen({2, 2}, 3);
  carbon.set_edge(0, 1, 0);
  carbon.set_edge(1, 2, 0);
  oxygen.set_edge(0, 1, 0);
  EXPECT_EQ(graph_similarity(carbon, oxygen), 0.0);
  EXPECT_EQ(graph_similarity(carbon, MolecularGraph(3)), 0.0);
  // Relabeling does not change the neighbourhood histogram.
  EXPECT_NEAR(graph_similarity(carbon, permute(carbon, {2, 0, 1})), 1.0, 1e-12);
}

TEST(Constrained, VacuousAndExactThresholds) {
  const auto model = random_model(15, 0.3);
  const AtomCountScorer scorer;
  Rng rng(16);
  auto molecules = gen_synthetic_molecules(6, 6, model.vocab(), rng);
  ConstrainedConfig cfg;
  cfg.attempts = 10;
  cfg.delta = 0.0;
  for (const auto& r : optimize_constrained(model, molecules, sampler(10), scorer, cfg, 17)) {
    EXPECT_GE(r.improvement, 0.0);
    EXPECT_EQ(r.success, r.improvement > 0.0);
  }
  // Exact-copy seeds that cannot grow reproduce the input.
  cfg.delta = 1.0;
  cfg.max_drop = 0;
  for (const auto& mol : molecules) {
    auto s = sampler(mol.size());
    s.temperature = 0.0;
    const auto r = optimize_constrained(model, {mol}, s, scorer, cfg, 18).front();
    EXPECT_EQ(r.improvement, 0.0);
    EXPECT_EQ(r.similarity, 1.0);
    EXPECT_FALSE(r.success);
  }
}

TEST(Scorers, ToyScorers) {
  const auto vocab = Vocabulary::organic();
  MolecularGraph ring({0, 0, 0, 0, 0, 1}, 3);
  for (std::size_t k = 0; k < 6; ++k) ring.set_edge(k, (k + 1) % 6, 0);
  EXPECT_EQ(make_scorer("toy:atom-count", vocab)->score(ring), 6.0);
  EXPECT_EQ(make_scorer("toy:ring-penalty", vocab)->score(ring), -1.0);
  EXPECT_EQ(make_scorer("toy:ring-penalty", vocab)->score(path(4)), 0.0);
  EXPECT_NEAR(make_scorer("toy:atom-fraction:N", vocab)->score(ring), 1.0 / 6.0, 1e-15);
  EXPECT_THROW(make_scorer("toy:atom-fraction:Xe", vocab), UsageError);
  EXPECT_THROW(make_scorer("qed", vocab), UsageError);
}

TEST(Scorers, ExternalProcessProtocol) {
  const auto dir = std::filesystem::temp_directory_path() / "graphaf_scorer_test";
  std::filesystem::create_directories(dir);
  const auto script = dir / "count.sh";
  {
    std::ofstream out(script);
    out << "#!/bin/sh\n"
           "n=0\n"
           "while read -r a b; do\n"
           "  case \"$a\" in\n"
           "    atoms) n=$b ;;\n"
           "    '#END') if [ \"$n\" = 3 ]; then echo oops; else echo \"$n.5\"; fi ;;\n"
           "  esac\n"
           "done\n";
  }
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  const auto vocab = Vocabulary::organic();
  const auto scorer = make_scorer("exec:" + script.string(), vocab);
  EXPECT_EQ(scorer->score(path(4)), 4.5);
  EXPECT_EQ(scorer->score(path(2)), 2.5);
  EXPECT_THROW(scorer->score(path(3)), ScorerError);
  EXPECT_EQ(scorer->score(path(5)), 5.5);

  // Trajectories whose molecule cannot be scored are dropped and counted.
  const auto model = random_model(19, 0.3);
  const auto collected = collect_trajectories(model, sampler(5), RewardConfig{}, *scorer, 40, 20);
  std::size_t threes = 0;
  for (std::size_t k = 0; k < 40; ++k) {
    Rng rng = make_rng(20, "rl", k);
    threes += sample_molecule(model, sampler(5), rng).first.size() == 3;
  }
  EXPECT_EQ(collected.scorer_failures, threes);
  EXPECT_EQ(collected.trajectories.size(), 40 - threes);

  const auto missing = make_scorer("exec:" + (dir / "missing").string(), vocab);
  EXPECT_THROW(missing->score(path(2)), ScorerError);
}
