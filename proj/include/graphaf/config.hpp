#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "graphaf/flow.hpp"
#include "graphaf/rl.hpp"
#include "graphaf/sampler.hpp"
#include "graphaf/train.hpp"

namespace graphaf {

// Flat run configuration. Every key has a default; files and flags may only
// set known keys.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t threads = 1;

  // "synthetic", "community" or a MOLT file path.
  std::string dataset = "synthetic";
  std::size_t dataset_size = 500;
  std::size_t max_atoms = 12;
  std::size_t community_size = 6;
  double p_intra = 0.7;
  double p_inter = 0.05;
  std::string atoms = "C:4,N:3,O:2";
  std::string bonds = "1,2,3";

  std::size_t layers = 3;
  std::size_t width = 32;
  bool no_edge_relation = true;
  std::size_t max_size = 16;
  std::size_t window = 12;

  std::size_t epochs = 10;
  std::size_t batch = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;

  bool valency_check = true;
  double temperature = 1.0;
  std::size_t max_resample = 100;
  std::size_t samples = 1000;

  std::string scorer = "toy:atom-fraction:N";
  std::string reward_shape = "linear";
  double t1 = 1.0;
  double t2 = 1.0;
  double gamma = 0.97;
  double penalty = -1.0;
  double clip_ratio = 0.2;
  std::size_t ppo_epochs = 4;
  std::size_t rl_batch = 64;
  double rl_lr = 1e-3;
  std::size_t wm = 0;
  std::size_t iterations = 50;

  double delta = 0.4;
  std::size_t attempts = 50;
  std::size_t constrained_count = 20;

  double mmd_sigma = 1.0;
  std::string checkpoint;  // default <out>/model.ckpt

  // Sets one key from its text form; throws UsageError naming the key.
  void set(const std::string& key, const std::string& value);
  // Cross-field checks.
  void validate() const;
  // key -> value text for every key, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  bool generic_graphs() const { return dataset == "community"; }
  Vocabulary vocabulary() const;
  ModelConfig model() const;
  TrainConfig training() const;
  SamplerConfig sampler() const;
  RewardConfig reward() const;
  PpoConfig ppo() const;
  ConstrainedConfig constrained() const;
  std::string checkpoint_path() const;
};

// Reads "key = value" lines with '#' comments into cfg.
void parse_config(std::istream& in, RunConfig& cfg, const std::string& source = "config");
void load_config_file(const std::string& path, RunConfig& cfg);

// Effective configuration as "key = value" lines.
std::string render_config(const RunConfig& cfg);

}  // namespace graphaf
