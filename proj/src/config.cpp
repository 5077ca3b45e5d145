#include "graphaf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "graphaf/error.hpp"

namespace graphaf {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_unsigned_v<T>) {
    if (!text.empty() && text[0] == '-') throw UsageError("config key '" + key + "': expected a non-negative integer");
  }
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw UsageError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string format(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(std::string key, T RunConfig::*member) {
  Field f;
  f.key = key;
  f.set = [key, member](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = v;
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(key, v);
    } else {
      c.*member = parse_number<T>(key, v);
    }
  };
  f.get = [member](const RunConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*member;
    } else if constexpr (std::is_same_v<T, bool>) {
      return c.*member ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
      return format(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      field("seed", &RunConfig::seed),
      field("out", &RunConfig::out),
      field("threads", &RunConfig::threads),
      field("dataset", &RunConfig::dataset),
      field("dataset_size", &RunConfig::dataset_size),
      field("max_atoms", &RunConfig::max_atoms),
      field("community_size", &RunConfig::community_size),
      field("p_intra", &RunConfig::p_intra),
      field("p_inter", &RunConfig::p_inter),
      field("atoms", &RunConfig::atoms),
      field("bonds", &RunConfig::bonds),
      field("layers", &RunConfig::layers),
      field("width", &RunConfig::width),
      field("no_edge_relation", &RunConfig::no_edge_relation),
      field("max_size", &RunConfig::max_size),
      field("window", &RunConfig::window),
      field("epochs", &RunConfig::epochs),
      field("batch", &RunConfig::batch),
      field("lr", &RunConfig::lr),
      field("beta1", &RunConfig::beta1),
      field("beta2", &RunConfig::beta2),
      field("valency_check", &RunConfig::valency_check),
      field("temperature", &RunConfig::temperature),
      field("max_resample", &RunConfig::max_resample),
      field("samples", &RunConfig::samples),
      field("scorer", &RunConfig::scorer),
      field("reward_shape", &RunConfig::reward_shape),
      field("t1", &RunConfig::t1),
      field("t2", &RunConfig::t2),
      field("gamma", &RunConfig::gamma),
      field("penalty", &RunConfig::penalty),
      field("clip_ratio", &RunConfig::clip_ratio),
      field("ppo_epochs", &RunConfig::ppo_epochs),
      field("rl_batch", &RunConfig::rl_batch),
      field("rl_lr", &RunConfig::rl_lr),
      field("wm", &RunConfig::wm),
      field("iterations", &RunConfig::iterations),
      field("delta", &RunConfig::delta),
      field("attempts", &RunConfig::attempts),
      field("constrained_count", &RunConfig::constrained_count),
      field("mmd_sigma", &RunConfig::mmd_sigma),
      field("checkpoint", &RunConfig::checkpoint),
  };
  return all;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw UsageError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw UsageError("config key '" + key + "': " + what);
  };
  require(!out.empty(), "out", "must not be empty");
  require(threads >= 1, "threads", "must be >= 1");
  require(dataset_size >= 1, "dataset_size", "must be >= 1");
  require(max_atoms >= 1, "max_atoms", "must be >= 1");
  require(max_atoms <= max_size, "max_atoms", "must not exceed max_size");
  require(community_size >= 1 && (dataset != "community" || 2 * community_size <= max_size), "community_size",
          "two communities must fit in max_size");
  require(p_intra >= 0.0 && p_intra <= 1.0, "p_intra", "must lie in [0, 1]");
  require(p_inter >= 0.0 && p_inter <= 1.0, "p_inter", "must lie in [0, 1]");
  require(layers >= 1, "layers", "must be >= 1");
  require(width >= 1, "width", "must be >= 1");
  require(max_size >= 1 && max_size <= 255, "max_size", "must lie in [1, 255]");
  require(window >= 1, "window", "must be >= 1");
  require(batch >= 1, "batch", "must be >= 1");
  require(lr >= 0.0, "lr", "must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
  require(temperature >= 0.0, "temperature", "must be >= 0");
  require(max_resample >= 1, "max_resample", "must be >= 1");
  require(reward_shape == "linear" || reward_shape == "exp", "reward_shape", "must be linear or exp");
  require(t2 > 0.0, "t2", "must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "gamma", "must lie in (0, 1]");
  require(clip_ratio > 0.0, "clip_ratio", "must be positive");
  require(ppo_epochs >= 1, "ppo_epochs", "must be >= 1");
  require(rl_batch >= 1, "rl_batch", "must be >= 1");
  require(rl_lr >= 0.0, "rl_lr", "must be >= 0");
  require(delta >= 0.0 && delta <= 1.0, "delta", "must lie in [0, 1]");
  require(mmd_sigma > 0.0, "mmd_sigma", "must be positive");
  try {
    (void)vocabulary();
  } catch (const Error& e) {
    throw UsageError(std::string("config keys 'atoms'/'bonds': ") + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

Vocabulary RunConfig::vocabulary() const {
  if (generic_graphs()) return Vocabulary::generic(static_cast<int>(max_size) - 1);
  return {AtomVocab::parse(atoms), BondVocab::parse(bonds)};
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.rgcn.layers = layers;
  m.rgcn.width = width;
  m.rgcn.no_edge_relation = no_edge_relation;
  m.max_size = max_size;
  m.window = window;
  return m;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch = batch;
  t.adam.lr = lr;
  t.adam.beta1 = beta1;
  t.adam.beta2 = beta2;
  t.threads = threads;
  return t;
}

SamplerConfig RunConfig::sampler() const {
  SamplerConfig s;
  s.max_size = max_size;
  s.window = window;
  s.valency_check = valency_check;
  s.max_resample = max_resample;
  s.temperature = temperature;
  return s;
}

RewardConfig RunConfig::reward() const {
  RewardConfig r;
  r.shape = reward_shape == "exp" ? RewardShape::Exponential : RewardShape::Linear;
  r.t1 = t1;
  r.t2 = t2;
  r.gamma = gamma;
  r.penalty = penalty;
  return r;
}

PpoConfig RunConfig::ppo() const {
  PpoConfig p;
  p.clip_ratio = clip_ratio;
  p.epochs = ppo_epochs;
  p.batch = rl_batch;
  p.adam.lr = rl_lr;
  p.adam.beta1 = beta1;
  p.adam.beta2 = beta2;
  p.warmup = wm;
  return p;
}

ConstrainedConfig RunConfig::constrained() const {
  ConstrainedConfig c;
  c.attempts = attempts;
  c.delta = delta;
  return c;
}

std::string RunConfig::checkpoint_path() const { return checkpoint.empty() ? out + "/model.ckpt" : checkpoint; }

void parse_config(std::istream& in, RunConfig& cfg, const std::string& source) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + " line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(source + " line " + std::to_string(number) + ": " + e.what());
    }
  }
}

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  parse_config(in, cfg, path);
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.entries()) out += k + " = " + v + "\n";
  return out;
}

}  // namespace graphaf
