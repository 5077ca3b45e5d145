#include "graphaf/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "graphaf/error.hpp"
#include "graphaf/generators.hpp"
#include "graphaf/metrics.hpp"
#include "graphaf/molt.hpp"

namespace graphaf {

const std::vector<std::string> kCommands = {"gen-data", "train", "sample", "evaluate", "finetune",
                                            "optimize-constrained", "selfcheck"};

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Run {
 public:
  Run(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {
    std::filesystem::create_directories(cfg.out);
  }

  std::string path(const std::string& name) const { return (std::filesystem::path(cfg_.out) / name).string(); }
  void output(const std::string& file) { outputs_.push_back(file); }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(path(name));
    if (!out) throw DataError("cannot write " + path(name));
    out << text;
    if (!out) throw DataError("failed writing " + path(name));
    output(path(name));
  }

  void write_manifest() const {
    const std::string config = render_config(cfg_);
    std::ostringstream m;
    std::uint64_t all = fnv1a(config);
    m << "command = " << command_ << '\n' << "seed = " << cfg_.seed << '\n'
      << "config_hash = " << hex(fnv1a(config)) << '\n';
    std::ostringstream files;
    for (const auto& f : outputs_) {
      const auto h = fnv1a(read_file(f));
      all = mix64(all ^ h);
      files << "output " << std::filesystem::path(f).filename().string() << ' ' << hex(h) << '\n';
    }
    m << "outputs_hash = " << hex(all) << '\n' << files.str() << "[config]\n" << config;
    std::ofstream out(path("manifest-" + command_ + ".txt"));
    out << m.str();
    if (!out) throw DataError("cannot write manifest in " + cfg_.out);
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  std::vector<std::string> outputs_;
};

GraphAF make_model(const RunConfig& cfg) {
  Rng init = make_rng(cfg.seed, "init");
  return GraphAF(cfg.vocabulary(), cfg.model(), init);
}

GraphAF load_model(const RunConfig& cfg, const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing checkpoint " + path);
  GraphAF model = make_model(cfg);
  load_checkpoint_file(path, model.params());
  return model;
}

// Elapsed wall time as "12.3 s".
std::string elapsed(std::chrono::steady_clock::time_point t0) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1)
    << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s";
  return s.str();
}

}  // namespace

std::vector<MolecularGraph> load_dataset(const RunConfig& cfg, const Vocabulary& vocab) {
  Rng rng = make_rng(cfg.seed, "data");
  if (cfg.dataset == "synthetic") return gen_synthetic_molecules(cfg.dataset_size, cfg.max_atoms, vocab, rng);
  if (cfg.dataset == "community") {
    return gen_community_graphs(cfg.dataset_size, cfg.community_size, cfg.p_intra, cfg.p_inter, rng);
  }
  return read_molt_file(cfg.dataset, vocab);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

int run_command(const std::string& command, const RunConfig& cfg, const CommandOptions& options, std::ostream& out,
                std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Vocabulary vocab = cfg.vocabulary();

  if (command == "selfcheck") {
    Run run(command, cfg);
    std::ostringstream report;
    const bool ok = run_selfcheck(cfg.seed, report);
    out << report.str();
    run.write_text("selfcheck.txt", report.str());
    run.write_manifest();
    return ok ? 0 : 3;
  }

  Run run(command, cfg);
  if (command == "gen-data") {
    const auto data = load_dataset(cfg, vocab);
    write_molt_file(run.path("data.molt"), data, vocab);
    run.output(run.path("data.molt"));
    out << "wrote " << data.size() << " graphs to " << run.path("data.molt") << '\n';
  } else if (command == "train") {
    const auto data = load_dataset(cfg, vocab);
    GraphAF model = make_model(cfg);
    std::ostringstream trace;
    trace << std::setprecision(17);
    const auto result = train(model, data, cfg.training(), derive_seed(cfg.seed, "train"),
                              [&](std::size_t epoch, double nll) {
                                log << "epoch " << epoch << " mean_nll " << nll << " (" << elapsed(t0) << ")" << std::endl;
                                trace << epoch << ' ' << nll << '\n';
                              });
    save_checkpoint_file(cfg.checkpoint_path(), model.params());
    run.output(cfg.checkpoint_path());
    run.write_text("train_nll.txt", trace.str());
    out << "trained " << result.epoch_nll.size() << " epochs on " << data.size() << " graphs; final mean NLL "
        << result.epoch_nll.back() << '\n';
  } else if (command == "sample") {
    const GraphAF model = load_model(cfg, cfg.checkpoint_path());
    const auto batch = sample_batch(model, cfg.sampler(), cfg.samples, derive_seed(cfg.seed, "sample"), cfg.threads);
    std::vector<MolecularGraph> graphs;
    std::ostringstream trace;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      graphs.push_back(batch[k].first);
      if (options.trace) {
        trace << "# sample " << k << '\n';
        write_trace(trace, batch[k].second, vocab);
      }
    }
    write_molt_file(run.path("samples.molt"), graphs, vocab);
    run.output(run.path("samples.molt"));
    if (options.trace) run.write_text("trace.txt", trace.str());
    out << "wrote " << graphs.size() << " samples to " << run.path("samples.molt") << '\n';
  } else if (command == "evaluate") {
    const auto samples = read_molt_file(run.path("samples.molt"), vocab, {.allow_invalid_valency = true});
    const auto data = load_dataset(cfg, vocab);
    std::optional<GraphAF> model;
    if (std::filesystem::exists(cfg.checkpoint_path())) model = load_model(cfg, cfg.checkpoint_path());
    const auto report = evaluate_set(samples, data, vocab, model ? &*model : nullptr,
                                     {.reconstruction = true, .seed = derive_seed(cfg.seed, "evaluate")});
    std::optional<MmdReport> mmd;
    if (cfg.generic_graphs() && samples.size() >= 2 && data.size() >= 2) mmd = mmd_report(samples, data, cfg.mmd_sigma);
    const MmdReport* m = mmd ? &*mmd : nullptr;
    std::ostringstream table, kv;
    write_report_table(table, report, m);
    write_report_kv(kv, report, m);
    out << table.str() << '\n' << kv.str();
    run.write_text("report.txt", table.str());
    run.write_text("report.kv", kv.str());
    if (options.csv) {
      std::ostringstream csv;
      write_report_csv(csv, report, m);
      run.write_text("report.csv", csv.str());
    }
  } else if (command == "finetune") {
    GraphAF model = load_model(cfg, cfg.checkpoint_path());
    const auto scorer = make_scorer(cfg.scorer, vocab);
    std::ostringstream trace;
    trace << std::setprecision(17);
    const auto result = finetune(model, cfg.sampler(), cfg.reward(), cfg.ppo(), *scorer, cfg.iterations,
                                 derive_seed(cfg.seed, "rl"), cfg.threads, [&](std::size_t it, double reward) {
                                   log << "iteration " << it << " mean_reward " << reward << std::endl;
                                 });
    for (std::size_t it = 0; it < result.mean_reward.size(); ++it) {
      trace << it << ' ' << result.mean_reward[it] << ' ' << result.mean_score[it] << '\n';
    }
    save_checkpoint_file(run.path("finetuned.ckpt"), model.params());
    run.output(run.path("finetuned.ckpt"));
    run.write_text("reward_trace.txt", trace.str());
    out << "fine-tuned for " << cfg.iterations << " iterations; scorer failures " << result.scorer_failures << '\n';
  } else if (command == "optimize-constrained") {
    // Without an explicit checkpoint, a fine-tuned model in the output directory wins.
    std::string checkpoint = cfg.checkpoint_path();
    if (cfg.checkpoint.empty() && std::filesystem::exists(run.path("finetuned.ckpt"))) {
      checkpoint = run.path("finetuned.ckpt");
    }
    log << "using model " << checkpoint << std::endl;
    const GraphAF model = load_model(cfg, checkpoint);
    const auto scorer = make_scorer(cfg.scorer, vocab);
    auto data = load_dataset(cfg, vocab);
    data.resize(std::min(data.size(), cfg.constrained_count));
    const auto results =
        optimize_constrained(model, data, cfg.sampler(), *scorer, cfg.constrained(), derive_seed(cfg.seed, "optimize"),
                             cfg.threads);
    std::ostringstream table;
    table << std::setprecision(17) << "molecule improvement similarity success\n";
    double total = 0.0;
    std::size_t successes = 0;
    std::vector<MolecularGraph> best;
    for (std::size_t q = 0; q < results.size(); ++q) {
      table << q << ' ' << results[q].improvement << ' ' << results[q].similarity << ' ' << results[q].success << '\n';
      total += results[q].improvement;
      successes += results[q].success;
      best.push_back(results[q].best);
    }
    const double n = std::max<double>(1.0, static_cast<double>(results.size()));
    table << "mean_improvement=" << total / n << '\n' << "success_rate=" << static_cast<double>(successes) / n << '\n';
    run.write_text("constrained.txt", table.str());
    write_molt_file(run.path("constrained.molt"), best, vocab);
    run.output(run.path("constrained.molt"));
    out << table.str();
  } else {
    throw UsageError("unknown command '" + command + "'");
  }
  run.write_manifest();
  log << command << " finished in " << elapsed(t0) << std::endl;
  return 0;
}

}  // namespace graphaf
