#include "graphaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "graphaf/error.hpp"
#include "graphaf/random.hpp"
#include "graphaf/sampler.hpp"
#include "graphaf/train.hpp"

namespace graphaf {
namespace {

// Per-node labels after `rounds` refinement rounds.
std::vector<std::uint64_t> refine(const MolecularGraph& g, int rounds) {
  const std::size_t n = g.size();
  std::vector<std::uint64_t> labels(n), next(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = mix64(0xa7c3 + g.node_type(i));
  std::vector<std::uint64_t> around;
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      around.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && g.has_bond(i, j)) around.push_back(mix64(labels[j] * 31 + g.edge(i, j)));
      }
      std::sort(around.begin(), around.end());
      std::uint64_t h = mix64(labels[i] + 0x1f);
      for (auto a : around) h = mix64(h ^ a);
      next[i] = h;
    }
    labels.swap(next);
  }
  return labels;
}

bool extend(const MolecularGraph& a, const MolecularGraph& b, const std::vector<std::uint64_t>& la,
            const std::vector<std::uint64_t>& lb, std::vector<std::size_t>& map, std::vector<bool>& used,
            std::size_t i) {
  const std::size_t n = a.size();
  if (i == n) return true;
  for (std::size_t c = 0; c < n; ++c) {
    if (used[c] || la[i] != lb[c] || a.node_type(i) != b.node_type(c)) continue;
    bool ok = true;
    for (std::size_t k = 0; k < i && ok; ++k) ok = a.edge(i, k) == b.edge(c, map[k]);
    if (!ok) continue;
    map[i] = c;
    used[c] = true;
    if (extend(a, b, la, lb, map, used, i + 1)) return true;
    used[c] = false;
  }
  return false;
}

}  // namespace

std::uint64_t canonical_hash(const MolecularGraph& g) {
  auto labels = refine(g, 3);
  std::sort(labels.begin(), labels.end());
  std::uint64_t h = mix64(g.size() * 0x100000001b3ULL + g.bond_count());
  for (auto l : labels) h = mix64(h ^ l);
  return h;
}

bool isomorphic(const MolecularGraph& a, const MolecularGraph& b) {
  if (a.size() != b.size() || a.bond_count() != b.bond_count()) return false;
  const auto la = refine(a, 3);
  const auto lb = refine(b, 3);
  auto sa = la, sb = lb;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa != sb) return false;
  std::vector<std::size_t> map(a.size());
  std::vector<bool> used(a.size(), false);
  return extend(a, b, la, lb, map, used, 0);
}

std::size_t IsoClassIndex::insert(const MolecularGraph& g) {
  const auto h = canonical_hash(g);
  auto [lo, hi] = by_hash_.equal_range(h);
  for (auto it = lo; it != hi; ++it) {
    if (isomorphic(representatives_[it->second], g)) return it->second;
  }
  const std::size_t id = representatives_.size();
  representatives_.push_back(g);
  by_hash_.emplace(h, id);
  return id;
}

bool IsoClassIndex::contains(const MolecularGraph& g) const {
  auto [lo, hi] = by_hash_.equal_range(canonical_hash(g));
  for (auto it = lo; it != hi; ++it) {
    if (isomorphic(representatives_[it->second], g)) return true;
  }
  return false;
}

GenerationReport evaluate_set(const std::vector<MolecularGraph>& samples, const std::vector<MolecularGraph>& train,
                              const Vocabulary& vocab, const GraphAF* model, const EvalOptions& options) {
  GenerationReport r;
  r.total = samples.size();
  r.valid_flags.assign(samples.size(), false);
  r.class_ids.assign(samples.size(), 0);
  r.novel_flags.assign(samples.size(), false);
  IsoClassIndex training;
  for (const auto& g : train) training.insert(g);
  IsoClassIndex generated;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& g = samples[k];
    if (g.empty() || structure_violation(g, vocab) || !valency_ok(g, vocab.atoms, vocab.bonds)) continue;
    r.valid_flags[k] = true;
    ++r.valid;
    const std::size_t before = generated.size();
    r.class_ids[k] = generated.insert(g);
    if (generated.size() > before) ++r.unique;
    if (!training.contains(g)) {
      r.novel_flags[k] = true;
      ++r.novel;
    }
    if (model && options.reconstruction && is_connected(g) && g.size() <= model->config().max_size) {
      Rng rng = make_rng(options.seed, "reconstruct", k);
      const auto ordered = training_order(*model, g, rng);
      ++r.reconstruct_total;
      if (reconstruct(*model, ordered, rng) == ordered) ++r.reconstructed;
    }
  }
  auto frac = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  r.validity = frac(r.valid, r.total);
  r.uniqueness = frac(r.unique, r.valid);
  r.uniqueness_all = frac(r.unique, r.total);
  r.novelty = frac(r.novel, r.valid);
  r.reconstruction = frac(r.reconstructed, r.reconstruct_total);
  return r;
}

std::vector<double> degree_histogram(const MolecularGraph& g, std::size_t bins) {
  std::vector<double> h(bins, 0.0);
  if (g.empty()) return h;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto d = g.degree(i);
    if (d >= bins) throw ShapeError("degree histogram too short");
    h[d] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(g.size());
  return h;
}

std::vector<double> clustering_histogram(const MolecularGraph& g) {
  constexpr std::size_t kBins = 100;
  std::vector<double> h(kBins, 0.0);
  if (g.empty()) return h;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    double c = 0.0;
    if (nb.size() >= 2) {
      std::size_t links = 0;
      for (std::size_t a = 0; a < nb.size(); ++a)
        for (std::size_t b = a + 1; b < nb.size(); ++b) links += g.has_bond(nb[a], nb[b]);
      c = 2.0 * static_cast<double>(links) / static_cast<double>(nb.size() * (nb.size() - 1));
    }
    const auto bin = std::min<std::size_t>(kBins - 1, static_cast<std::size_t>(c * kBins));
    h[bin] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(g.size());
  return h;
}

double mmd_histograms(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                      double sigma, MmdEstimator estimator) {
  if (a.empty() || b.empty()) throw DataError("MMD needs two non-empty sets");
  if (!(sigma > 0.0)) throw UsageError("MMD bandwidth must be positive");
  if (estimator == MmdEstimator::Unbiased && (a.size() < 2 || b.size() < 2)) {
    throw DataError("unbiased MMD needs at least two graphs per set");
  }
  auto kernel = [sigma](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("MMD histograms differ in length");
    double tv = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) tv += std::abs(x[k] - y[k]);
    tv *= 0.5;
    return std::exp(-tv * tv / (2.0 * sigma * sigma));
  };
  const bool unbiased = estimator == MmdEstimator::Unbiased;
  auto within = [&](const std::vector<std::vector<double>>& s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (!unbiased || i != j) sum += kernel(s[i], s[j]);
    const double n = static_cast<double>(s.size());
    return sum / (unbiased ? n * (n - 1.0) : n * n);
  };
  double cross = 0.0;
  for (const auto& x : a)
    for (const auto& y : b) cross += kernel(x, y);
  cross /= static_cast<double>(a.size() * b.size());
  const double value = within(a) + within(b) - 2.0 * cross;
  return unbiased ? std::max(0.0, value) : value;
}

double mmd(const std::vector<MolecularGraph>& a, const std::vector<MolecularGraph>& b, GraphStatistic statistic,
           double sigma, MmdEstimator estimator) {
  if (a.empty() || b.empty()) throw DataError("MMD needs two non-empty sets");
  std::vector<std::vector<double>> ha, hb;
  if (statistic == GraphStatistic::Degree) {
    std::size_t max_degree = 0;
    for (const auto* set : {&a, &b})
      for (const auto& g : *set)
        for (std::size_t i = 0; i < g.size(); ++i) max_degree = std::max(max_degree, g.degree(i));
    for (const auto& g : a) ha.push_back(degree_histogram(g, max_degree + 1));
    for (const auto& g : b) hb.push_back(degree_histogram(g, max_degree + 1));
  } else {
    for (const auto& g : a) ha.push_back(clustering_histogram(g));
    for (const auto& g : b) hb.push_back(clustering_histogram(g));
  }
  return mmd_histograms(ha, hb, sigma, estimator);
}

MmdReport mmd_report(const std::vector<MolecularGraph>& a, const std::vector<MolecularGraph>& b, double sigma) {
  return {mmd(a, b, GraphStatistic::Degree, sigma), mmd(a, b, GraphStatistic::Cluster, sigma), sigma};
}

namespace {

struct Row {
  std::string key;
  std::string count;
  double value;
};

std::vector<Row> report_rows(const GenerationReport& r, const MmdReport* mmd) {
  auto ratio = [](std::size_t a, std::size_t b) { return std::to_string(a) + "/" + std::to_string(b); };
  std::vector<Row> rows{
      {"validity", ratio(r.valid, r.total), r.validity},
      {"uniqueness", ratio(r.unique, r.valid), r.uniqueness},
      {"uniqueness_all", ratio(r.unique, r.total), r.uniqueness_all},
      {"novelty", ratio(r.novel, r.valid), r.novelty},
      {"reconstruction", ratio(r.reconstructed, r.reconstruct_total), r.reconstruction},
  };
  if (mmd) {
    rows.push_back({"mmd_degree", "-", mmd->degree});
    rows.push_back({"mmd_cluster", "-", mmd->cluster});
    rows.push_back({"mmd_bandwidth", "-", mmd->bandwidth});
  }
  return rows;
}

}  // namespace

void write_report_table(std::ostream& out, const GenerationReport& r, const MmdReport* mmd) {
  out << std::left << std::setw(16) << "metric" << std::right << std::setw(14) << "count" << std::setw(12) << "value"
      << '\n';
  for (const auto& row : report_rows(r, mmd)) {
    out << std::left << std::setw(16) << row.key << std::right << std::setw(14) << row.count << std::setw(12)
        << std::fixed << std::setprecision(6) << row.value << '\n';
  }
  out << std::defaultfloat;
}

void write_report_kv(std::ostream& out, const GenerationReport& r, const MmdReport* mmd) {
  out << std::setprecision(17);
  out << "total=" << r.total << '\n' << "valid=" << r.valid << '\n' << "unique=" << r.unique << '\n'
      << "novel=" << r.novel << '\n' << "reconstructed=" << r.reconstructed << '\n'
      << "reconstruct_total=" << r.reconstruct_total << '\n';
  for (const auto& row : report_rows(r, mmd)) out << row.key << '=' << row.value << '\n';
  out << std::setprecision(6);
}

void write_report_csv(std::ostream& out, const GenerationReport& r, const MmdReport* mmd) {
  out << "metric,count,value\n" << std::setprecision(17);
  for (const auto& row : report_rows(r, mmd)) out << row.key << ',' << row.count << ',' << row.value << '\n';
  out << std::setprecision(6);
}

}  // namespace graphaf
