#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphaf/flow.hpp"
#include "graphaf/graph.hpp"

namespace graphaf {

// Three rounds of neighbourhood-label refinement over (type, multiset of
// (bond category, neighbour label)), folded into an order-free digest.
std::uint64_t canonical_hash(const MolecularGraph& g);

// Exact check by backtracking over refinement-compatible node pairs.
bool isomorphic(const MolecularGraph& a, const MolecularGraph& b);

// Isomorphism classes keyed by canonical_hash; hash collisions are resolved
// with isomorphic().
class IsoClassIndex {
 public:
  // Class id of g, registering a new class when none matches.
  std::size_t insert(const MolecularGraph& g);
  bool contains(const MolecularGraph& g) const;
  std::size_t size() const { return representatives_.size(); }

 private:
  std::unordered_multimap<std::uint64_t, std::size_t> by_hash_;
  std::vector<MolecularGraph> representatives_;
};

struct GenerationReport {
  std::size_t total = 0;
  std::size_t valid = 0;
  std::size_t unique = 0;  // isomorphism classes among valid samples
  std::size_t novel = 0;   // valid samples whose class is absent from training
  std::size_t reconstructed = 0;
  std::size_t reconstruct_total = 0;
  double validity = 0.0;
  double uniqueness = 0.0;       // unique / valid
  double uniqueness_all = 0.0;   // unique / total
  double novelty = 0.0;          // novel / valid
  double reconstruction = 0.0;   // reconstructed / reconstruct_total
  std::vector<bool> valid_flags;
  std::vector<std::size_t> class_ids;  // per sample; valid ones only meaningful
  std::vector<bool> novel_flags;
};

struct EvalOptions {
  bool reconstruction = true;
  std::uint64_t seed = 0;
};

// Validity is the valency audit. Reconstruction round-trips each valid
// sample (after a window-compatible breadth-first relabeling) when a model
// is given.
GenerationReport evaluate_set(const std::vector<MolecularGraph>& samples, const std::vector<MolecularGraph>& train,
                              const Vocabulary& vocab, const GraphAF* model, const EvalOptions& options = {});

enum class GraphStatistic { Degree, Cluster };
enum class MmdEstimator { Biased, Unbiased };

// Normalised degree histogram padded to `bins` (max degree + 1).
std::vector<double> degree_histogram(const MolecularGraph& g, std::size_t bins);
// Local clustering coefficients in 100 bins over [0, 1].
std::vector<double> clustering_histogram(const MolecularGraph& g);

// Squared MMD with k(x, y) = exp(-TV(x, y)^2 / (2 sigma^2)); the unbiased
// form drops diagonal terms and is clamped at zero.
double mmd_histograms(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                      double sigma, MmdEstimator estimator);
double mmd(const std::vector<MolecularGraph>& a, const std::vector<MolecularGraph>& b, GraphStatistic statistic,
           double sigma = 1.0, MmdEstimator estimator = MmdEstimator::Unbiased);

struct MmdReport {
  double degree = 0.0;
  double cluster = 0.0;
  double bandwidth = 1.0;
};
MmdReport mmd_report(const std::vector<MolecularGraph>& a, const std::vector<MolecularGraph>& b,
                     double sigma = 1.0);

void write_report_table(std::ostream& out, const GenerationReport& r, const MmdReport* mmd = nullptr);
void write_report_kv(std::ostream& out, const GenerationReport& r, const MmdReport* mmd = nullptr);
void write_report_csv(std::ostream& out, const GenerationReport& r, const MmdReport* mmd = nullptr);

}  // namespace graphaf
