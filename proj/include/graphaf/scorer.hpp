#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "graphaf/error.hpp"
#include "graphaf/graph.hpp"

namespace graphaf {

// A scorer could not produce a number for a molecule.
class ScorerError : public Error {
 public:
  using Error::Error;
};

class PropertyScorer {
 public:
  virtual ~PropertyScorer() = default;
  virtual double score(const MolecularGraph& g) const = 0;
  virtual std::string name() const = 0;
};

// Number of atoms.
class AtomCountScorer : public PropertyScorer {
 public:
  double score(const MolecularGraph& g) const override { return static_cast<double>(g.size()); }
  std::string name() const override { return "toy:atom-count"; }
};

// Minus the number of independent cycles (bonds - atoms + components).
class RingPenaltyScorer : public PropertyScorer {
 public:
  double score(const MolecularGraph& g) const override;
  std::string name() const override { return "toy:ring-penalty"; }
};

// Fraction of atoms of one type.
class AtomFractionScorer : public PropertyScorer {
 public:
  AtomFractionScorer(const AtomVocab& atoms, const std::string& symbol);
  double score(const MolecularGraph& g) const override;
  std::string name() const override { return "toy:atom-fraction:" + symbol_; }

 private:
  std::string symbol_;
  std::size_t type_;
};

// Long-lived child process: receives one MOLT record followed by "#END" per
// molecule and answers with one number per line.
class ExternalScorer : public PropertyScorer {
 public:
  ExternalScorer(std::string path, Vocabulary vocab);
  ~ExternalScorer() override;
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  double score(const MolecularGraph& g) const override;
  std::string name() const override { return "exec:" + path_; }

 private:
  std::string path_;
  Vocabulary vocab_;
  int fd_ = -1;
  int pid_ = -1;
  mutable std::string pending_;
  mutable std::mutex mutex_;
};

// "toy:atom-count", "toy:ring-penalty", "toy:atom-fraction:<symbol>" or
// "exec:<path>". Throws UsageError on anything else.
std::unique_ptr<PropertyScorer> make_scorer(const std::string& spec, const Vocabulary& vocab);

}  // namespace graphaf
