#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace graphaf {

// Atom types and their maximum valences.
class AtomVocab {
 public:
  AtomVocab() = default;
  AtomVocab(std::vector<std::string> symbols, std::vector<int> valences);

  // C(4), N(3), O(2).
  static AtomVocab organic();
  // Parses "C:4,N:3,O:2".
  static AtomVocab parse(std::string_view text);

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::size_t type) const { return symbols_.at(type); }
  int valence(std::size_t type) const { return valences_.at(type); }
  std::optional<std::size_t> index_of(std::string_view symbol) const;
  std::string to_string() const;

  bool operator==(const AtomVocab&) const = default;

 private:
  std::vector<std::string> symbols_;
  std::vector<int> valences_;
};

// Bond orders; category index b (== orders().size()) is the virtual no-edge type.
class BondVocab {
 public:
  BondVocab() = default;
  explicit BondVocab(std::vector<int> orders);

  // Single, double, triple.
  static BondVocab organic();
  // Parses "1,2,3".
  static BondVocab parse(std::string_view text);

  std::size_t size() const { return orders_.size(); }
  std::size_t no_edge() const { return orders_.size(); }
  std::size_t categories() const { return orders_.size() + 1; }
  // Bond order of an edge category; 0 for no-edge.
  int order(std::size_t category) const {
    return category == no_edge() ? 0 : orders_.at(category);
  }
  std::optional<std::size_t> category_of(int order) const;
  const std::vector<int>& orders() const { return orders_; }
  std::string to_string() const;

  bool operator==(const BondVocab&) const = default;

 private:
  std::vector<int> orders_;
};

struct Vocabulary {
  AtomVocab atoms;
  BondVocab bonds;

  std::size_t node_types() const { return atoms.size(); }
  std::size_t edge_categories() const { return bonds.categories(); }

  static Vocabulary organic() { return {AtomVocab::organic(), BondVocab::organic()}; }
  // Single node type and single edge type, for generic (non-chemical) graphs.
  static Vocabulary generic(int max_degree);

  bool operator==(const Vocabulary&) const = default;
};

// Discrete graph: node types plus a dense symmetric matrix of edge categories.
// The diagonal and every absent bond hold the no-edge category.
class MolecularGraph {
 public:
  MolecularGraph() = default;
  explicit MolecularGraph(std::size_t no_edge) : no_edge_(no_edge) {}
  MolecularGraph(std::vector<std::size_t> node_types, std::size_t no_edge);

  std::size_t size() const { return types_.size(); }
  bool empty() const { return types_.empty(); }
  std::size_t no_edge() const { return no_edge_; }

  std::size_t node_type(std::size_t i) const { return types_.at(i); }
  void set_node_type(std::size_t i, std::size_t type) { types_.at(i) = type; }
  const std::vector<std::size_t>& node_types() const { return types_; }

  std::size_t edge(std::size_t i, std::size_t j) const { return edges_[i * size() + j]; }
  bool has_bond(std::size_t i, std::size_t j) const { return edge(i, j) != no_edge_; }
  // Sets both (i, j) and (j, i). Self-loops are rejected.
  void set_edge(std::size_t i, std::size_t j, std::size_t category);

  std::size_t add_node(std::size_t type);
  void remove_last_node();
  std::size_t bond_count() const;
  std::vector<std::size_t> neighbors(std::size_t i) const;
  std::size_t degree(std::size_t i) const;

  // Subgraph induced by the first `count` nodes.
  MolecularGraph prefix(std::size_t count) const;

  bool operator==(const MolecularGraph&) const = default;

 private:
  std::vector<std::size_t> types_;
  std::vector<std::uint8_t> edges_;
  std::size_t no_edge_ = 0;
};

// Relabels nodes: node k of the result is node new_to_old[k] of g.
MolecularGraph permute(const MolecularGraph& g, const std::vector<std::size_t>& new_to_old);

// Total bond order at node i.
int bond_order_sum(const MolecularGraph& g, const BondVocab& bonds, std::size_t i);

// True iff setting edge (i, j) to `proposed` keeps both endpoints within their
// valence. Replaces any existing category at (i, j). No-edge always passes.
bool check_valency(const MolecularGraph& g, const AtomVocab& atoms, const BondVocab& bonds,
                   std::size_t i, std::size_t j, std::size_t proposed);

// Whole-graph audit; returns a description of the first violation.
std::optional<std::string> valency_violation(const MolecularGraph& g, const AtomVocab& atoms,
                                             const BondVocab& bonds);
inline bool valency_ok(const MolecularGraph& g, const AtomVocab& atoms, const BondVocab& bonds) {
  return !valency_violation(g, atoms, bonds).has_value();
}

// Free valence per atom. Throws DataError on a valency-violating graph.
std::vector<int> implicit_hydrogens(const MolecularGraph& g, const AtomVocab& atoms,
                                    const BondVocab& bonds);

// First node not reachable from `start`, if any.
std::optional<std::size_t> first_unreachable(const MolecularGraph& g, std::size_t start = 0);
bool is_connected(const MolecularGraph& g);

// Structural checks: symmetric, no-edge diagonal, categories and types in range.
std::optional<std::string> structure_violation(const MolecularGraph& g, const Vocabulary& vocab);

}  // namespace graphaf
