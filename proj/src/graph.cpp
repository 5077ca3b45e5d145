#include "graphaf/graph.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <set>
#include <sstream>

#include "graphaf/error.hpp"

namespace graphaf {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view s, std::string_view what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("invalid integer '" + std::string(s) + "' in " + std::string(what));
  }
  return value;
}

}  // namespace

AtomVocab::AtomVocab(std::vector<std::string> symbols, std::vector<int> valences)
    : symbols_(std::move(symbols)), valences_(std::move(valences)) {
  if (symbols_.empty()) throw UsageError("atom vocabulary is empty");
  if (symbols_.size() != valences_.size()) {
    throw UsageError("atom vocabulary: symbol/valence count mismatch");
  }
  std::set<std::string> seen;
  for (std::size_t t = 0; t < symbols_.size(); ++t) {
    if (symbols_[t].empty()) throw UsageError("atom vocabulary: empty symbol");
    if (!seen.insert(symbols_[t]).second) {
      throw UsageError("atom vocabulary: duplicate symbol " + symbols_[t]);
    }
    if (valences_[t] < 1) {
      throw UsageError("atom vocabulary: valence of " + symbols_[t] + " must be >= 1");
    }
  }
}

AtomVocab AtomVocab::organic() { return AtomVocab({"C", "N", "O"}, {4, 3, 2}); }

AtomVocab AtomVocab::parse(std::string_view text) {
  std::vector<std::string> symbols;
  std::vector<int> valences;
  for (auto item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw UsageError("atom vocabulary entry '" + std::string(item) + "' is not SYMBOL:VALENCE");
    }
    symbols.emplace_back(trim(item.substr(0, colon)));
    valences.push_back(parse_int(trim(item.substr(colon + 1)), "atom vocabulary"));
  }
  return AtomVocab(std::move(symbols), std::move(valences));
}

std::optional<std::size_t> AtomVocab::index_of(std::string_view symbol) const {
  for (std::size_t t = 0; t < symbols_.size(); ++t) {
    if (symbols_[t] == symbol) return t;
  }
  return std::nullopt;
}

std::string AtomVocab::to_string() const {
  std::string out;
  for (std::size_t t = 0; t < symbols_.size(); ++t) {
    if (t) out += ',';
    out += symbols_[t] + ":" + std::to_string(valences_[t]);
  }
  return out;
}

BondVocab::BondVocab(std::vector<int> orders) : orders_(std::move(orders)) {
  if (orders_.empty()) throw UsageError("bond vocabulary is empty");
  for (std::size_t k = 0; k < orders_.size(); ++k) {
    if (orders_[k] <= 0) throw UsageError("bond orders must be positive");
    if (k && orders_[k] <= orders_[k - 1]) {
      throw UsageError("bond orders must be strictly increasing");
    }
  }
  if (orders_.size() >= 255) throw UsageError("too many bond types");
}

BondVocab BondVocab::organic() { return BondVocab({1, 2, 3}); }

BondVocab BondVocab::parse(std::string_view text) {
  std::vector<int> orders;
  for (auto item : split(text, ',')) orders.push_back(parse_int(item, "bond vocabulary"));
  return BondVocab(std::move(orders));
}

std::optional<std::size_t> BondVocab::category_of(int order) const {
  for (std::size_t k = 0; k < orders_.size(); ++k) {
    if (orders_[k] == order) return k;
  }
  return std::nullopt;
}

std::string BondVocab::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < orders_.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(orders_[k]);
  }
  return out;
}

Vocabulary Vocabulary::generic(int max_degree) {
  return {AtomVocab({"X"}, {max_degree}), BondVocab({1})};
}

MolecularGraph::MolecularGraph(std::vector<std::size_t> node_types, std::size_t no_edge)
    : types_(std::move(node_types)),
      edges_(types_.size() * types_.size(), static_cast<std::uint8_t>(no_edge)),
      no_edge_(no_edge) {}

void MolecularGraph::set_edge(std::size_t i, std::size_t j, std::size_t category) {
  const std::size_t n = size();
  if (i >= n || j >= n) throw DataError("edge index out of range");
  if (i == j) throw DataError("self-loop on node " + std::to_string(i));
  if (category > no_edge_) throw DataError("edge category out of range");
  edges_[i * n + j] = static_cast<std::uint8_t>(category);
  edges_[j * n + i] = static_cast<std::uint8_t>(category);
}

std::size_t MolecularGraph::add_node(std::size_t type) {
  const std::size_t n = size();
  std::vector<std::uint8_t> grown((n + 1) * (n + 1), static_cast<std::uint8_t>(no_edge_));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(edges_.begin() + static_cast<std::ptrdiff_t>(i * n), n,
                grown.begin() + static_cast<std::ptrdiff_t>(i * (n + 1)));
  }
  edges_ = std::move(grown);
  types_.push_back(type);
  return n;
}

void MolecularGraph::remove_last_node() {
  if (types_.empty()) return;
  *this = prefix(size() - 1);
}

std::size_t MolecularGraph::bond_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) count += has_bond(i, j) ? 1 : 0;
  }
  return count;
}

std::vector<std::size_t> MolecularGraph::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != i && has_bond(i, j)) out.push_back(j);
  }
  return out;
}

std::size_t MolecularGraph::degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < size(); ++j) d += (j != i && has_bond(i, j)) ? 1 : 0;
  return d;
}

MolecularGraph MolecularGraph::prefix(std::size_t count) const {
  count = std::min(count, size());
  MolecularGraph out(std::vector<std::size_t>(types_.begin(), types_.begin() + static_cast<std::ptrdiff_t>(count)),
                     no_edge_);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) out.edges_[i * count + j] = edges_[i * size() + j];
  }
  return out;
}

MolecularGraph permute(const MolecularGraph& g, const std::vector<std::size_t>& new_to_old) {
  const std::size_t n = g.size();
  if (new_to_old.size() != n) throw DataError("permutation size mismatch");
  std::vector<std::size_t> types(n);
  for (std::size_t k = 0; k < n; ++k) types[k] = g.node_type(new_to_old.at(k));
  MolecularGraph out(std::move(types), g.no_edge());
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      const auto cat = g.edge(new_to_old[a], new_to_old[b]);
      if (cat != g.no_edge()) out.set_edge(a, b, cat);
    }
  }
  return out;
}

int bond_order_sum(const MolecularGraph& g, const BondVocab& bonds, std::size_t i) {
  int total = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j != i) total += bonds.order(g.edge(i, j));
  }
  return total;
}

bool check_valency(const MolecularGraph& g, const AtomVocab& atoms, const BondVocab& bonds,
                   std::size_t i, std::size_t j, std::size_t proposed) {
  if (proposed == bonds.no_edge()) return true;
  const int delta = bonds.order(proposed) - bonds.order(g.edge(i, j));
  return bond_order_sum(g, bonds, i) + delta <= atoms.valence(g.node_type(i)) &&
         bond_order_sum(g, bonds, j) + delta <= atoms.valence(g.node_type(j));
}

std::optional<std::string> valency_violation(const MolecularGraph& g, const AtomVocab& atoms,
                                             const BondVocab& bonds) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int used = bond_order_sum(g, bonds, i);
    const int allowed = atoms.valence(g.node_type(i));
    if (used > allowed) {
      return "atom " + std::to_string(i) + " (" + atoms.symbol(g.node_type(i)) + ") has bond order " +
             std::to_string(used) + " > valence " + std::to_string(allowed);
    }
  }
  return std::nullopt;
}

std::vector<int> implicit_hydrogens(const MolecularGraph& g, const AtomVocab& atoms,
                                    const BondVocab& bonds) {
  if (auto why = valency_violation(g, atoms, bonds)) throw DataError(*why);
  std::vector<int> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = atoms.valence(g.node_type(i)) - bond_order_sum(g, bonds, i);
  }
  return out;
}

std::optional<std::size_t> first_unreachable(const MolecularGraph& g, std::size_t start) {
  const std::size_t n = g.size();
  if (n == 0) return std::nullopt;
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{start};
  seen[start] = true;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (std::size_t v = 0; v < n; ++v) {
      if (v != u && !seen[v] && g.has_bond(u, v)) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!seen[v]) return v;
  }
  return std::nullopt;
}

bool is_connected(const MolecularGraph& g) { return !first_unreachable(g).has_value(); }

std::optional<std::string> structure_violation(const MolecularGraph& g, const Vocabulary& vocab) {
  if (g.no_edge() != vocab.bonds.no_edge()) return "graph no-edge index does not match bond vocabulary";
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.node_type(i) >= vocab.node_types()) return "node " + std::to_string(i) + " has unknown type";
    if (g.edge(i, i) != g.no_edge()) return "node " + std::to_string(i) + " has a self-loop";
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g.edge(i, j) != g.edge(j, i)) return "edge matrix is not symmetric";
      if (g.edge(i, j) > g.no_edge()) return "edge category out of range";
    }
  }
  return std::nullopt;
}

}  // namespace graphaf
