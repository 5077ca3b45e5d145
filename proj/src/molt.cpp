#include "graphaf/molt.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "graphaf/error.hpp"

namespace graphaf {

std::string to_molt(const MolecularGraph& g, const Vocabulary& vocab) {
  std::ostringstream out;
  out << "#MOLT v1\n" << "atoms " << g.size() << '\n';
  for (std::size_t i = 0; i < g.size(); ++i) out << i << ' ' << vocab.atoms.symbol(g.node_type(i)) << '\n';
  out << "bonds " << g.bond_count() << '\n';
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      if (g.has_bond(i, j)) out << i << ' ' << j << ' ' << vocab.bonds.order(g.edge(i, j)) << '\n';
    }
  }
  return out.str();
}

void write_molt(std::ostream& out, std::span<const MolecularGraph> graphs, const Vocabulary& vocab) {
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    if (k) out << '\n';
    out << to_molt(graphs[k], vocab);
  }
}

void write_molt_file(const std::string& path, std::span<const MolecularGraph> graphs,
                     const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_molt(out, graphs, vocab);
  if (!out) throw DataError("failed writing " + path);
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next line that is not blank; false at end of input.
  bool next_content(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next_content(line)) fail(std::string("unexpected end of input, expected ") + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw DataError("MOLT line " + std::to_string(number_) + ": " + message);
  }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

std::size_t parse_count(LineReader& reader, const std::string& line, const std::string& keyword) {
  std::istringstream ss(line);
  std::string word;
  long long count = -1;
  std::string extra;
  if (!(ss >> word >> count) || word != keyword || count < 0 || (ss >> extra)) {
    reader.fail("expected '" + keyword + " <count>', got '" + line + "'");
  }
  return static_cast<std::size_t>(count);
}

MolecularGraph read_record(LineReader& reader, const Vocabulary& vocab, const MoltReadOptions& options) {
  const std::size_t n = parse_count(reader, reader.require("atoms line"), "atoms");
  std::vector<std::size_t> types(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string line = reader.require("atom line");
    std::istringstream ss(line);
    long long index = -1;
    std::string symbol, extra;
    if (!(ss >> index >> symbol) || (ss >> extra)) reader.fail("malformed atom line '" + line + "'");
    if (index != static_cast<long long>(k)) reader.fail("atom indices must be 0..n-1 in order");
    const auto type = vocab.atoms.index_of(symbol);
    if (!type) reader.fail("unknown atom symbol '" + symbol + "'");
    types[k] = *type;
  }
  MolecularGraph g(std::move(types), vocab.bonds.no_edge());
  const std::size_t m = parse_count(reader, reader.require("bonds line"), "bonds");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < m; ++k) {
    const std::string line = reader.require("bond line");
    std::istringstream ss(line);
    long long i = -1, j = -1;
    int order = 0;
    std::string extra;
    if (!(ss >> i >> j >> order) || (ss >> extra)) reader.fail("malformed bond line '" + line + "'");
    if (i < 0 || j < 0 || i >= static_cast<long long>(n) || j >= static_cast<long long>(n)) {
      reader.fail("bond index out of range in '" + line + "'");
    }
    if (i == j) reader.fail("self-loop on atom " + std::to_string(i));
    const std::pair<std::size_t, std::size_t> key = std::minmax(static_cast<std::size_t>(i),
                                                                static_cast<std::size_t>(j));
    if (!seen.insert(key).second) reader.fail("duplicate bond " + std::to_string(key.first) + "-" +
                                              std::to_string(key.second));
    const auto category = vocab.bonds.category_of(order);
    if (!category) reader.fail("unknown bond order " + std::to_string(order));
    g.set_edge(key.first, key.second, *category);
  }
  if (!options.allow_invalid_valency) {
    if (auto why = valency_violation(g, vocab.atoms, vocab.bonds)) reader.fail("valency violation: " + *why);
  }
  return g;
}

}  // namespace

std::vector<MolecularGraph> read_molt(std::istream& in, const Vocabulary& vocab, MoltReadOptions options) {
  LineReader reader(in);
  std::vector<MolecularGraph> out;
  std::string line;
  while (reader.next_content(line)) {
    if (line == "#END") continue;
    if (line != "#MOLT v1") reader.fail("expected '#MOLT v1' header, got '" + line + "'");
    out.push_back(read_record(reader, vocab, options));
  }
  return out;
}

std::vector<MolecularGraph> read_molt_file(const std::string& path, const Vocabulary& vocab,
                                           MoltReadOptions options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_molt(in, vocab, options);
}

MolecularGraph parse_molt(const std::string& text, const Vocabulary& vocab, MoltReadOptions options) {
  std::istringstream in(text);
  auto graphs = read_molt(in, vocab, options);
  if (graphs.size() != 1) {
    throw DataError("expected exactly one MOLT record, found " + std::to_string(graphs.size()));
  }
  return std::move(graphs.front());
}

}  // namespace graphaf
