#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "graphaf/graph.hpp"

namespace graphaf {

// MOLT v1 text records:
//   #MOLT v1
//   atoms <n>
//   <index> <symbol>
//   bonds <m>
//   <i> <j> <order>
// Records in one stream are separated by blank lines.

struct MoltReadOptions {
  // Admit valency-violating molecules (metrics-only use).
  bool allow_invalid_valency = false;
};

std::string to_molt(const MolecularGraph& g, const Vocabulary& vocab);
void write_molt(std::ostream& out, std::span<const MolecularGraph> graphs, const Vocabulary& vocab);
void write_molt_file(const std::string& path, std::span<const MolecularGraph> graphs,
                     const Vocabulary& vocab);

// Throws DataError (with the line number) on malformed input, unknown
// symbols or bond orders, self-loops, duplicate bonds and, unless allowed,
// valency violations.
std::vector<MolecularGraph> read_molt(std::istream& in, const Vocabulary& vocab,
                                      MoltReadOptions options = {});
std::vector<MolecularGraph> read_molt_file(const std::string& path, const Vocabulary& vocab,
                                           MoltReadOptions options = {});
MolecularGraph parse_molt(const std::string& text, const Vocabulary& vocab,
                          MoltReadOptions options = {});

}  // namespace graphaf
