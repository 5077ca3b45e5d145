#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "graphaf/config.hpp"

namespace graphaf {

struct CommandOptions {
  bool trace = false;  // sample: dump per-step traces
  bool csv = false;    // evaluate: also write report.csv
};

extern const std::vector<std::string> kCommands;

// Training data named by cfg.dataset (generated from the "data" stream or
// read from a MOLT file).
std::vector<MolecularGraph> load_dataset(const RunConfig& cfg, const Vocabulary& vocab);

// Runs one command, writing artifacts and a manifest under cfg.out. Returns
// the process exit code; library errors propagate as exceptions.
int run_command(const std::string& command, const RunConfig& cfg, const CommandOptions& options,
                std::ostream& out, std::ostream& log);

// Invertibility, masking, gradient and valency suites on small random
// models. Prints one line per suite; true when all pass.
bool run_selfcheck(std::uint64_t seed, std::ostream& out);

// Exit code for an exception: 1 usage, 2 data, 3 numerical.
int exit_code_for(const std::exception& e);

}  // namespace graphaf
