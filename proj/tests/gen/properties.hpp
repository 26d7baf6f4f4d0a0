#pragma once

#include <cstdint>
#include <string>

#include "ov/ast.hpp"

namespace ovgen {

// Outcome of one randomized property run: how many cases were checked and how many held.
struct Tally {
  std::size_t cases = 0;
  std::size_t held = 0;
  std::string first_failure;

  bool pass() const { return cases > 0 && held == cases; }
  void record(bool ok, const std::string& what);
  std::string summary() const;
};

// Every aborted transaction leaves the state hash it found at begin. Stops after `aborts`
// post-check aborts have been observed.
Tally rollback_atomicity(std::uint64_t seed, std::size_t aborts);

// Symbolic interference against subtree enumeration on random forests of at most 20 nodes.
Tally interference_agreement(std::uint64_t seed, std::size_t instances);

struct BlockTallies {
  Tally serial;        // mined hash and statuses equal index-order serial execution
  Tally permutations;  // edge-free blocks: every serial order gives the mined hash
  Tally validator;     // accepted for workers 1, 2, 4 with identical output
};
BlockTallies block_properties(const ov::CoreProgram& ledger, std::uint64_t seed, std::size_t blocks,
                              std::size_t max_txns);

// Generated programs run to completion with no E-STUCK or other interpreter fault.
Tally progress(std::uint64_t seed, std::size_t programs);

}  // namespace ovgen
