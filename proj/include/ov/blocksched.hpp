#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ov/ast.hpp"
#include "ov/runtime.hpp"

namespace ov {

struct DeployEntry {
  std::string id;
  std::string cls;
  std::vector<Value> args;
};

struct SctSpec {
  std::string target;
  std::string method;
  std::vector<Value> args;
};

struct Block {
  std::vector<DeployEntry> deploy;
  std::vector<SctSpec> txns;
  unsigned workers = 1;
  std::uint64_t seed = 0;
};

// Throws std::runtime_error on malformed JSON or schema violations.
Block parse_block(std::string_view json);
std::string block_json(const Block& b);

struct ConflictGraph {
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted
  bool has(int i, int j) const;
  void add(int i, int j);
};

// Symbolic subtree intersection: no heap enumeration.
bool subtrees_meet(RtCtx a, RtCtx b, const OwnershipTree& tree);
bool interferes(const RtContract& d1, const RtContract& d2, const OwnershipTree& tree);

struct MinedBlock {
  ConflictGraph graph;
  std::vector<std::string> status;  // "committed" or "aborted:<reason>"
  std::string final_state_hash;
  std::uint64_t pre_checks = 0;
  std::uint64_t post_checks = 0;
  std::size_t conflict_restarts = 0;  // edges added after an observed access conflict
};

struct ValidationReport {
  bool accepted = false;
  std::string reason;  // empty, "E-BG-MISMATCH: ..", "hash mismatch" or "status mismatch"
  std::vector<std::string> status;
  std::string final_state_hash;
};

struct SerialResult {
  std::string final_state_hash;
  std::vector<std::string> status;
};

std::string mined_block_json(const MinedBlock& mb);
// Inverse of mined_block_json; ignores unknown keys. Throws std::runtime_error on malformed input.
MinedBlock parse_mined_block(std::string_view json);

class BlockRunner {
 public:
  explicit BlockRunner(const CoreProgram& p);

  // Fresh heap with every deploy executed; ids maps deploy ids to root locations. E-TARGET on failure.
  State deploy(const Block& b, std::map<std::string, Loc>& ids) const;
  // Each SCT's contract with This bound to its target. E-TARGET for unknown targets or methods.
  std::vector<RtContract> contracts(const Block& b, const State& deployed,
                                    const std::map<std::string, Loc>& ids) const;
  ConflictGraph build_conflict_graph(const Block& b) const;

  MinedBlock mine(const Block& b) const;
  ValidationReport validate(const MinedBlock& mb, const Block& b) const;
  SerialResult serial_execute(const Block& b, const std::vector<int>& order) const;

 private:
  struct LevelRun;
  const CoreProgram& program_;
};

}  // namespace ov
