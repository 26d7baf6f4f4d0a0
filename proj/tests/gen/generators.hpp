#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ov/blocksched.hpp"
#include "ov/ownership.hpp"
#include "ov/runtime.hpp"

namespace ovgen {

using Rng = std::mt19937_64;

// Well-typed OV source: two classes with owned children, randomized invariants,
// method bodies and a main mixing calls, nested transactions, forks and failures.
std::string random_program(Rng& rng);

// Like random_program, but main ends with top-level transactions whose bodies
// leave some invariant false, so each of them must roll back.
std::string random_violating_program(Rng& rng);

// A block over the Account/Wallet/Token ledger program with at most max_txns SCTs.
ov::Block random_block(Rng& rng, std::size_t max_txns);

// Random ownership forest over locations 0..n-1 (all epoch 0); parent[i] < i or -1 for Top.
struct RandomTree {
  std::vector<int> parent;
  ov::OwnershipTree tree;
};
RandomTree random_tree(Rng& rng, std::size_t max_nodes);
ov::RtCtx random_ctx(Rng& rng, const RandomTree& t);

// Oracle: subtree as an explicit set computed from the parent array alone.
std::set<ov::Loc> enumerate_subtree(const RandomTree& t, ov::RtCtx k);
// Oracle: the three-way intersection test evaluated on enumerated sets.
bool interferes_by_enumeration(const RandomTree& t, const ov::RtContract& a, const ov::RtContract& b);

}  // namespace ovgen
