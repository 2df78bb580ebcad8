#pragma once

#include "rpmdag/dag.hpp"

#include <cstdint>
#include <set>

namespace rpmdag {

inline constexpr std::size_t kOracleBlockCap = 20;

/// Exhaustive maximum k-cluster search (the problem is NP-hard, so this is
/// only meant as a reference on small DAGs). Among maximum-cardinality
/// clusters the lexicographically smallest sorted id sequence is returned.
/// Throws TooLarge above `cap` blocks.
std::set<BlockId> max_k_cluster_bruteforce(const BlockDag& dag, std::uint32_t k,
                                           std::size_t cap = kOracleBlockCap);

}  // namespace rpmdag
