#pragma once

#include "rpmdag/digest.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rpmdag {

using BlockId = Digest;
using SimTime = double;

/// A vertex of the blockDAG. The id is the digest of the canonical encoding
/// of every other field; parents are kept sorted so the encoding is unique.
struct Block {
  BlockId id;
  std::vector<BlockId> parents;
  std::vector<Bytes> payload;
  SimTime timestamp = 0;
  std::string creator;

  static Block make(std::vector<BlockId> parents, std::vector<Bytes> payload, SimTime timestamp,
                    std::string creator);

  Bytes canonical_bytes() const;
  BlockId compute_id() const;
  bool is_genesis() const { return parents.empty(); }
};

/// Append-only DAG of blocks. Blocks are assigned dense indices in insertion
/// order, which is always a parents-first order.
class BlockDag {
 public:
  using Index = std::uint32_t;

  void add_block(Block block);

  bool empty() const { return blocks_.empty(); }
  std::size_t size() const { return blocks_.size(); }
  bool contains(const BlockId& id) const { return index_.count(id) != 0; }
  const Block& block(const BlockId& id) const { return blocks_[require_index(id)]; }
  const BlockId& genesis() const;
  const std::set<BlockId>& tips() const { return tips_; }

  std::set<BlockId> children(const BlockId& id) const;
  std::set<BlockId> past(const BlockId& id) const;
  std::set<BlockId> future(const BlockId& id) const;
  std::set<BlockId> anticone(const BlockId& id) const;

  /// True iff `order` lists every block after all of its parents. Throws
  /// NotAPermutation unless `order` contains each block exactly once.
  bool is_linear_extension(std::span<const BlockId> order) const;

  std::optional<Index> index_of(const BlockId& id) const;
  Index require_index(const BlockId& id) const;
  const Block& at(Index i) const { return blocks_[i]; }
  const BlockId& id_at(Index i) const { return blocks_[i].id; }
  std::span<const Index> parent_indices(Index i) const { return parents_[i]; }
  std::span<const Index> child_indices(Index i) const { return children_[i]; }
  /// Longest parent path from genesis; genesis has height 0.
  std::uint32_t height(Index i) const { return heights_[i]; }

  std::vector<BlockId> insertion_order() const;

 private:
  std::vector<Index> closure(Index start, bool towards_parents) const;

  std::vector<Block> blocks_;
  std::unordered_map<BlockId, Index, DigestHash> index_;
  std::vector<std::vector<Index>> parents_;
  std::vector<std::vector<Index>> children_;
  std::vector<std::uint32_t> heights_;
  std::set<BlockId> tips_;
};

/// Memoized ancestor queries over a (possibly growing) DAG. Not thread-safe;
/// each consumer owns its own instance.
class Reachability {
 public:
  explicit Reachability(const BlockDag& dag) : dag_(&dag) {}

  /// a ∈ past(b)
  bool is_ancestor(BlockDag::Index a, BlockDag::Index b);
  bool in_anticone(BlockDag::Index a, BlockDag::Index b) {
    return a != b && !is_ancestor(a, b) && !is_ancestor(b, a);
  }

 private:
  bool search(BlockDag::Index a, BlockDag::Index b);

  const BlockDag* dag_;
  std::unordered_map<std::uint64_t, bool> memo_;
  std::vector<std::uint32_t> seen_;
  std::uint32_t epoch_ = 0;
  std::vector<BlockDag::Index> stack_;
};

/// |anticone(b)| for every block, indexed like the DAG. Runs in
/// O(n^2 / 64) word operations using column-chunked ancestor bitsets.
std::vector<std::size_t> anticone_sizes(const BlockDag& dag);
/// |anticone(b) ∩ members| for every block; `members` is indexed like the DAG.
std::vector<std::size_t> anticone_sizes_within(const BlockDag& dag, const std::vector<bool>& members);

}  // namespace rpmdag
