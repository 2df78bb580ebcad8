#include "rpmdag/dag.hpp"

#include "rpmdag/error.hpp"

#include <algorithm>
#include <bit>

namespace rpmdag {

Block Block::make(std::vector<BlockId> parents, std::vector<Bytes> payload, SimTime timestamp,
                  std::string creator) {
  Block b;
  std::sort(parents.begin(), parents.end());
  b.parents = std::move(parents);
  b.payload = std::move(payload);
  b.timestamp = timestamp;
  b.creator = std::move(creator);
  b.id = b.compute_id();
  return b;
}

Bytes Block::canonical_bytes() const {
  std::vector<BlockId> sorted = parents;
  std::sort(sorted.begin(), sorted.end());
  CanonicalWriter w;
  w.u64(sorted.size());
  for (const auto& p : sorted) w.digest(p);
  w.u64(payload.size());
  for (const auto& tx : payload) w.bytes(tx);
  w.f64(timestamp);
  w.str(creator);
  return std::move(w).take();
}

BlockId Block::compute_id() const { return sha256(canonical_bytes()); }

void BlockDag::add_block(Block block) {
  if (contains(block.id)) throw Error(Errc::DuplicateBlock, block.id.short_hex());
  if (block.compute_id() != block.id) {
    throw Error(Errc::InvalidInput, "block id does not match its content: " + block.id.short_hex());
  }
  if (block.is_genesis() && !blocks_.empty()) {
    throw Error(Errc::InvalidInput, "dag already has a genesis block");
  }
  if (!block.is_genesis() && blocks_.empty()) {
    throw Error(Errc::MissingParent, "first block must be genesis");
  }

  std::vector<Index> parent_idx;
  parent_idx.reserve(block.parents.size());
  std::uint32_t height = 0;
  for (const auto& p : block.parents) {
    auto it = index_.find(p);
    if (it == index_.end()) {
      throw Error(Errc::MissingParent, p.short_hex() + " (child " + block.id.short_hex() + ")");
    }
    if (std::find(parent_idx.begin(), parent_idx.end(), it->second) != parent_idx.end()) {
      throw Error(Errc::InvalidInput, "duplicate parent " + p.short_hex());
    }
    parent_idx.push_back(it->second);
    height = std::max(height, heights_[it->second] + 1);
  }

  const auto idx = static_cast<Index>(blocks_.size());
  for (auto p : parent_idx) {
    children_[p].push_back(idx);
    tips_.erase(blocks_[p].id);
  }
  tips_.insert(block.id);
  index_.emplace(block.id, idx);
  parents_.push_back(std::move(parent_idx));
  children_.emplace_back();
  heights_.push_back(height);
  blocks_.push_back(std::move(block));
}

const BlockId& BlockDag::genesis() const {
  if (blocks_.empty()) throw Error(Errc::UnknownBlock, "empty dag has no genesis");
  return blocks_.front().id;
}

std::optional<BlockDag::Index> BlockDag::index_of(const BlockId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

BlockDag::Index BlockDag::require_index(const BlockId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::UnknownBlock, id.short_hex());
  return it->second;
}

std::vector<BlockDag::Index> BlockDag::closure(Index start, bool towards_parents) const {
  std::vector<char> seen(blocks_.size(), 0);
  std::vector<Index> stack{start};
  std::vector<Index> out;
  seen[start] = 1;
  while (!stack.empty()) {
    Index cur = stack.back();
    stack.pop_back();
    const auto& next = towards_parents ? parents_[cur] : children_[cur];
    for (Index n : next) {
      if (seen[n]) continue;
      seen[n] = 1;
      out.push_back(n);
      stack.push_back(n);
    }
  }
  return out;
}

std::set<BlockId> BlockDag::children(const BlockId& id) const {
  std::set<BlockId> out;
  for (Index c : children_[require_index(id)]) out.insert(blocks_[c].id);
  return out;
}

std::set<BlockId> BlockDag::past(const BlockId& id) const {
  std::set<BlockId> out;
  for (Index i : closure(require_index(id), true)) out.insert(blocks_[i].id);
  return out;
}

std::set<BlockId> BlockDag::future(const BlockId& id) const {
  std::set<BlockId> out;
  for (Index i : closure(require_index(id), false)) out.insert(blocks_[i].id);
  return out;
}

std::set<BlockId> BlockDag::anticone(const BlockId& id) const {
  const Index self = require_index(id);
  std::vector<char> related(blocks_.size(), 0);
  related[self] = 1;
  for (Index i : closure(self, true)) related[i] = 1;
  for (Index i : closure(self, false)) related[i] = 1;
  std::set<BlockId> out;
  for (Index i = 0; i < blocks_.size(); ++i)
    if (!related[i]) out.insert(blocks_[i].id);
  return out;
}

bool BlockDag::is_linear_extension(std::span<const BlockId> order) const {
  if (order.size() != blocks_.size()) {
    throw Error(Errc::NotAPermutation, "order has " + std::to_string(order.size()) +
                                           " entries, dag has " + std::to_string(blocks_.size()));
  }
  std::vector<std::size_t> position(blocks_.size(), SIZE_MAX);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    auto idx = index_of(order[pos]);
    if (!idx) throw Error(Errc::NotAPermutation, "unknown block " + order[pos].short_hex());
    if (position[*idx] != SIZE_MAX) {
      throw Error(Errc::NotAPermutation, "repeated block " + order[pos].short_hex());
    }
    position[*idx] = pos;
  }
  for (Index i = 0; i < blocks_.size(); ++i)
    for (Index p : parents_[i])
      if (position[p] > position[i]) return false;
  return true;
}

std::vector<BlockId> BlockDag::insertion_order() const {
  std::vector<BlockId> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) out.push_back(b.id);
  return out;
}

bool Reachability::is_ancestor(BlockDag::Index a, BlockDag::Index b) {
  if (a == b) return false;
  if (dag_->height(a) >= dag_->height(b)) return false;
  if (a == 0) return true;  // genesis precedes everything
  for (auto p : dag_->parent_indices(b))
    if (p == a) return true;

  const std::uint64_t key = (std::uint64_t{a} << 32) | b;
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const bool found = search(a, b);
  if (memo_.size() > (1u << 22)) memo_.clear();
  memo_.emplace(key, found);
  return found;
}

bool Reachability::search(BlockDag::Index a, BlockDag::Index b) {
  if (seen_.size() < dag_->size()) seen_.resize(dag_->size(), 0);
  if (++epoch_ == 0) {
    std::fill(seen_.begin(), seen_.end(), 0);
    epoch_ = 1;
  }
  const auto floor = dag_->height(a);
  stack_.clear();
  stack_.push_back(b);
  seen_[b] = epoch_;
  while (!stack_.empty()) {
    auto cur = stack_.back();
    stack_.pop_back();
    for (auto p : dag_->parent_indices(cur)) {
      if (p == a) return true;
      if (seen_[p] == epoch_ || dag_->height(p) <= floor) continue;
      seen_[p] = epoch_;
      stack_.push_back(p);
    }
  }
  return false;
}

namespace {

// For every block, counts members of its strict ancestor (or descendant) set.
std::vector<std::size_t> closure_counts(const BlockDag& dag, bool towards_parents,
                                        const std::vector<bool>& members) {
  const std::size_t n = dag.size();
  constexpr std::size_t kChunkBits = 4096;
  constexpr std::size_t kWords = kChunkBits / 64;
  std::vector<std::size_t> counts(n, 0);
  std::vector<std::uint64_t> rows;

  // Position in processing order: ancestors are computed in index order,
  // descendants in reverse index order.
  auto pos_to_index = [&](std::size_t pos) {
    return static_cast<BlockDag::Index>(towards_parents ? pos : n - 1 - pos);
  };
  auto index_to_pos = [&](BlockDag::Index idx) {
    return static_cast<std::size_t>(towards_parents ? idx : n - 1 - idx);
  };

  for (std::size_t c0 = 0; c0 < n; c0 += kChunkBits) {
    const std::size_t c1 = std::min(n, c0 + kChunkBits);
    // Rows before c0 cannot contain columns from this chunk.
    rows.assign((n - c0) * kWords, 0);
    for (std::size_t pos = c0; pos < n; ++pos) {
      auto* row = &rows[(pos - c0) * kWords];
      auto idx = pos_to_index(pos);
      auto edges = towards_parents ? dag.parent_indices(idx) : dag.child_indices(idx);
      for (auto e : edges) {
        std::size_t epos = index_to_pos(e);
        if (epos < c0) continue;
        const auto* src = &rows[(epos - c0) * kWords];
        for (std::size_t w = 0; w < kWords; ++w) row[w] |= src[w];
        if (epos < c1 && members[e]) row[(epos - c0) / 64] |= std::uint64_t{1} << ((epos - c0) % 64);
      }
      std::size_t c = 0;
      for (std::size_t w = 0; w < kWords; ++w) c += static_cast<std::size_t>(std::popcount(row[w]));
      counts[idx] += c;
    }
  }
  return counts;
}

}  // namespace

std::vector<std::size_t> anticone_sizes_within(const BlockDag& dag, const std::vector<bool>& members) {
  if (members.size() != dag.size()) throw Error(Errc::InvalidInput, "membership mask size mismatch");
  auto past = closure_counts(dag, true, members);
  auto future = closure_counts(dag, false, members);
  std::size_t total = 0;
  for (bool m : members) total += m ? 1 : 0;
  std::vector<std::size_t> out(dag.size());
  for (std::size_t i = 0; i < dag.size(); ++i) {
    out[i] = total - (members[i] ? 1 : 0) - past[i] - future[i];
  }
  return out;
}

std::vector<std::size_t> anticone_sizes(const BlockDag& dag) {
  return anticone_sizes_within(dag, std::vector<bool>(dag.size(), true));
}

}  // namespace rpmdag
