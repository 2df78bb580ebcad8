#pragma once

#include "rpmdag/dag.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace rpmdag {

struct GhostdagParams {
  /// Maximum number of blue blocks allowed in a blue block's anticone.
  std::uint32_t k = 3;
};

struct Coloring {
  std::set<BlockId> blue;
  std::set<BlockId> red;
  /// Blue blocks in past(b) ∪ {b}, as seen from b itself.
  std::map<BlockId, std::uint64_t> blue_score;
  /// Defined for every block except genesis.
  std::map<BlockId, BlockId> selected_parent;

  bool is_blue(const BlockId& id) const { return blue.count(id) != 0; }
};

struct OrderedDag {
  std::vector<BlockId> order;
  Coloring coloring;
};

/// GHOSTDAG output for one block, computed over past(b) ∪ {b} only.
struct GhostdagData {
  static constexpr BlockDag::Index kNone = UINT32_MAX;

  BlockDag::Index selected_parent = kNone;
  std::uint64_t blue_score = 0;
  /// Starts with the selected parent, then accepted blocks in the order they
  /// were considered.
  std::vector<BlockDag::Index> mergeset_blues;
  std::vector<BlockDag::Index> mergeset_reds;
  /// Blue-anticone size, within this block's view, of every blue whose count
  /// was set or changed while building this view.
  std::vector<std::pair<BlockDag::Index, std::uint32_t>> blue_anticone_sizes;
};

/// Incremental GHOSTDAG engine. Per-block data depends only on the block's
/// past, so processing blocks as they arrive and processing a finished DAG
/// from scratch produce the same result.
class GhostdagState {
 public:
  GhostdagState(const BlockDag& dag, GhostdagParams params);

  /// Processes every block added to the DAG since the previous call.
  void update();

  const GhostdagData& data(BlockDag::Index i) const { return data_[i]; }
  /// Data of a virtual block whose parents are the current tips.
  GhostdagData virtual_data();
  /// Coloring as seen by the virtual block.
  Coloring coloring();

  std::uint32_t k() const { return params_.k; }

 private:
  GhostdagData compute(std::span<const BlockDag::Index> parents);
  BlockDag::Index pick_selected_parent(std::span<const BlockDag::Index> parents) const;
  std::uint32_t blue_anticone_size(BlockDag::Index block, const GhostdagData& context) const;

  const BlockDag* dag_;
  GhostdagParams params_;
  Reachability reach_;
  std::vector<GhostdagData> data_;
};

bool is_k_cluster(const BlockDag& dag, const std::set<BlockId>& members, std::uint32_t k);

Coloring ghostdag_color(const BlockDag& dag, GhostdagParams params);

/// Total order anchored on the selected-parent chain. Each chain block first
/// contributes its merged blues (by blue score, then id), then its merged
/// reds, each preceded depth-first by any not-yet-emitted ancestors.
OrderedDag ghostdag_order(const BlockDag& dag, const Coloring& coloring);

/// P(N > c) for N ~ Poisson(mean).
double poisson_tail(double mean, std::uint64_t c);

/// Smallest k such that more than k + 1 blocks appear in a window of 2 * delay
/// with probability below `confidence`, for network-wide Poisson block
/// creation at `rate`.
std::uint32_t k_for_network(double delay, double rate, double confidence);

}  // namespace rpmdag
