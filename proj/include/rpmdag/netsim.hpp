#pragma once

#include "rpmdag/dag.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rpmdag {

enum class SimMode { blockdag, longest_chain };

std::string_view to_string(SimMode mode);
SimMode parse_sim_mode(std::string_view text);

struct SimConfig {
  std::uint32_t nodes = 4;
  /// Network-wide block creation rate, split evenly across nodes.
  double rate_lambda = 1.0;
  /// Uniform point-to-point propagation delay.
  double delay_D = 1.0;
  double duration = 1000.0;
  std::uint32_t k = 3;
  std::uint32_t txs_per_block = 10;
  std::uint64_t seed = 1;
  SimMode mode = SimMode::blockdag;

  /// Throws InvalidConfig.
  void validate() const;
};

struct SimMetrics {
  std::uint64_t blocks_created = 0;
  /// Blocks in the GHOSTDAG order (blockdag) or on the main chain
  /// (longest_chain), genesis excluded.
  std::uint64_t blocks_in_order = 0;
  double included_ratio = 1.0;
  double effective_tps = 0.0;
  std::uint64_t max_observed_anticone = 0;
  bool converged = false;
};

enum class SimEventKind { BlockCreated, BlockReceived };

struct SimEvent {
  double time = 0;
  std::uint32_t node = 0;
  SimEventKind kind = SimEventKind::BlockCreated;
  BlockId block;
};

struct SimTrace {
  std::uint32_t nodes = 0;
  double delay = 0;
  Block genesis;
  /// Every created block, in creation order.
  std::vector<Block> blocks;
  std::vector<SimEvent> events;
  /// Final DAG held by each node at quiescence.
  std::vector<BlockDag> views;
};

struct SimResult {
  SimMetrics metrics;
  SimTrace trace;
};

/// Deterministic for a given config (including seed). Throws InvalidConfig.
SimResult run_simulation(const SimConfig& config);

/// Replays the event log into per-node views and reports whether every node
/// ends with the same DAG and the same GHOSTDAG order. Throws IncompleteTrace
/// when the log references blocks or nodes the trace does not contain.
bool check_convergence(const SimTrace& trace, std::uint32_t k);

struct SweepRow {
  double lambda = 0;
  SimMode mode = SimMode::blockdag;
  double included_ratio = 0;
  double effective_tps = 0;
};

/// Runs both modes with identical seeds for every rate in `lambdas`.
std::vector<SweepRow> compare_modes(const SimConfig& config, std::span<const double> lambdas);

std::string metrics_json(const SimMetrics& metrics);
std::string trace_jsonl(const SimTrace& trace);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace rpmdag
