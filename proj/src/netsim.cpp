#include "rpmdag/netsim.hpp"

#include "rpmdag/error.hpp"
#include "rpmdag/ghostdag.hpp"

#include <json.hpp>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace rpmdag {

std::string_view to_string(SimMode mode) {
  return mode == SimMode::blockdag ? "blockdag" : "longest_chain";
}

SimMode parse_sim_mode(std::string_view text) {
  if (text == "blockdag") return SimMode::blockdag;
  if (text == "longest_chain") return SimMode::longest_chain;
  throw Error(Errc::InvalidConfig, "unknown mode '" + std::string(text) + "'");
}

void SimConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (nodes < 1) fail("nodes must be >= 1");
  if (!(rate_lambda > 0) || !std::isfinite(rate_lambda)) fail("rate_lambda must be > 0");
  if (!(delay_D >= 0) || !std::isfinite(delay_D)) fail("delay_D must be >= 0");
  if (!(duration > 0) || !std::isfinite(duration)) fail("duration must be > 0");
  if (rate_lambda * duration > 5e6) fail("rate_lambda * duration too large for a desk simulation");
}

namespace {

/// One node's local DAG with orphan buffering.
class NodeView {
 public:
  explicit NodeView(const Block& genesis) {
    dag_.add_block(genesis);
    best_ = 0;
  }

  void receive(const Block& block) {
    if (dag_.contains(block.id) || missing_.count(block.id)) return;
    std::size_t missing = 0;
    for (const auto& p : block.parents) {
      if (!dag_.contains(p)) {
        ++missing;
        waiting_[p].push_back(block);
      }
    }
    if (missing > 0) {
      missing_.emplace(block.id, missing);
      return;
    }
    insert_and_drain(block);
  }

  const BlockDag& dag() const { return dag_; }
  BlockDag take_dag() && { return std::move(dag_); }
  bool has_orphans() const { return !missing_.empty(); }
  const BlockId& best_tip() const { return dag_.id_at(best_); }

 private:
  void insert_and_drain(const Block& first) {
    std::vector<Block> ready{first};
    while (!ready.empty()) {
      Block b = std::move(ready.back());
      ready.pop_back();
      const BlockId id = b.id;
      dag_.add_block(std::move(b));
      const auto idx = dag_.require_index(id);
      // Longest chain: first received wins on equal height.
      if (dag_.height(idx) > dag_.height(best_)) best_ = idx;

      auto it = waiting_.find(id);
      if (it == waiting_.end()) continue;
      for (auto& child : it->second) {
        auto m = missing_.find(child.id);
        if (--m->second == 0) {
          missing_.erase(m);
          ready.push_back(std::move(child));
        }
      }
      waiting_.erase(it);
    }
  }

  BlockDag dag_;
  BlockDag::Index best_;
  std::unordered_map<BlockId, std::vector<Block>, DigestHash> waiting_;
  std::unordered_map<BlockId, std::size_t, DigestHash> missing_;
};

Block make_genesis() { return Block::make({}, {}, 0.0, "genesis"); }

std::vector<Bytes> synthetic_payload(std::uint64_t block_seq, std::uint32_t count) {
  std::vector<Bytes> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CanonicalWriter w;
    w.str("simtx").u64(block_seq).u64(i);
    out.push_back(std::move(w).take());
  }
  return out;
}

struct QueuedEvent {
  double time;
  std::uint64_t seq;
  SimEventKind kind;
  std::uint32_t node;
  std::size_t block;  // index into trace.blocks, deliveries only

  bool operator>(const QueuedEvent& o) const {
    return time != o.time ? time > o.time : seq > o.seq;
  }
};

std::vector<BlockId> ordered_blocks(const BlockDag& dag, std::uint32_t k) {
  GhostdagState state(dag, {k});
  return ghostdag_order(dag, state.coloring()).order;
}

}  // namespace

SimResult run_simulation(const SimConfig& config) {
  config.validate();

  boost::random::mt19937_64 rng(config.seed);
  boost::random::exponential_distribution<double> gap(config.rate_lambda);
  boost::random::uniform_int_distribution<std::uint32_t> pick_node(0, config.nodes - 1);

  SimResult result;
  SimTrace& trace = result.trace;
  trace.nodes = config.nodes;
  trace.delay = config.delay_D;
  trace.genesis = make_genesis();

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue;
  std::uint64_t seq = 0;
  for (double t = gap(rng); t <= config.duration; t += gap(rng)) {
    queue.push({t, seq++, SimEventKind::BlockCreated, pick_node(rng), 0});
  }

  std::vector<NodeView> views(config.nodes, NodeView(trace.genesis));
  while (!queue.empty()) {
    const QueuedEvent ev = queue.top();
    queue.pop();
    NodeView& view = views[ev.node];

    if (ev.kind == SimEventKind::BlockCreated) {
      std::vector<BlockId> parents;
      if (config.mode == SimMode::blockdag) {
        parents.assign(view.dag().tips().begin(), view.dag().tips().end());
      } else {
        parents.push_back(view.best_tip());
      }
      const std::uint64_t block_seq = trace.blocks.size();
      Block block = Block::make(std::move(parents), synthetic_payload(block_seq, config.txs_per_block),
                                ev.time, "node-" + std::to_string(ev.node));
      view.receive(block);
      trace.events.push_back({ev.time, ev.node, SimEventKind::BlockCreated, block.id});
      trace.blocks.push_back(std::move(block));
      for (std::uint32_t n = 0; n < config.nodes; ++n) {
        if (n == ev.node) continue;
        queue.push({ev.time + config.delay_D, seq++, SimEventKind::BlockReceived, n, block_seq});
      }
    } else {
      const Block& block = trace.blocks[ev.block];
      view.receive(block);
      trace.events.push_back({ev.time, ev.node, SimEventKind::BlockReceived, block.id});
    }
  }

  for (auto& v : views) trace.views.push_back(std::move(v).take_dag());

  SimMetrics& m = result.metrics;
  const BlockDag& reference = trace.views.front();
  m.blocks_created = trace.blocks.size();
  if (config.mode == SimMode::blockdag) {
    m.blocks_in_order = ordered_blocks(reference, config.k).size() - 1;
  } else {
    std::uint32_t longest = 0;
    for (BlockDag::Index i = 0; i < reference.size(); ++i) longest = std::max(longest, reference.height(i));
    m.blocks_in_order = longest;
  }
  m.included_ratio = m.blocks_created == 0 ? 1.0
                                           : static_cast<double>(m.blocks_in_order) /
                                                 static_cast<double>(m.blocks_created);
  m.effective_tps = static_cast<double>(m.blocks_in_order) * config.txs_per_block / config.duration;
  for (auto s : anticone_sizes(reference)) m.max_observed_anticone = std::max<std::uint64_t>(m.max_observed_anticone, s);
  m.converged = check_convergence(trace, config.k);
  return result;
}

bool check_convergence(const SimTrace& trace, std::uint32_t k) {
  if (trace.nodes == 0) throw Error(Errc::IncompleteTrace, "trace has no nodes");
  std::unordered_map<BlockId, std::size_t, DigestHash> by_id;
  for (std::size_t i = 0; i < trace.blocks.size(); ++i) by_id.emplace(trace.blocks[i].id, i);

  std::vector<NodeView> views(trace.nodes, NodeView(trace.genesis));
  for (const auto& ev : trace.events) {
    if (ev.node >= trace.nodes) throw Error(Errc::IncompleteTrace, "event for unknown node");
    auto it = by_id.find(ev.block);
    if (it == by_id.end()) throw Error(Errc::IncompleteTrace, "event for unknown block " + ev.block.short_hex());
    views[ev.node].receive(trace.blocks[it->second]);
  }

  for (const auto& v : views)
    if (v.has_orphans()) return false;
  const BlockDag& first = views.front().dag();
  for (const auto& v : views) {
    if (v.dag().size() != first.size()) return false;
    for (const auto& id : first.insertion_order())
      if (!v.dag().contains(id)) return false;
  }
  const auto reference = ordered_blocks(first, k);
  for (std::size_t n = 1; n < views.size(); ++n) {
    if (ordered_blocks(views[n].dag(), k) != reference) return false;
  }
  return true;
}

std::vector<SweepRow> compare_modes(const SimConfig& config, std::span<const double> lambdas) {
  if (lambdas.empty()) throw Error(Errc::InvalidConfig, "lambda sweep is empty");
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    for (SimMode mode : {SimMode::blockdag, SimMode::longest_chain}) {
      SimConfig c = config;
      c.rate_lambda = lambda;
      c.mode = mode;
      auto r = run_simulation(c);
      rows.push_back({lambda, mode, r.metrics.included_ratio, r.metrics.effective_tps});
    }
  }
  return rows;
}

std::string metrics_json(const SimMetrics& m) {
  nlohmann::ordered_json j;
  j["blocks_created"] = m.blocks_created;
  j["blocks_in_order"] = m.blocks_in_order;
  j["included_ratio"] = m.included_ratio;
  j["effective_tps"] = m.effective_tps;
  j["max_observed_anticone"] = m.max_observed_anticone;
  j["converged"] = m.converged;
  return j.dump() + "\n";
}

std::string trace_jsonl(const SimTrace& trace) {
  std::string out;
  for (const auto& ev : trace.events) {
    nlohmann::ordered_json j;
    j["time"] = ev.time;
    j["node"] = ev.node;
    j["event"] = ev.kind == SimEventKind::BlockCreated ? "BlockCreated" : "BlockReceived";
    j["block"] = ev.block.hex();
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "lambda,mode,included_ratio,effective_tps\n";
  for (const auto& r : rows) {
    out += format_number(r.lambda) + "," + std::string(to_string(r.mode)) + "," +
           format_number(r.included_ratio) + "," + format_number(r.effective_tps) + "\n";
  }
  return out;
}

}  // namespace rpmdag
