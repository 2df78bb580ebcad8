#include "rpmdag/ghostdag.hpp"

#include "rpmdag/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace rpmdag {

using Index = BlockDag::Index;

namespace {

// Blocks of past(parents) that are neither the selected parent nor in its
// past, i.e. everything a block merges beyond its selected parent's view.
std::vector<Index> mergeset_without_selected(const BlockDag& dag, Reachability& reach,
                                             std::span<const Index> parents, Index selected) {
  std::vector<Index> out;
  std::unordered_set<Index> seen{selected};
  std::vector<Index> stack;
  for (Index p : parents)
    if (p != selected) stack.push_back(p);
  while (!stack.empty()) {
    Index x = stack.back();
    stack.pop_back();
    if (!seen.insert(x).second) continue;
    if (reach.is_ancestor(x, selected)) continue;
    out.push_back(x);
    for (Index p : dag.parent_indices(x)) stack.push_back(p);
  }
  return out;
}

void upsert(std::vector<std::pair<Index, std::uint32_t>>& sizes, Index block, std::uint32_t size) {
  for (auto& [b, s] : sizes) {
    if (b == block) {
      s = size;
      return;
    }
  }
  sizes.emplace_back(block, size);
}

}  // namespace

GhostdagState::GhostdagState(const BlockDag& dag, GhostdagParams params)
    : dag_(&dag), params_(params), reach_(dag) {}

void GhostdagState::update() {
  while (data_.size() < dag_->size()) {
    const auto idx = static_cast<Index>(data_.size());
    data_.push_back(compute(dag_->parent_indices(idx)));
  }
}

Index GhostdagState::pick_selected_parent(std::span<const Index> parents) const {
  Index best = parents.front();
  for (Index p : parents.subspan(1)) {
    const auto sp = data_[p].blue_score;
    const auto sb = data_[best].blue_score;
    if (sp > sb || (sp == sb && dag_->id_at(p) < dag_->id_at(best))) best = p;
  }
  return best;
}

std::uint32_t GhostdagState::blue_anticone_size(Index block, const GhostdagData& context) const {
  const GhostdagData* cur = &context;
  while (true) {
    for (const auto& [b, s] : cur->blue_anticone_sizes)
      if (b == block) return s;
    if (cur->selected_parent == GhostdagData::kNone) break;
    cur = &data_[cur->selected_parent];
  }
  throw Error(Errc::InconsistentColoring, "block is not blue in the queried view");
}

GhostdagData GhostdagState::compute(std::span<const Index> parents) {
  GhostdagData d;
  if (parents.empty()) {
    d.blue_score = 1;
    return d;
  }

  const Index selected = pick_selected_parent(parents);
  d.selected_parent = selected;
  d.mergeset_blues.push_back(selected);
  d.blue_anticone_sizes.emplace_back(selected, 0);

  auto candidates = mergeset_without_selected(*dag_, reach_, parents, selected);
  std::sort(candidates.begin(), candidates.end(), [&](Index a, Index b) {
    if (data_[a].blue_score != data_[b].blue_score) return data_[a].blue_score < data_[b].blue_score;
    return dag_->id_at(a) < dag_->id_at(b);
  });

  const std::uint32_t k = params_.k;
  std::vector<std::pair<Index, std::uint32_t>> touched;
  for (Index candidate : candidates) {
    touched.clear();
    std::uint32_t blue_anticone = 0;
    bool fits = true;

    // Walk the selected chain from this view downwards. Once a chain block
    // lies in the candidate's past, so does its entire blue set.
    const GhostdagData* chain = &d;
    while (fits) {
      for (Index blue : chain->mergeset_blues) {
        if (!reach_.in_anticone(blue, candidate)) continue;
        if (++blue_anticone > k) {
          fits = false;
          break;
        }
        const auto size = blue_anticone_size(blue, d);
        if (size >= k) {
          fits = false;
          break;
        }
        touched.emplace_back(blue, size);
      }
      if (!fits || chain->selected_parent == GhostdagData::kNone) break;
      const Index next = chain->selected_parent;
      if (reach_.is_ancestor(next, candidate)) break;
      chain = &data_[next];
    }

    if (fits) {
      d.mergeset_blues.push_back(candidate);
      upsert(d.blue_anticone_sizes, candidate, blue_anticone);
      for (const auto& [blue, size] : touched) upsert(d.blue_anticone_sizes, blue, size + 1);
    } else {
      d.mergeset_reds.push_back(candidate);
    }
  }

  d.blue_score = data_[selected].blue_score + d.mergeset_blues.size();
  return d;
}

GhostdagData GhostdagState::virtual_data() {
  update();
  if (dag_->empty()) throw Error(Errc::InvalidInput, "cannot color an empty dag");
  std::vector<Index> tips;
  for (const auto& id : dag_->tips()) tips.push_back(dag_->require_index(id));
  return compute(tips);
}

Coloring GhostdagState::coloring() {
  const GhostdagData v = virtual_data();
  std::vector<bool> blue(dag_->size(), false);
  blue[0] = true;
  for (const GhostdagData* cur = &v;;) {
    for (Index b : cur->mergeset_blues) blue[b] = true;
    if (cur->selected_parent == GhostdagData::kNone) break;
    cur = &data_[cur->selected_parent];
  }

  Coloring c;
  for (Index i = 0; i < dag_->size(); ++i) {
    const BlockId& id = dag_->id_at(i);
    (blue[i] ? c.blue : c.red).insert(id);
    c.blue_score.emplace(id, data_[i].blue_score);
    if (data_[i].selected_parent != GhostdagData::kNone) {
      c.selected_parent.emplace(id, dag_->id_at(data_[i].selected_parent));
    }
  }
  return c;
}

bool is_k_cluster(const BlockDag& dag, const std::set<BlockId>& members, std::uint32_t k) {
  std::vector<bool> mask(dag.size(), false);
  for (const auto& id : members) mask[dag.require_index(id)] = true;
  const auto sizes = anticone_sizes_within(dag, mask);
  for (std::size_t i = 0; i < dag.size(); ++i)
    if (mask[i] && sizes[i] > k) return false;
  return true;
}

Coloring ghostdag_color(const BlockDag& dag, GhostdagParams params) {
  if (dag.empty()) throw Error(Errc::InvalidInput, "cannot color an empty dag");
  GhostdagState state(dag, params);
  return state.coloring();
}

namespace {

void validate_coloring(const BlockDag& dag, const Coloring& c) {
  auto fail = [](const std::string& why) { throw Error(Errc::InconsistentColoring, why); };
  if (c.blue.size() + c.red.size() != dag.size() || c.blue_score.size() != dag.size()) {
    fail("coloring does not cover the dag exactly");
  }
  for (const auto& id : c.blue)
    if (!dag.contains(id) || c.red.count(id)) fail("bad blue entry " + id.short_hex());
  for (const auto& id : c.red)
    if (!dag.contains(id)) fail("unknown red entry " + id.short_hex());
  for (const auto& [id, score] : c.blue_score)
    if (!dag.contains(id)) fail("unknown scored block " + id.short_hex());
  if (c.selected_parent.size() + 1 != dag.size()) fail("selected parents do not cover the dag");
  for (const auto& [id, sp] : c.selected_parent) {
    if (!dag.contains(id)) fail("unknown block " + id.short_hex());
    const auto& parents = dag.block(id).parents;
    if (std::find(parents.begin(), parents.end(), sp) == parents.end()) {
      fail("selected parent of " + id.short_hex() + " is not a parent");
    }
  }
}

}  // namespace

OrderedDag ghostdag_order(const BlockDag& dag, const Coloring& coloring) {
  if (dag.empty()) throw Error(Errc::InvalidInput, "cannot order an empty dag");
  validate_coloring(dag, coloring);

  const auto score = [&](Index i) { return coloring.blue_score.at(dag.id_at(i)); };
  const auto best_of = [&](std::span<const Index> blocks) {
    Index best = blocks.front();
    for (Index b : blocks.subspan(1)) {
      if (score(b) > score(best) || (score(b) == score(best) && dag.id_at(b) < dag.id_at(best))) best = b;
    }
    return best;
  };

  std::vector<Index> tips;
  for (const auto& id : dag.tips()) tips.push_back(dag.require_index(id));

  // Selected chain from genesis to the virtual block's selected parent.
  std::vector<Index> chain;
  for (Index cur = best_of(tips);;) {
    chain.push_back(cur);
    auto it = coloring.selected_parent.find(dag.id_at(cur));
    if (it == coloring.selected_parent.end()) break;
    cur = dag.require_index(it->second);
  }
  std::reverse(chain.begin(), chain.end());
  if (chain.front() != 0) throw Error(Errc::InconsistentColoring, "selected chain does not reach genesis");

  Reachability reach(dag);
  std::vector<char> emitted(dag.size(), 0);
  OrderedDag out;
  out.order.reserve(dag.size());
  std::vector<std::pair<Index, std::size_t>> dfs;

  auto emit_with_ancestors = [&](Index root) {
    if (emitted[root]) return;
    dfs.clear();
    dfs.emplace_back(root, 0);
    while (!dfs.empty()) {
      auto& [node, next_parent] = dfs.back();
      const auto& parents = dag.at(node).parents;  // sorted by id
      if (next_parent < parents.size()) {
        Index p = dag.require_index(parents[next_parent++]);
        if (!emitted[p]) dfs.emplace_back(p, 0);
        continue;
      }
      if (!emitted[node]) {
        emitted[node] = 1;
        out.order.push_back(dag.id_at(node));
      }
      dfs.pop_back();
    }
  };

  auto merge = [&](std::span<const Index> parents, Index selected) {
    auto ms = mergeset_without_selected(dag, reach, parents, selected);
    std::sort(ms.begin(), ms.end(), [&](Index a, Index b) {
      const bool ba = coloring.is_blue(dag.id_at(a));
      const bool bb = coloring.is_blue(dag.id_at(b));
      if (ba != bb) return ba;
      if (score(a) != score(b)) return score(a) < score(b);
      return dag.id_at(a) < dag.id_at(b);
    });
    for (Index x : ms) emit_with_ancestors(x);
  };

  emit_with_ancestors(chain.front());
  for (std::size_t i = 1; i < chain.size(); ++i) {
    merge(dag.parent_indices(chain[i]), chain[i - 1]);
    emit_with_ancestors(chain[i]);
  }
  merge(tips, chain.back());

  if (out.order.size() != dag.size()) {
    throw Error(Errc::InconsistentColoring, "ordering did not reach every block");
  }
  out.coloring = coloring;
  return out;
}

double poisson_tail(double mean, std::uint64_t c) {
  if (!(mean >= 0) || !std::isfinite(mean)) throw Error(Errc::InvalidParameter, "poisson mean must be >= 0");
  if (mean == 0) return 0.0;
  const double log_mean = std::log(mean);
  double sum = 0;
  for (std::uint64_t i = c + 1;; ++i) {
    const double di = static_cast<double>(i);
    const double term = std::exp(-mean + di * log_mean - std::lgamma(di + 1));
    sum += term;
    // Past the mode the terms shrink geometrically.
    if (di > mean && term <= sum * 1e-17) break;
    if (i - c > 100'000'000) throw Error(Errc::InvalidParameter, "poisson mean too large");
  }
  return std::min(sum, 1.0);
}

std::uint32_t k_for_network(double delay, double rate, double confidence) {
  if (!(delay > 0) || !std::isfinite(delay)) throw Error(Errc::InvalidParameter, "delay must be > 0");
  if (!(rate > 0) || !std::isfinite(rate)) throw Error(Errc::InvalidParameter, "rate must be > 0");
  if (!(confidence > 0 && confidence < 1)) {
    throw Error(Errc::InvalidParameter, "confidence must lie in (0, 1)");
  }
  const double mean = 2.0 * delay * rate;
  if (mean > 1e6) throw Error(Errc::InvalidParameter, "rate * delay too large");

  // Smallest block cap c >= 1 with P(N > c) < confidence; the tail is
  // strictly decreasing in c, so bisect.
  std::uint64_t lo = 1;
  std::uint64_t hi = 2;
  while (poisson_tail(mean, hi) >= confidence) hi *= 2;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (poisson_tail(mean, mid) < confidence) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return static_cast<std::uint32_t>(lo - 1);
}

}  // namespace rpmdag
