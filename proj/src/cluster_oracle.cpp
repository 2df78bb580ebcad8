#include "rpmdag/cluster_oracle.hpp"

#include "rpmdag/error.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <vector>

namespace rpmdag {

namespace {

class ClusterSearch {
 public:
  ClusterSearch(std::vector<std::uint32_t> anticone, std::uint32_t k)
      : anticone_(std::move(anticone)), k_(k), n_(anticone_.size()) {}

  /// First valid subset of exactly `size` members in lexicographic order.
  std::optional<std::uint32_t> find(std::size_t size) {
    target_ = size;
    return descend(0, 0, 0);
  }

 private:
  bool can_add(std::size_t j, std::uint32_t members) const {
    const std::uint32_t overlap = anticone_[j] & members;
    if (static_cast<std::uint32_t>(std::popcount(overlap)) > k_) return false;
    for (std::uint32_t rest = overlap; rest != 0; rest &= rest - 1) {
      const auto i = static_cast<std::size_t>(std::countr_zero(rest));
      if (static_cast<std::uint32_t>(std::popcount(anticone_[i] & members)) + 1 > k_) return false;
    }
    return true;
  }

  std::optional<std::uint32_t> descend(std::size_t start, std::size_t chosen, std::uint32_t members) {
    if (chosen == target_) return members;
    for (std::size_t j = start; j + (target_ - chosen) <= n_; ++j) {
      if (!can_add(j, members)) continue;
      if (auto hit = descend(j + 1, chosen + 1, members | (std::uint32_t{1} << j))) return hit;
    }
    return std::nullopt;
  }

  std::vector<std::uint32_t> anticone_;
  std::uint32_t k_;
  std::size_t n_;
  std::size_t target_ = 0;
};

}  // namespace

std::set<BlockId> max_k_cluster_bruteforce(const BlockDag& dag, std::uint32_t k, std::size_t cap) {
  if (dag.size() > cap || dag.size() > 32) {
    throw Error(Errc::TooLarge, std::to_string(dag.size()) + " blocks exceeds the oracle cap of " +
                                    std::to_string(std::min<std::size_t>(cap, 32)));
  }
  if (dag.empty()) return {};

  // Bit j stands for the j-th smallest id, so lexicographic enumeration of
  // bit positions is lexicographic over sorted id sequences.
  std::vector<BlockId> ids = dag.insertion_order();
  std::sort(ids.begin(), ids.end());
  std::vector<std::uint32_t> anticone(ids.size(), 0);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    for (const auto& other : dag.anticone(ids[j])) {
      auto pos = std::lower_bound(ids.begin(), ids.end(), other) - ids.begin();
      anticone[j] |= std::uint32_t{1} << pos;
    }
  }

  ClusterSearch search(std::move(anticone), k);
  for (std::size_t size = ids.size(); size > 0; --size) {
    if (auto members = search.find(size)) {
      std::set<BlockId> out;
      for (std::size_t j = 0; j < ids.size(); ++j)
        if (*members & (std::uint32_t{1} << j)) out.insert(ids[j]);
      return out;
    }
  }
  return {};
}

}  // namespace rpmdag
