#pragma once

#include "rpmdag/dag.hpp"
#include "rpmdag/ghostdag.hpp"

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace rpmdag {

using TxId = Digest;
using EntityId = std::string;

enum class TxKind : std::uint8_t { EhrAnchor = 0, RuleEvaluation = 1, AlertEvent = 2, AccessChange = 3 };
std::string_view to_string(TxKind kind);
TxKind parse_tx_kind(std::string_view text);

using TxBody = std::map<std::string, std::string>;

struct Transaction {
  TxId id;
  TxKind kind = TxKind::EhrAnchor;
  TxBody body;
  SimTime submitted_at = 0;
  EntityId author;

  static Transaction make(TxKind kind, TxBody body, SimTime submitted_at, EntityId author);
  Bytes canonical_bytes() const;
  /// Throws ParseError on malformed bytes.
  static Transaction decode(std::span<const std::uint8_t> bytes);
};

/// Closed-schema check for AlertEvent bodies. Throws PhiLeak naming the
/// offending field.
void check_alert_body(const TxBody& body);

inline constexpr std::size_t kDefaultBlockCap = 1000;

enum class Visibility { Private, Public };
std::string_view to_string(Visibility v);

struct Receipt {
  TxId tx;
  std::size_t pool_position = 0;
};

struct ConfirmedTx {
  Transaction tx;
  BlockId block;
  std::size_t position = 0;  // index of `block` in the DAG order
};

class Ledger {
 public:
  Ledger(Visibility visibility, std::set<EntityId> writers, GhostdagParams params = {},
         std::size_t block_cap = kDefaultBlockCap);

  Visibility visibility() const { return visibility_; }
  const BlockDag& dag() const { return dag_; }
  const GhostdagParams& params() const { return params_; }
  std::size_t pending_size() const;
  std::vector<Transaction> pending() const;
  const std::set<EntityId>& writers() const { return writers_; }

  Receipt submit(const Transaction& tx, const EntityId& author);
  /// Seals the pool head into a block on the current tips, or on `parents`
  /// when given.
  Block seal_block(const EntityId& creator, SimTime now,
                   std::optional<std::vector<BlockId>> parents = std::nullopt);
  /// Adds a block produced elsewhere after validating its creator and payload.
  void import_block(const Block& block);

  std::vector<ConfirmedTx> confirmed() const;

  std::string to_text() const;
  static Ledger from_text(std::string_view text, std::set<EntityId> writers, GhostdagParams params = {});
  static Ledger load(const std::filesystem::path& path, std::set<EntityId> writers, GhostdagParams params = {});
  /// Writes the current blocks to `path` and appends each later block.
  void attach_file(const std::filesystem::path& path);

 private:
  Ledger(Visibility visibility, std::set<EntityId> writers, GhostdagParams params, std::size_t block_cap,
         Block genesis);
  void admit(const Transaction& tx) const;
  void append_block(Block block);

  Visibility visibility_;
  std::set<EntityId> writers_;
  GhostdagParams params_;
  std::size_t block_cap_;
  BlockDag dag_;
  std::deque<Transaction> pending_;
  std::optional<std::filesystem::path> file_;
  std::unique_ptr<std::shared_mutex> mutex_ = std::make_unique<std::shared_mutex>();
};

Block ledger_genesis(Visibility visibility);
std::string block_line(const Block& block);

}  // namespace rpmdag
