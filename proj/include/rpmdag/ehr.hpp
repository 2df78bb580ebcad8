#pragma once

#include "rpmdag/access.hpp"
#include "rpmdag/ledger.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rpmdag {

enum class RecordKind { vital_reading, treatment_note };
std::string_view to_string(RecordKind kind);
RecordKind parse_record_kind(std::string_view text);

struct EhrRecord {
  std::string record_id;
  EntityId patient;
  RecordKind kind = RecordKind::vital_reading;
  Bytes content;
  SimTime stored_at = 0;
  Digest content_hash;  // digest at write time
};

struct RecordLocation {
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
};

/// Append-only record store: `ehr.data` holds the content bytes back to back,
/// `ehr.index` holds one tab-separated line per record.
class EhrStore {
 public:
  explicit EhrStore(std::filesystem::path dir);

  EhrRecord store(Bytes content, const EntityId& patient, RecordKind kind, SimTime now);

  /// Current bytes on disk with the write-time hash; no access check.
  EhrRecord read_raw(const std::string& record_id) const;
  /// Read gated by ehr_read (vital readings) or treatment_history (notes).
  EhrRecord read(const std::string& record_id, const AccessControl& access, const std::string& session,
                 SimTime now) const;

  bool contains(const std::string& record_id) const;
  RecordLocation locate(const std::string& record_id) const;
  std::vector<std::string> record_ids() const;
  std::size_t size() const;
  const std::filesystem::path& data_path() const { return data_path_; }
  const std::filesystem::path& index_path() const { return index_path_; }

 private:
  struct Entry {
    EntityId patient;
    RecordKind kind;
    SimTime stored_at;
    RecordLocation loc;
    Digest content_hash;
  };
  const Entry& entry(const std::string& record_id) const;

  std::filesystem::path data_path_;
  std::filesystem::path index_path_;
  std::map<std::uint64_t, std::pair<std::string, Entry>> by_seq_;
  std::map<std::string, std::uint64_t> seq_of_;
  std::uint64_t data_size_ = 0;
  mutable std::mutex mutex_;
};

struct AnchorReceipt {
  std::string record_id;
  Digest anchored_hash;
  TxId tx;
  std::optional<std::size_t> position;  // set once confirmed
};

/// Confirmed EhrAnchor transactions keyed by record id; first in order wins.
class AnchorIndex {
 public:
  static AnchorIndex from_stream(const std::vector<ConfirmedTx>& stream);
  std::optional<AnchorReceipt> find(const std::string& record_id) const;
  std::size_t size() const { return anchors_.size(); }
  std::vector<std::string> record_ids() const;

 private:
  std::map<std::string, AnchorReceipt> anchors_;
};

/// Submits EhrAnchor transactions and refuses to anchor a record twice.
class EhrAnchorer {
 public:
  EhrAnchorer(Ledger& private_ledger, EntityId author);
  AnchorReceipt anchor(const EhrRecord& record, SimTime now);

 private:
  Ledger& ledger_;
  EntityId author_;
  std::set<std::string> anchored_;
};

enum class VerifyStatus { Intact, Tampered, Unanchored };
std::string_view to_string(VerifyStatus status);

struct VerifyResult {
  VerifyStatus status = VerifyStatus::Unanchored;
  Digest stored_hash;  // digest of the bytes currently on disk
  std::optional<Digest> anchored_hash;
};

VerifyResult verify(const std::string& record_id, const EhrStore& store, const AnchorIndex& anchors);
VerifyResult verify(const std::string& record_id, const EhrStore& store, const Ledger& private_ledger);

}  // namespace rpmdag
