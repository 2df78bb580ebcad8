#include "rpmdag/ehr.hpp"

#include "rpmdag/error.hpp"

#include <fstream>
#include <sstream>

namespace rpmdag {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string col; std::getline(ss, col, '\t');) out.push_back(col);
  return out;
}

std::uint64_t record_seq(const std::string& id) {
  if (id.rfind("ehr-", 0) != 0 || id.size() == 4) throw Error(Errc::ParseError, "bad record id '" + id + "'");
  return std::stoull(id.substr(4));
}

}  // namespace

std::string_view to_string(RecordKind kind) {
  return kind == RecordKind::vital_reading ? "vital_reading" : "treatment_note";
}

RecordKind parse_record_kind(std::string_view text) {
  if (text == "vital_reading") return RecordKind::vital_reading;
  if (text == "treatment_note") return RecordKind::treatment_note;
  throw Error(Errc::ParseError, "unknown record kind '" + std::string(text) + "'");
}

std::string_view to_string(VerifyStatus status) {
  switch (status) {
    case VerifyStatus::Intact: return "Intact";
    case VerifyStatus::Tampered: return "Tampered";
    case VerifyStatus::Unanchored: return "Unanchored";
  }
  return "";
}

EhrStore::EhrStore(std::filesystem::path dir)
    : data_path_(dir / "ehr.data"), index_path_(dir / "ehr.index") {
  std::filesystem::create_directories(dir);
  if (std::filesystem::exists(data_path_)) data_size_ = std::filesystem::file_size(data_path_);
  std::ifstream index(index_path_);
  std::size_t line_no = 0;
  for (std::string line; std::getline(index, line);) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    try {
      if (cols.size() != 7) throw Error(Errc::ParseError, "expected 7 columns");
      Entry e{cols[1], parse_record_kind(cols[2]), parse_number(cols[3]),
              {std::stoull(cols[4]), std::stoull(cols[5])}, Digest::from_hex(cols[6])};
      if (e.loc.offset + e.loc.size > data_size_) throw Error(Errc::IoError, "record extends past the data file");
      const auto seq = record_seq(cols[0]);
      if (!seq_of_.emplace(cols[0], seq).second) throw Error(Errc::ParseError, "duplicate record id");
      by_seq_.emplace(seq, std::pair{cols[0], std::move(e)});
    } catch (const Error& e) {
      throw Error(e.code(), index_path_.string() + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, index_path_.string() + " line " + std::to_string(line_no) + ": bad number");
    }
  }
}

EhrRecord EhrStore::store(Bytes content, const EntityId& patient, RecordKind kind, SimTime now) {
  if (content.empty()) throw Error(Errc::EmptyContent, "record content is empty");
  if (patient.empty() || patient.find_first_of("\t\n") != std::string::npos)
    throw Error(Errc::InvalidInput, "invalid patient id");
  std::lock_guard lock(mutex_);
  const std::uint64_t seq = by_seq_.empty() ? 1 : by_seq_.rbegin()->first + 1;
  EhrRecord rec{"ehr-" + std::to_string(seq), patient, kind, std::move(content), now, {}};
  rec.content_hash = sha256(rec.content);
  const RecordLocation loc{data_size_, rec.content.size()};

  std::ofstream data(data_path_, std::ios::app | std::ios::binary);
  data.write(reinterpret_cast<const char*>(rec.content.data()), static_cast<std::streamsize>(rec.content.size()));
  data.flush();
  if (!data) throw Error(Errc::IoError, "cannot append to " + data_path_.string());
  std::ofstream index(index_path_, std::ios::app);
  index << rec.record_id << '\t' << patient << '\t' << to_string(kind) << '\t' << format_number(now) << '\t'
        << loc.offset << '\t' << loc.size << '\t' << rec.content_hash.hex() << '\n';
  index.flush();
  if (!index) throw Error(Errc::IoError, "cannot append to " + index_path_.string());

  data_size_ += loc.size;
  seq_of_.emplace(rec.record_id, seq);
  by_seq_.emplace(seq, std::pair{rec.record_id, Entry{patient, kind, now, loc, rec.content_hash}});
  return rec;
}

const EhrStore::Entry& EhrStore::entry(const std::string& record_id) const {
  auto it = seq_of_.find(record_id);
  if (it == seq_of_.end()) throw Error(Errc::UnknownRecord, "no record '" + record_id + "'");
  return by_seq_.at(it->second).second;
}

EhrRecord EhrStore::read_raw(const std::string& record_id) const {
  Entry e;
  {
    std::lock_guard lock(mutex_);
    e = entry(record_id);
  }
  Bytes content(e.loc.size);
  std::ifstream data(data_path_, std::ios::binary);
  data.seekg(static_cast<std::streamoff>(e.loc.offset));
  data.read(reinterpret_cast<char*>(content.data()), static_cast<std::streamsize>(content.size()));
  if (!data) throw Error(Errc::IoError, "cannot read record '" + record_id + "'");
  return {record_id, e.patient, e.kind, std::move(content), e.stored_at, e.content_hash};
}

EhrRecord EhrStore::read(const std::string& record_id, const AccessControl& access, const std::string& session,
                         SimTime now) const {
  RecordKind kind;
  EntityId patient;
  {
    std::lock_guard lock(mutex_);
    const auto& e = entry(record_id);
    kind = e.kind;
    patient = e.patient;
  }
  access.require_access(session, patient, kind == RecordKind::vital_reading ? Scope::ehr_read : Scope::treatment_history,
                        now);
  return read_raw(record_id);
}

bool EhrStore::contains(const std::string& record_id) const {
  std::lock_guard lock(mutex_);
  return seq_of_.count(record_id) != 0;
}

RecordLocation EhrStore::locate(const std::string& record_id) const {
  std::lock_guard lock(mutex_);
  return entry(record_id).loc;
}

std::vector<std::string> EhrStore::record_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [seq, e] : by_seq_) out.push_back(e.first);
  return out;
}

std::size_t EhrStore::size() const {
  std::lock_guard lock(mutex_);
  return by_seq_.size();
}

AnchorIndex AnchorIndex::from_stream(const std::vector<ConfirmedTx>& stream) {
  AnchorIndex idx;
  for (const auto& c : stream) {
    if (c.tx.kind != TxKind::EhrAnchor) continue;
    auto rid = c.tx.body.find("record_id");
    auto hash = c.tx.body.find("content_hash");
    if (rid == c.tx.body.end() || hash == c.tx.body.end()) continue;
    idx.anchors_.emplace(rid->second, AnchorReceipt{rid->second, Digest::from_hex(hash->second), c.tx.id, c.position});
  }
  return idx;
}

std::optional<AnchorReceipt> AnchorIndex::find(const std::string& record_id) const {
  auto it = anchors_.find(record_id);
  if (it == anchors_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> AnchorIndex::record_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, r] : anchors_) out.push_back(id);
  return out;
}

EhrAnchorer::EhrAnchorer(Ledger& private_ledger, EntityId author) : ledger_(private_ledger), author_(std::move(author)) {
  if (ledger_.visibility() != Visibility::Private) throw Error(Errc::InvalidInput, "anchors belong on the private ledger");
  for (const auto& id : AnchorIndex::from_stream(ledger_.confirmed()).record_ids()) anchored_.insert(id);
  for (const auto& tx : ledger_.pending())
    if (tx.kind == TxKind::EhrAnchor && tx.body.count("record_id")) anchored_.insert(tx.body.at("record_id"));
}

AnchorReceipt EhrAnchorer::anchor(const EhrRecord& record, SimTime now) {
  if (anchored_.count(record.record_id))
    throw Error(Errc::AlreadyAnchored, "record '" + record.record_id + "' is already anchored");
  auto tx = Transaction::make(TxKind::EhrAnchor,
                              {{"record_id", record.record_id}, {"content_hash", record.content_hash.hex()}}, now,
                              author_);
  ledger_.submit(tx, author_);
  anchored_.insert(record.record_id);
  return {record.record_id, record.content_hash, tx.id, std::nullopt};
}

VerifyResult verify(const std::string& record_id, const EhrStore& store, const AnchorIndex& anchors) {
  const auto rec = store.read_raw(record_id);
  VerifyResult r;
  r.stored_hash = sha256(rec.content);
  if (auto a = anchors.find(record_id)) {
    r.anchored_hash = a->anchored_hash;
    r.status = a->anchored_hash == r.stored_hash ? VerifyStatus::Intact : VerifyStatus::Tampered;
  }
  return r;
}

VerifyResult verify(const std::string& record_id, const EhrStore& store, const Ledger& private_ledger) {
  if (!store.contains(record_id)) throw Error(Errc::UnknownRecord, "no record '" + record_id + "'");
  return verify(record_id, store, AnchorIndex::from_stream(private_ledger.confirmed()));
}

}  // namespace rpmdag
