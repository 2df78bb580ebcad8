#include "rpmdag/ledger.hpp"

#include "rpmdag/error.hpp"
#include "rpmdag/vital.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_set>

namespace rpmdag {

namespace {

constexpr std::string_view kGenesisTag = "rpmdag-ledger-genesis";
constexpr std::array<std::string_view, 5> kAlertFields{"ehr_record_hash", "occurred_at", "patient", "rule_id",
                                                       "severity"};

bool is_token(std::string_view s) {
  if (s.empty() || s.size() > 64) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; });
}

bool is_lower_hex(std::string_view s, std::size_t len) {
  return s.size() == len &&
         std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

void check_entity_name(const EntityId& id, std::string_view what) {
  if (id.empty() || std::any_of(id.begin(), id.end(), [](unsigned char c) { return std::isspace(c) || c == ','; }))
    throw Error(Errc::InvalidInput, std::string(what) + " '" + id + "' is not a valid entity id");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(TxKind kind) {
  switch (kind) {
    case TxKind::EhrAnchor: return "EhrAnchor";
    case TxKind::RuleEvaluation: return "RuleEvaluation";
    case TxKind::AlertEvent: return "AlertEvent";
    case TxKind::AccessChange: return "AccessChange";
  }
  return "";
}

TxKind parse_tx_kind(std::string_view text) {
  for (auto k : {TxKind::EhrAnchor, TxKind::RuleEvaluation, TxKind::AlertEvent, TxKind::AccessChange})
    if (to_string(k) == text) return k;
  throw Error(Errc::ParseError, "unknown transaction kind '" + std::string(text) + "'");
}

std::string_view to_string(Visibility v) { return v == Visibility::Private ? "private" : "public"; }

Transaction Transaction::make(TxKind kind, TxBody body, SimTime submitted_at, EntityId author) {
  Transaction tx{{}, kind, std::move(body), submitted_at, std::move(author)};
  tx.id = sha256(tx.canonical_bytes());
  return tx;
}

Bytes Transaction::canonical_bytes() const {
  CanonicalWriter w;
  w.u8(static_cast<std::uint8_t>(kind)).u64(body.size());
  for (const auto& [k, v] : body) w.str(k).str(v);
  w.f64(submitted_at).str(author);
  return std::move(w).take();
}

Transaction Transaction::decode(std::span<const std::uint8_t> bytes) {
  try {
    CanonicalReader r(bytes);
    Transaction tx;
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(TxKind::AccessChange))
      throw Error(Errc::ParseError, "transaction kind out of range");
    tx.kind = static_cast<TxKind>(kind);
    const auto n = r.u64();
    if (n > bytes.size()) throw Error(Errc::ParseError, "transaction field count out of range");
    for (std::uint64_t i = 0; i < n; ++i) {
      auto key = r.str();
      if (!tx.body.empty() && key <= tx.body.rbegin()->first)
        throw Error(Errc::ParseError, "transaction fields not in canonical order");
      tx.body.emplace(std::move(key), r.str());
    }
    tx.submitted_at = r.f64();
    tx.author = r.str();
    if (!r.done()) throw Error(Errc::ParseError, "trailing bytes after transaction");
    tx.id = sha256(bytes);
    return tx;
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError) throw;
    throw Error(Errc::ParseError, std::string("malformed transaction: ") + e.what());
  }
}

void check_alert_body(const TxBody& body) {
  auto leak = [](const std::string& why) { throw Error(Errc::PhiLeak, why); };
  for (const auto& [key, value] : body) {
    if (std::find(kAlertFields.begin(), kAlertFields.end(), key) == kAlertFields.end())
      leak("field '" + key + "' is not part of the alert schema");
  }
  for (auto f : kAlertFields)
    if (!body.count(std::string(f))) leak("alert field '" + std::string(f) + "' is missing");

  for (const char* f : {"patient", "rule_id"}) {
    const auto& v = body.at(f);
    if (!is_token(v)) leak(std::string("field '") + f + "' must be an opaque identifier");
    for (auto vital : kAllVitals)
      if (v.find(to_string(vital)) != std::string::npos)
        leak(std::string("field '") + f + "' names a vital sign");
    if (v.find("device") != std::string::npos) leak(std::string("field '") + f + "' names a device");
  }
  if (!is_lower_hex(body.at("ehr_record_hash"), 64)) leak("field 'ehr_record_hash' must be a hex digest");
  const auto& at = body.at("occurred_at");
  if (at.empty() || at.size() > 15 || !std::all_of(at.begin(), at.end(), [](unsigned char c) { return std::isdigit(c); }))
    leak("field 'occurred_at' must be whole seconds");
  const auto& sev = body.at("severity");
  if (sev != "advisory" && sev != "urgent") leak("field 'severity' must be advisory or urgent");
}

Block ledger_genesis(Visibility visibility) {
  CanonicalWriter w;
  w.str(kGenesisTag).str(std::string("digest=") + std::string(kDigestAlgorithm))
      .str(std::string("visibility=") + std::string(to_string(visibility)));
  return Block::make({}, {std::move(w).take()}, 0.0, "genesis-" + std::string(to_string(visibility)));
}

Ledger::Ledger(Visibility visibility, std::set<EntityId> writers, GhostdagParams params, std::size_t block_cap)
    : Ledger(visibility, std::move(writers), params, block_cap, ledger_genesis(visibility)) {}

Ledger::Ledger(Visibility visibility, std::set<EntityId> writers, GhostdagParams params, std::size_t block_cap,
               Block genesis)
    : visibility_(visibility), writers_(std::move(writers)), params_(params), block_cap_(block_cap) {
  if (block_cap_ == 0) throw Error(Errc::InvalidParameter, "block cap must be positive");
  for (const auto& w : writers_) check_entity_name(w, "writer");
  dag_.add_block(std::move(genesis));
}

std::size_t Ledger::pending_size() const {
  std::shared_lock lock(*mutex_);
  return pending_.size();
}

std::vector<Transaction> Ledger::pending() const {
  std::shared_lock lock(*mutex_);
  return {pending_.begin(), pending_.end()};
}

void Ledger::admit(const Transaction& tx) const {
  if (!writers_.count(tx.author))
    throw Error(Errc::Unauthorized, "'" + tx.author + "' may not write to the " +
                                        std::string(to_string(visibility_)) + " ledger");
  const bool is_alert = tx.kind == TxKind::AlertEvent;
  if ((visibility_ == Visibility::Public) != is_alert)
    throw Error(Errc::KindNotAdmissible, std::string(to_string(tx.kind)) + " is not admissible on the " +
                                             std::string(to_string(visibility_)) + " ledger");
  if (is_alert) check_alert_body(tx.body);
}

Receipt Ledger::submit(const Transaction& tx, const EntityId& author) {
  if (!writers_.count(author))
    throw Error(Errc::Unauthorized, "'" + author + "' may not write to the " +
                                        std::string(to_string(visibility_)) + " ledger");
  if (tx.author != author) throw Error(Errc::Unauthorized, "transaction author does not match submitter");
  if (tx.id != sha256(tx.canonical_bytes())) throw Error(Errc::InvalidInput, "transaction id does not match content");
  admit(tx);
  std::unique_lock lock(*mutex_);
  pending_.push_back(tx);
  return {tx.id, pending_.size() - 1};
}

Block Ledger::seal_block(const EntityId& creator, SimTime now, std::optional<std::vector<BlockId>> parents) {
  if (!writers_.count(creator)) throw Error(Errc::Unauthorized, "'" + creator + "' may not seal blocks");
  std::unique_lock lock(*mutex_);
  std::vector<BlockId> ps = parents ? std::move(*parents) : std::vector<BlockId>(dag_.tips().begin(), dag_.tips().end());
  for (const auto& p : ps)
    if (!dag_.contains(p)) throw Error(Errc::MissingParent, "unknown parent " + p.short_hex());
  const std::size_t take = std::min(block_cap_, pending_.size());
  std::vector<Bytes> payload;
  payload.reserve(take);
  for (std::size_t i = 0; i < take; ++i) payload.push_back(pending_[i].canonical_bytes());
  Block block = Block::make(std::move(ps), std::move(payload), now, creator);
  append_block(block);
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(take));
  return block;
}

void Ledger::import_block(const Block& block) {
  if (!writers_.count(block.creator)) throw Error(Errc::Unauthorized, "'" + block.creator + "' may not seal blocks");
  if (block.payload.size() > block_cap_) throw Error(Errc::InvalidInput, "block exceeds the size cap");
  for (const auto& bytes : block.payload) admit(Transaction::decode(bytes));
  std::unique_lock lock(*mutex_);
  append_block(block);
}

void Ledger::append_block(Block block) {
  const std::string line = file_ ? block_line(block) : std::string();
  dag_.add_block(std::move(block));
  if (file_) {
    std::ofstream out(*file_, std::ios::app | std::ios::binary);
    out << line;
    if (!out) throw Error(Errc::IoError, "cannot append to " + file_->string());
  }
}

std::vector<ConfirmedTx> Ledger::confirmed() const {
  std::shared_lock lock(*mutex_);
  const auto ordered = ghostdag_order(dag_, ghostdag_color(dag_, params_));
  std::vector<ConfirmedTx> out;
  std::unordered_set<TxId, DigestHash> seen;
  for (std::size_t pos = 0; pos < ordered.order.size(); ++pos) {
    const Block& b = dag_.block(ordered.order[pos]);
    if (b.is_genesis()) continue;
    for (const auto& bytes : b.payload) {
      auto tx = Transaction::decode(bytes);
      if (seen.insert(tx.id).second) out.push_back({std::move(tx), b.id, pos});
    }
  }
  return out;
}

std::string block_line(const Block& block) {
  std::string line = block.id.hex() + ":";
  for (std::size_t i = 0; i < block.parents.size(); ++i) line += (i ? "," : " ") + block.parents[i].hex();
  line += "\t" + format_number(block.timestamp) + "\t" + block.creator + "\t";
  for (std::size_t i = 0; i < block.payload.size(); ++i) {
    if (i) line += ",";
    line += base64_encode(block.payload[i]);
  }
  return line + "\n";
}

std::string Ledger::to_text() const {
  std::shared_lock lock(*mutex_);
  std::string out;
  for (BlockDag::Index i = 0; i < dag_.size(); ++i) out += block_line(dag_.at(i));
  return out;
}

Ledger Ledger::from_text(std::string_view text, std::set<EntityId> writers, GhostdagParams params) {
  std::vector<Block> blocks;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 4) throw Error(Errc::ParseError, where + "expected 4 tab-separated columns");
    auto colon = cols[0].find(':');
    if (colon == std::string_view::npos) throw Error(Errc::ParseError, where + "missing ':' after block id");
    try {
      Block b;
      b.id = Digest::from_hex(cols[0].substr(0, colon));
      auto parents = cols[0].substr(colon + 1);
      if (!parents.empty() && parents.front() == ' ') parents.remove_prefix(1);
      if (!parents.empty())
        for (auto p : split(parents, ',')) b.parents.push_back(Digest::from_hex(p));
      b.timestamp = parse_number(cols[1]);
      b.creator = std::string(cols[2]);
      if (!cols[3].empty())
        for (auto p : split(cols[3], ',')) b.payload.push_back(base64_decode(p));
      if (b.compute_id() != b.id) throw Error(Errc::InvalidInput, "block id does not match its content");
      blocks.push_back(std::move(b));
    } catch (const Error& e) {
      throw Error(e.code() == Errc::InvalidInput ? Errc::InvalidInput : Errc::ParseError, where + e.what());
    }
  }
  if (blocks.empty() || !blocks.front().is_genesis()) throw Error(Errc::ParseError, "ledger file has no genesis block");

  const Block& g = blocks.front();
  std::optional<Visibility> vis;
  for (auto v : {Visibility::Private, Visibility::Public})
    if (ledger_genesis(v).id == g.id) vis = v;
  if (!vis) throw Error(Errc::InvalidInput, "genesis metadata does not describe a supported ledger");

  Ledger ledger(*vis, std::move(writers), params, kDefaultBlockCap, g);
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    if (blocks[i].payload.size() > ledger.block_cap_) throw Error(Errc::InvalidInput, "block exceeds the size cap");
    for (const auto& bytes : blocks[i].payload) Transaction::decode(bytes);
    ledger.dag_.add_block(std::move(blocks[i]));
  }
  return ledger;
}

Ledger Ledger::load(const std::filesystem::path& path, std::set<EntityId> writers, GhostdagParams params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), std::move(writers), params);
}

void Ledger::attach_file(const std::filesystem::path& path) {
  const std::string text = to_text();
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  file_ = path;
}

}  // namespace rpmdag
