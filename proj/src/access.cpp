#include "rpmdag/access.hpp"

#include "rpmdag/error.hpp"

#include <json.hpp>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <algorithm>
#include <mutex>

namespace rpmdag {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const std::array<E, N>& all, std::string_view what) {
  for (auto e : all)
    if (to_string(e) == text) return e;
  throw Error(Errc::InvalidInput, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

constexpr std::array<Role, 5> kRoles{Role::patient, Role::healthcare_provider, Role::insurer, Role::device,
                                     Role::sealer_node};
constexpr std::array<Scope, 3> kScopes{Scope::ehr_read, Scope::alerts_subscribe, Scope::treatment_history};

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (RAND_bytes(out.data(), static_cast<int>(n)) != 1) throw Error(Errc::IoError, "RAND_bytes failed");
  return out;
}

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

Bytes raw_key(EVP_PKEY* key, bool private_part) {
  std::size_t len = 32;
  Bytes out(len);
  const int ok = private_part ? EVP_PKEY_get_raw_private_key(key, out.data(), &len)
                              : EVP_PKEY_get_raw_public_key(key, out.data(), &len);
  if (ok != 1 || len != 32) throw Error(Errc::InvalidInput, "cannot export Ed25519 key");
  return out;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::patient: return "patient";
    case Role::healthcare_provider: return "healthcare_provider";
    case Role::insurer: return "insurer";
    case Role::device: return "device";
    case Role::sealer_node: return "sealer_node";
  }
  return "";
}
Role parse_role(std::string_view text) { return parse_enum(text, kRoles, "role"); }

std::string_view to_string(Scope scope) {
  switch (scope) {
    case Scope::ehr_read: return "ehr_read";
    case Scope::alerts_subscribe: return "alerts_subscribe";
    case Scope::treatment_history: return "treatment_history";
  }
  return "";
}
Scope parse_scope(std::string_view text) { return parse_enum(text, kScopes, "scope"); }

void Roster::add(EntityRecord record) {
  if (record.id.empty()) throw Error(Errc::InvalidInput, "entity id is empty");
  const bool has_token = record.credential.token_sha256.has_value();
  const bool has_key = !record.credential.ed25519_public_key.empty();
  if (has_token == has_key) throw Error(Errc::InvalidInput, "entity '" + record.id + "' needs exactly one credential");
  if (has_key && record.credential.ed25519_public_key.size() != 32)
    throw Error(Errc::InvalidInput, "entity '" + record.id + "' has a malformed public key");
  auto id = record.id;
  if (!entities_.emplace(id, std::move(record)).second)
    throw Error(Errc::InvalidInput, "entity '" + id + "' registered twice");
}

const EntityRecord* Roster::find(const EntityId& id) const {
  auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : &it->second;
}

const EntityRecord& Roster::require(const EntityId& id) const {
  if (auto* r = find(id)) return *r;
  throw Error(Errc::UnknownEntity, "entity '" + id + "' is not registered");
}

Roster Roster::from_json(std::string_view text) {
  Roster roster;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& e : j.at("entities")) {
      EntityRecord r;
      r.id = e.at("id").get<std::string>();
      r.role = parse_role(e.at("role").get<std::string>());
      if (e.contains("token_sha256")) r.credential.token_sha256 = Digest::from_hex(e.at("token_sha256").get<std::string>());
      if (e.contains("ed25519_public_key"))
        r.credential.ed25519_public_key = from_hex_bytes(e.at("ed25519_public_key").get<std::string>());
      roster.add(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("roster: ") + e.what());
  }
  return roster;
}

std::string Roster::to_json() const {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& [id, r] : entities_) {
    nlohmann::ordered_json e;
    e["id"] = id;
    e["role"] = to_string(r.role);
    if (r.credential.token_sha256) e["token_sha256"] = r.credential.token_sha256->hex();
    else e["ed25519_public_key"] = to_hex(r.credential.ed25519_public_key);
    list.push_back(std::move(e));
  }
  nlohmann::ordered_json j;
  j["entities"] = std::move(list);
  return j.dump(2) + "\n";
}

AccessControl::AccessControl(Roster roster, Bytes session_key, SimTime session_lifetime)
    : roster_(std::move(roster)),
      session_key_(session_key.empty() ? random_bytes(32) : std::move(session_key)),
      lifetime_(session_lifetime) {
  if (!(lifetime_ > 0)) throw Error(Errc::InvalidParameter, "session lifetime must be positive");
}

void AccessControl::attach_ledger(Ledger* private_ledger, EntityId author) {
  if (private_ledger && private_ledger->visibility() != Visibility::Private)
    throw Error(Errc::InvalidInput, "access changes belong on the private ledger");
  std::unique_lock lock(mutex_);
  ledger_ = private_ledger;
  ledger_author_ = std::move(author);
}

Bytes AccessControl::issue_challenge(const EntityId& entity) {
  const auto& rec = roster_.require(entity);
  if (rec.credential.ed25519_public_key.empty())
    throw Error(Errc::BadCredential, "entity '" + entity + "' authenticates with a token");
  auto nonce = random_bytes(32);
  std::unique_lock lock(mutex_);
  challenges_[entity].push_back(nonce);
  return nonce;
}

Session AccessControl::authenticate(const EntityId& entity, const Proof& proof, SimTime now) {
  const auto& rec = roster_.require(entity);
  std::unique_lock lock(mutex_);
  bool ok = false;
  if (auto* t = std::get_if<TokenProof>(&proof)) {
    if (rec.credential.token_sha256) {
      const auto presented = sha256(t->token);
      ok = CRYPTO_memcmp(presented.bytes().data(), rec.credential.token_sha256->bytes().data(), Digest::kSize) == 0;
    }
  } else {
    const auto& s = std::get<SignatureProof>(proof);
    auto& pending = challenges_[entity];
    auto it = std::find(pending.begin(), pending.end(), s.challenge);
    if (it != pending.end() && !rec.credential.ed25519_public_key.empty()) {
      pending.erase(it);  // single use
      ok = ed25519_verify(rec.credential.ed25519_public_key, s.challenge, s.signature);
    }
  }
  if (!ok) throw Error(Errc::BadCredential, "credential rejected for '" + entity + "'");

  CanonicalWriter w;
  w.str(entity).u64(++session_counter_).f64(now);
  unsigned int len = 0;
  std::array<std::uint8_t, EVP_MAX_MD_SIZE> mac{};
  HMAC(EVP_sha256(), session_key_.data(), static_cast<int>(session_key_.size()), w.data().data(), w.data().size(),
       mac.data(), &len);
  Session s{to_hex(std::span(mac.data(), len)), entity, rec.role, now + lifetime_};
  sessions_[s.token] = s;
  return s;
}

const Session& AccessControl::live_session(const std::string& token, SimTime now) const {
  auto it = sessions_.find(token);
  if (it == sessions_.end()) throw Error(Errc::Unauthorized, "unknown session");
  if (now >= it->second.expires_at) throw Error(Errc::Unauthorized, "session expired");
  return it->second;
}

void AccessControl::mirror(const std::string& action, const AccessGrant& g, SimTime at) {
  if (!ledger_) return;
  TxBody body{{"action", action},           {"grant_id", g.grant_id},
              {"grantor", g.grantor},       {"grantee", g.grantee},
              {"scope", std::string(to_string(g.scope))}, {"at", format_number(at)}};
  ledger_->submit(Transaction::make(TxKind::AccessChange, std::move(body), at, ledger_author_), ledger_author_);
}

AccessGrant AccessControl::grant(const std::string& session_token, const EntityId& grantee, Scope scope, SimTime now) {
  std::unique_lock lock(mutex_);
  const auto& s = live_session(session_token, now);
  if (s.role != Role::patient) throw Error(Errc::NotPatient, "'" + s.entity + "' is not a patient");
  roster_.require(grantee);
  AccessGrant g{"g-" + std::to_string(next_grant_), s.entity, grantee, scope, now, std::nullopt};
  mirror("grant", g, now);
  ++next_grant_;
  grants_.emplace(g.grant_id, g);
  return g;
}

AccessGrant AccessControl::revoke(const std::string& session_token, const std::string& grant_id, SimTime now) {
  std::unique_lock lock(mutex_);
  const auto& s = live_session(session_token, now);
  if (s.role != Role::patient) throw Error(Errc::NotPatient, "'" + s.entity + "' is not a patient");
  auto it = grants_.find(grant_id);
  if (it == grants_.end() || it->second.grantor != s.entity)
    throw Error(Errc::UnknownGrant, "no grant '" + grant_id + "' owned by '" + s.entity + "'");
  if (it->second.revoked_at) throw Error(Errc::AlreadyRevoked, "grant '" + grant_id + "' is already revoked");
  AccessGrant g = it->second;
  g.revoked_at = now;
  mirror("revoke", g, now);
  it->second = g;
  return g;
}

bool AccessControl::permitted_locked(const EntityId& entity, const EntityId& patient, Scope scope, SimTime now) const {
  if (entity == patient) return true;
  return std::any_of(grants_.begin(), grants_.end(), [&](const auto& kv) {
    const auto& g = kv.second;
    return g.grantor == patient && g.grantee == entity && g.scope == scope && g.active_at(now);
  });
}

bool AccessControl::check_access(const std::string& session_token, const EntityId& patient, Scope scope,
                                 SimTime now) const {
  std::shared_lock lock(mutex_);
  try {
    const auto& s = live_session(session_token, now);
    return permitted_locked(s.entity, patient, scope, now);
  } catch (const Error&) {
    return false;
  }
}

bool AccessControl::permitted(const EntityId& entity, const EntityId& patient, Scope scope, SimTime now) const {
  roster_.require(entity);
  std::shared_lock lock(mutex_);
  return permitted_locked(entity, patient, scope, now);
}

void AccessControl::require_access(const std::string& session_token, const EntityId& patient, Scope scope,
                                   SimTime now) const {
  if (!check_access(session_token, patient, scope, now))
    throw Error(Errc::Unauthorized, "no " + std::string(to_string(scope)) + " access to '" + patient + "'");
}

GrantTable AccessControl::grants() const {
  std::shared_lock lock(mutex_);
  return grants_;
}

void AccessControl::restore(GrantTable table) {
  std::unique_lock lock(mutex_);
  std::uint64_t next = 1;
  for (const auto& [id, g] : table) {
    if (id.rfind("g-", 0) == 0) {
      try {
        next = std::max<std::uint64_t>(next, std::stoull(id.substr(2)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  grants_ = std::move(table);
  next_grant_ = next;
}

GrantTable fold_access_changes(const std::vector<ConfirmedTx>& stream) {
  GrantTable table;
  for (const auto& c : stream) {
    if (c.tx.kind != TxKind::AccessChange) continue;
    const auto& b = c.tx.body;
    try {
      const auto& id = b.at("grant_id");
      const SimTime at = parse_number(b.at("at"));
      if (b.at("action") == "grant") {
        AccessGrant g{id, b.at("grantor"), b.at("grantee"), parse_scope(b.at("scope")), at, std::nullopt};
        if (!table.emplace(id, g).second) throw Error(Errc::InvalidInput, "grant '" + id + "' recorded twice");
      } else if (b.at("action") == "revoke") {
        auto it = table.find(id);
        if (it == table.end() || it->second.revoked_at)
          throw Error(Errc::InvalidInput, "revocation of unknown or revoked grant '" + id + "'");
        it->second.revoked_at = at;
      } else {
        throw Error(Errc::InvalidInput, "unknown access action '" + b.at("action") + "'");
      }
    } catch (const std::out_of_range&) {
      throw Error(Errc::InvalidInput, "access change transaction is missing a field");
    }
  }
  return table;
}

Ed25519KeyPair ed25519_generate() { return ed25519_from_seed(random_bytes(32)); }

Ed25519KeyPair ed25519_from_seed(std::span<const std::uint8_t> seed32) {
  if (seed32.size() != 32) throw Error(Errc::InvalidInput, "Ed25519 seed must be 32 bytes");
  PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed32.data(), seed32.size()));
  if (!key) throw Error(Errc::InvalidInput, "cannot create Ed25519 key");
  return {raw_key(key.get(), true), raw_key(key.get(), false)};
}

Bytes ed25519_sign(std::span<const std::uint8_t> private_key, std::span<const std::uint8_t> message) {
  PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, private_key.data(), private_key.size()));
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!key || !ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1)
    throw Error(Errc::InvalidInput, "cannot initialise Ed25519 signing");
  std::size_t len = 64;
  Bytes sig(len);
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1)
    throw Error(Errc::InvalidInput, "Ed25519 signing failed");
  sig.resize(len);
  return sig;
}

bool ed25519_verify(std::span<const std::uint8_t> public_key, std::span<const std::uint8_t> message,
                    std::span<const std::uint8_t> signature) {
  PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(), public_key.size()));
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!key || !ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1) return false;
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(), message.size()) == 1;
}

}  // namespace rpmdag
