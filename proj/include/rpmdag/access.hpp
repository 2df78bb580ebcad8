#pragma once

#include "rpmdag/digest.hpp"
#include "rpmdag/ledger.hpp"

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

namespace rpmdag {

enum class Role { patient, healthcare_provider, insurer, device, sealer_node };
std::string_view to_string(Role role);
Role parse_role(std::string_view text);

enum class Scope { ehr_read, alerts_subscribe, treatment_history };
std::string_view to_string(Scope scope);
Scope parse_scope(std::string_view text);

/// What the roster stores: a token digest or an Ed25519 public key.
struct Credential {
  std::optional<Digest> token_sha256;
  Bytes ed25519_public_key;
};

struct EntityRecord {
  EntityId id;
  Role role = Role::patient;
  Credential credential;
};

class Roster {
 public:
  void add(EntityRecord record);
  const EntityRecord* find(const EntityId& id) const;
  const EntityRecord& require(const EntityId& id) const;
  const std::map<EntityId, EntityRecord>& entities() const { return entities_; }

  /// `{"entities": [{"id", "role", "token_sha256" | "ed25519_public_key"}]}`
  static Roster from_json(std::string_view text);
  std::string to_json() const;

 private:
  std::map<EntityId, EntityRecord> entities_;
};

struct TokenProof {
  std::string token;
};
struct SignatureProof {
  Bytes challenge;
  Bytes signature;
};
using Proof = std::variant<TokenProof, SignatureProof>;

struct Session {
  std::string token;
  EntityId entity;
  Role role = Role::patient;
  SimTime expires_at = 0;
};

struct AccessGrant {
  std::string grant_id;
  EntityId grantor;
  EntityId grantee;
  Scope scope = Scope::ehr_read;
  SimTime granted_at = 0;
  std::optional<SimTime> revoked_at;

  bool active_at(SimTime t) const { return granted_at <= t && !(revoked_at && *revoked_at <= t); }
  bool operator==(const AccessGrant&) const = default;
};

using GrantTable = std::map<std::string, AccessGrant>;

inline constexpr SimTime kDefaultSessionLifetime = 3600;

class AccessControl {
 public:
  /// `session_key` seeds session token derivation; empty means random.
  explicit AccessControl(Roster roster, Bytes session_key = {}, SimTime session_lifetime = kDefaultSessionLifetime);

  const Roster& roster() const { return roster_; }

  /// Mirrors every grant change as an AccessChange transaction by `author`.
  void attach_ledger(Ledger* private_ledger, EntityId author);

  Bytes issue_challenge(const EntityId& entity);
  Session authenticate(const EntityId& entity, const Proof& proof, SimTime now);

  AccessGrant grant(const std::string& session_token, const EntityId& grantee, Scope scope, SimTime now);
  AccessGrant revoke(const std::string& session_token, const std::string& grant_id, SimTime now);

  bool check_access(const std::string& session_token, const EntityId& patient, Scope scope, SimTime now) const;
  /// Policy lookup for a known entity without a session.
  bool permitted(const EntityId& entity, const EntityId& patient, Scope scope, SimTime now) const;
  /// Throws Unauthorized unless check_access passes.
  void require_access(const std::string& session_token, const EntityId& patient, Scope scope, SimTime now) const;

  GrantTable grants() const;
  /// Replaces the grant table, e.g. with a fold over the ledger.
  void restore(GrantTable table);

 private:
  const Session& live_session(const std::string& token, SimTime now) const;
  bool permitted_locked(const EntityId& entity, const EntityId& patient, Scope scope, SimTime now) const;
  void mirror(const std::string& action, const AccessGrant& g, SimTime at);

  Roster roster_;
  Bytes session_key_;
  SimTime lifetime_;
  std::uint64_t session_counter_ = 0;
  std::map<std::string, Session> sessions_;
  std::map<EntityId, std::vector<Bytes>> challenges_;
  GrantTable grants_;
  std::uint64_t next_grant_ = 1;
  Ledger* ledger_ = nullptr;
  EntityId ledger_author_;
  mutable std::shared_mutex mutex_;
};

/// Rebuilds the grant table from AccessChange transactions in stream order.
GrantTable fold_access_changes(const std::vector<ConfirmedTx>& stream);

struct Ed25519KeyPair {
  Bytes private_key;
  Bytes public_key;
};
Ed25519KeyPair ed25519_generate();
Ed25519KeyPair ed25519_from_seed(std::span<const std::uint8_t> seed32);
Bytes ed25519_sign(std::span<const std::uint8_t> private_key, std::span<const std::uint8_t> message);
bool ed25519_verify(std::span<const std::uint8_t> public_key, std::span<const std::uint8_t> message,
                    std::span<const std::uint8_t> signature);

}  // namespace rpmdag
