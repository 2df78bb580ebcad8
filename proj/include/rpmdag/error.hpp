#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rpmdag {

enum class Errc {
  // dag-core
  MissingParent,
  DuplicateBlock,
  UnknownBlock,
  NotAPermutation,
  // consensus
  TooLarge,
  InvalidParameter,
  InconsistentColoring,
  // simulation
  InvalidConfig,
  IncompleteTrace,
  // ledgers
  Unauthorized,
  KindNotAdmissible,
  PhiLeak,
  // monitoring pipeline
  InvalidProfile,
  UnitMismatch,
  NoRuleForVital,
  EhrRecordMissing,
  // ehr store
  EmptyContent,
  AlreadyAnchored,
  UnknownRecord,
  // access control
  UnknownEntity,
  BadCredential,
  NotPatient,
  UnknownGrant,
  AlreadyRevoked,
  // i/o and formats
  ParseError,
  IoError,
  InvalidInput,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rpmdag
