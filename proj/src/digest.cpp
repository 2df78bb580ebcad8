#include "rpmdag/digest.hpp"

#include "rpmdag/error.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cmath>

namespace rpmdag {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingParent: return "MissingParent";
    case Errc::DuplicateBlock: return "DuplicateBlock";
    case Errc::UnknownBlock: return "UnknownBlock";
    case Errc::NotAPermutation: return "NotAPermutation";
    case Errc::TooLarge: return "TooLarge";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::InconsistentColoring: return "InconsistentColoring";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IncompleteTrace: return "IncompleteTrace";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::KindNotAdmissible: return "KindNotAdmissible";
    case Errc::PhiLeak: return "PhiLeak";
    case Errc::InvalidProfile: return "InvalidProfile";
    case Errc::UnitMismatch: return "UnitMismatch";
    case Errc::NoRuleForVital: return "NoRuleForVital";
    case Errc::EhrRecordMissing: return "EhrRecordMissing";
    case Errc::EmptyContent: return "EmptyContent";
    case Errc::AlreadyAnchored: return "AlreadyAnchored";
    case Errc::UnknownRecord: return "UnknownRecord";
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::BadCredential: return "BadCredential";
    case Errc::NotPatient: return "NotPatient";
    case Errc::UnknownGrant: return "UnknownGrant";
    case Errc::AlreadyRevoked: return "AlreadyRevoked";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Digest Digest::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kSize) {
    throw Error(Errc::ParseError, "digest must be 64 hex characters: '" + std::string(hex) + "'");
  }
  Bytes raw = from_hex_bytes(hex);
  std::array<std::uint8_t, kSize> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return Digest(out);
}

std::string Digest::hex() const { return to_hex(bytes_); }

bool Digest::is_zero() const {
  for (auto b : bytes_)
    if (b != 0) return false;
  return true;
}

Digest sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, Digest::kSize> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != Digest::kSize) {
    throw Error(Errc::IoError, "EVP_Digest(sha256) failed");
  }
  return Digest(out);
}

Digest sha256(std::string_view data) {
  return sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()),
                                               data.size()));
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex_bytes(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::ParseError, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::ParseError, "invalid hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::ParseError, "base64 length not a multiple of 4");
  Bytes out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::ParseError, "invalid base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string format_number(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(Errc::ParseError, "not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

CanonicalWriter& CanonicalWriter::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

CanonicalWriter& CanonicalWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

CanonicalWriter& CanonicalWriter::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

CanonicalWriter& CanonicalWriter::bytes(std::span<const std::uint8_t> v) {
  u64(v.size());
  out_.insert(out_.end(), v.begin(), v.end());
  return *this;
}

CanonicalWriter& CanonicalWriter::str(std::string_view v) {
  return bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
}

CanonicalWriter& CanonicalWriter::digest(const Digest& d) {
  out_.insert(out_.end(), d.bytes().begin(), d.bytes().end());
  return *this;
}

std::span<const std::uint8_t> CanonicalReader::take(std::size_t n) {
  if (in_.size() - pos_ < n) throw Error(Errc::ParseError, "truncated canonical encoding");
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t CanonicalReader::u8() { return take(1)[0]; }

std::uint64_t CanonicalReader::u64() {
  std::uint64_t v = 0;
  for (auto b : take(8)) v = (v << 8) | b;
  return v;
}

double CanonicalReader::f64() { return std::bit_cast<double>(u64()); }

Bytes CanonicalReader::bytes() {
  auto n = u64();
  if (n > in_.size() - pos_) throw Error(Errc::ParseError, "length prefix exceeds input");
  auto s = take(static_cast<std::size_t>(n));
  return Bytes(s.begin(), s.end());
}

std::string CanonicalReader::str() {
  auto b = bytes();
  return std::string(b.begin(), b.end());
}

Digest CanonicalReader::digest() {
  auto s = take(Digest::kSize);
  std::array<std::uint8_t, Digest::kSize> out{};
  std::copy(s.begin(), s.end(), out.begin());
  return Digest(out);
}

}  // namespace rpmdag
