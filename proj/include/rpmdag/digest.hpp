#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rpmdag {

using Bytes = std::vector<std::uint8_t>;

/// 256-bit content digest. Ordering is lexicographic over the raw bytes,
/// which matches ordering of the lowercase hex rendering.
class Digest {
 public:
  static constexpr std::size_t kSize = 32;

  Digest() = default;
  explicit Digest(const std::array<std::uint8_t, kSize>& bytes) : bytes_(bytes) {}

  static Digest from_hex(std::string_view hex);
  std::string hex() const;
  std::string short_hex() const { return hex().substr(0, 12); }

  std::span<const std::uint8_t, kSize> bytes() const { return bytes_; }
  bool is_zero() const;

  auto operator<=>(const Digest&) const = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

/// Name recorded in ledger genesis metadata.
inline constexpr std::string_view kDigestAlgorithm = "sha256";

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex_bytes(std::string_view hex);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

/// Shortest decimal text that round-trips the value.
std::string format_number(double value);
double parse_number(std::string_view text);

/// Length-prefixed, big-endian canonical encoding used for every hashed
/// structure.
class CanonicalWriter {
 public:
  CanonicalWriter& u8(std::uint8_t v);
  CanonicalWriter& u64(std::uint64_t v);
  CanonicalWriter& f64(double v);
  CanonicalWriter& bytes(std::span<const std::uint8_t> v);
  CanonicalWriter& str(std::string_view v);
  CanonicalWriter& digest(const Digest& d);

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class CanonicalReader {
 public:
  explicit CanonicalReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint64_t u64();
  double f64();
  Bytes bytes();
  std::string str();
  Digest digest();

  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | d.bytes()[i];
    return h;
  }
};

}  // namespace rpmdag
