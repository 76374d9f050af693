#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qcchain {

/// 256-bit SHA-256 digest.
struct Digest {
   std::array<std::uint8_t, 32> bytes{};

   static Digest zero() { return {}; }

   bool is_zero() const;
   std::string hex() const;
   /// Parses exactly 64 lowercase hex characters.
   static std::optional<Digest> from_hex(std::string_view text);

   friend auto operator<=>(const Digest&, const Digest&) = default;
};

Digest sha256(std::span<const std::uint8_t> data);

/// Canonical byte encoder used for everything that is hashed. Integers are
/// big-endian, reals are their IEEE-754 binary64 bit pattern (big-endian).
class ByteWriter {
public:
   ByteWriter& u8(std::uint8_t v);
   ByteWriter& u32(std::uint32_t v);
   ByteWriter& u64(std::uint64_t v);
   ByteWriter& f64(double v);
   ByteWriter& digest(const Digest& d);
   ByteWriter& str(std::string_view s);

   std::span<const std::uint8_t> bytes() const { return buf_; }
   Digest finish() const { return sha256(buf_); }

private:
   std::vector<std::uint8_t> buf_;
};

/// Shortest text form that parses back to the same double.
std::string format_real(double v);

} // namespace qcchain
