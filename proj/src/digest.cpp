#include <qcchain/digest.hpp>

#include <openssl/sha.h>

#include <bit>
#include <charconv>

namespace qcchain {

bool Digest::is_zero() const {
   for (auto b : bytes)
      if (b != 0)
         return false;
   return true;
}

std::string Digest::hex() const {
   static constexpr char digits[] = "0123456789abcdef";
   std::string out;
   out.reserve(64);
   for (auto b : bytes) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xf]);
   }
   return out;
}

std::optional<Digest> Digest::from_hex(std::string_view text) {
   if (text.size() != 64)
      return std::nullopt;
   auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9')
         return c - '0';
      if (c >= 'a' && c <= 'f')
         return c - 'a' + 10;
      return -1;
   };
   Digest d;
   for (std::size_t i = 0; i < 32; ++i) {
      int hi = nibble(text[2 * i]);
      int lo = nibble(text[2 * i + 1]);
      if (hi < 0 || lo < 0)
         return std::nullopt;
      d.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
   }
   return d;
}

Digest sha256(std::span<const std::uint8_t> data) {
   Digest d;
   SHA256(data.data(), data.size(), d.bytes.data());
   return d;
}

ByteWriter& ByteWriter::u8(std::uint8_t v) {
   buf_.push_back(v);
   return *this;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
   for (int shift = 24; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<std::uint8_t>(v >> shift));
   return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
   for (int shift = 56; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<std::uint8_t>(v >> shift));
   return *this;
}

ByteWriter& ByteWriter::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

ByteWriter& ByteWriter::digest(const Digest& d) {
   buf_.insert(buf_.end(), d.bytes.begin(), d.bytes.end());
   return *this;
}

ByteWriter& ByteWriter::str(std::string_view s) {
   u32(static_cast<std::uint32_t>(s.size()));
   buf_.insert(buf_.end(), s.begin(), s.end());
   return *this;
}

std::string format_real(double v) {
   char buf[32];
   auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
   return std::string(buf, end);
}

} // namespace qcchain
