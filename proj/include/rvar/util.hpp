#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rvar {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// 64-bit FNV-1a; stable across platforms and runs.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= kFnvPrime;
    }
    return *this;
  }

  Fnv1a& str(std::string_view s) {
    u64(s.size());
    return bytes(s.data(), s.size());
  }

  // Little-endian regardless of host order.
  Fnv1a& u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    return bytes(buf, 8);
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = kFnvOffset;
};

// SplitMix64 finalizer, used to derive independent child seeds from a parent.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

// RFC 3339 timestamps. Parsing accepts fractional seconds (truncated) and
// numeric offsets; formatting always emits "YYYY-MM-DDTHH:MM:SSZ".
Timestamp parse_rfc3339(std::string_view text);
std::string format_rfc3339(Timestamp t);

}  // namespace rvar
