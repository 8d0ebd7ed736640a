#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace ptkit {

// FNV-1a over raw bytes. Used for the byte-level freeze checks and the
// checkpoint/parameter hashes stored in run records.
struct ByteHash {
  uint64_t state = 0xCBF29CE484222325ULL;

  void update(const void* data, size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      state ^= bytes[i];
      state *= 0x100000001B3ULL;
    }
  }

  uint64_t digest() const { return state; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    uint64_t v = state;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<size_t>(i)] = digits[v & 0xF];
      v >>= 4;
    }
    return out;
  }
};

inline uint64_t hash_bytes(const void* data, size_t len) {
  ByteHash h;
  h.update(data, len);
  return h.digest();
}

}  // namespace ptkit
