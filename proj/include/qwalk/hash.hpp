#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace qwalk {

/// 64-bit FNV-1a, incremental.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& text(std::string_view s) noexcept { return bytes(s.data(), s.size()); }
  template <typename T>
  Fnv1a& value(const T& v) noexcept {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    return bytes(buf, sizeof(T));
  }
  [[nodiscard]] std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace qwalk
