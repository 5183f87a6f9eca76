#pragma once

// Minimal self-contained SHA-1 used to fingerprint resolved run
// configurations.  The digest is only a determinism/change detector for
// manifests, not a security boundary.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>

namespace gelsim::detail {

class Sha1 {
 public:
  Sha1() { reset(); }

  void reset() {
    state_ = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
    buffer_len_ = 0;
    total_bits_ = 0;
  }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    total_bits_ += static_cast<std::uint64_t>(len) * 8u;
    while (len > 0) {
      const std::size_t take =
          std::min<std::size_t>(len, kBlockSize - buffer_len_);
      std::memcpy(buffer_.data() + buffer_len_, p, take);
      buffer_len_ += take;
      p += take;
      len -= take;
      if (buffer_len_ == kBlockSize) {
        process_block(buffer_.data());
        buffer_len_ = 0;
      }
    }
  }

  void update(const std::string& s) { update(s.data(), s.size()); }

  // Finalizes a copy, so the accumulator stays usable afterwards.
  std::string hex_digest() const {
    Sha1 copy = *this;
    copy.finalize();
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(40);
    for (std::uint32_t word : copy.state_) {
      for (int shift = 28; shift >= 0; shift -= 4) {
        out.push_back(hex[(word >> shift) & 0xFu]);
      }
    }
    return out;
  }

 private:
  static constexpr std::size_t kBlockSize = 64;

  void finalize() {
    const std::uint64_t bits = total_bits_;
    const unsigned char pad = 0x80;
    update(&pad, 1);
    const unsigned char zero = 0x00;
    while (buffer_len_ != 56) {
      update(&zero, 1);
    }
    std::array<unsigned char, 8> len_bytes{};
    for (int i = 0; i < 8; ++i) {
      len_bytes[static_cast<std::size_t>(i)] =
          static_cast<unsigned char>((bits >> (56 - 8 * i)) & 0xFFu);
    }
    update(len_bytes.data(), len_bytes.size());
  }

  static std::uint32_t rotl(std::uint32_t x, int n) {
    return (x << n) | (x >> (32 - n));
  }

  void process_block(const unsigned char* block) {
    std::array<std::uint32_t, 80> w{};
    for (int i = 0; i < 16; ++i) {
      w[static_cast<std::size_t>(i)] =
          (static_cast<std::uint32_t>(block[4 * i]) << 24) |
          (static_cast<std::uint32_t>(block[4 * i + 1]) << 16) |
          (static_cast<std::uint32_t>(block[4 * i + 2]) << 8) |
          static_cast<std::uint32_t>(block[4 * i + 3]);
    }
    for (int i = 16; i < 80; ++i) {
      w[static_cast<std::size_t>(i)] =
          rotl(w[static_cast<std::size_t>(i - 3)] ^
                   w[static_cast<std::size_t>(i - 8)] ^
                   w[static_cast<std::size_t>(i - 14)] ^
                   w[static_cast<std::size_t>(i - 16)],
               1);
    }

    std::uint32_t a = state_[0];
    std::uint32_t b = state_[1];
    std::uint32_t c = state_[2];
    std::uint32_t d = state_[3];
    std::uint32_t e = state_[4];

    for (int i = 0; i < 80; ++i) {
      std::uint32_t f = 0;
      std::uint32_t k = 0;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t temp =
          rotl(a, 5) + f + e + k + w[static_cast<std::size_t>(i)];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = temp;
    }

    state_[0] += a;
    state_[1] += b;
    state_[2] += c;
    state_[3] += d;
    state_[4] += e;
  }

  std::array<std::uint32_t, 5> state_{};
  std::array<unsigned char, kBlockSize> buffer_{};
  std::size_t buffer_len_ = 0;
  std::uint64_t total_bits_ = 0;
};

inline std::string sha1_hex(const std::string& data) {
  Sha1 h;
  h.update(data);
  return h.hex_digest();
}

}  // namespace gelsim::detail
