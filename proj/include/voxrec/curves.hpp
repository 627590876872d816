#pragma once

// 3D space-filling curve codes for sparse voxel serialization. Both curves
// are exact bijections between the key cube [0, 2^bits)^3 and the code range
// [0, 2^(3*bits)); bits is capped at 21 so codes fit in 63 bits.
//
// Morton interleaves coordinate bits (z-order). Hilbert uses Skilling's
// transpose algorithm, which yields the canonical curve where consecutive
// codes are always one unit step apart.

#include <array>
#include <cstdint>
#include <stdexcept>

namespace voxrec {

enum class CurveKind : uint8_t { morton = 0, hilbert = 1 };

inline constexpr int kMaxCurveBits = 21;

namespace detail {

inline uint64_t split3(uint32_t a) {
  uint64_t x = a & 0x1fffff;
  x = (x | x << 32) & 0x1f00000000ffffULL;
  x = (x | x << 16) & 0x1f0000ff0000ffULL;
  x = (x | x << 8)  & 0x100f00f00f00f00fULL;
  x = (x | x << 4)  & 0x10c30c30c30c30c3ULL;
  x = (x | x << 2)  & 0x1249249249249249ULL;
  return x;
}

inline uint32_t compact3(uint64_t x) {
  x &= 0x1249249249249249ULL;
  x = (x ^ (x >> 2))  & 0x10c30c30c30c30c3ULL;
  x = (x ^ (x >> 4))  & 0x100f00f00f00f00fULL;
  x = (x ^ (x >> 8))  & 0x1f0000ff0000ffULL;
  x = (x ^ (x >> 16)) & 0x1f00000000ffffULL;
  x = (x ^ (x >> 32)) & 0x1fffff;
  return static_cast<uint32_t>(x);
}

// Skilling, "Programming the Hilbert curve" (2004). X is mutated in place
// between axis form and transpose form.
inline void axes_to_transpose(std::array<uint32_t, 3>& X, int bits) {
  uint32_t P, Q, t;
  for (Q = 1u << (bits - 1); Q > 1; Q >>= 1) {
    P = Q - 1;
    for (int i = 0; i < 3; ++i) {
      if (X[i] & Q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) X[i] ^= X[i - 1];
  t = 0;
  for (Q = 1u << (bits - 1); Q > 1; Q >>= 1)
    if (X[2] & Q) t ^= Q - 1;
  for (int i = 0; i < 3; ++i) X[i] ^= t;
}

inline void transpose_to_axes(std::array<uint32_t, 3>& X, int bits) {
  uint32_t N = 2u << (bits - 1), P, Q, t;
  t = X[2] >> 1;
  for (int i = 2; i > 0; --i) X[i] ^= X[i - 1];
  X[0] ^= t;
  for (Q = 2; Q != N; Q <<= 1) {
    P = Q - 1;
    for (int i = 2; i >= 0; --i) {
      if (X[i] & Q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
}

// Transpose layout: the code's bits, MSB first, cycle through X[0], X[1],
// X[2] at each bit level.
inline uint64_t interleave_transpose(const std::array<uint32_t, 3>& X, int bits) {
  uint64_t h = 0;
  for (int bit = bits - 1; bit >= 0; --bit)
    for (int i = 0; i < 3; ++i) h = (h << 1) | ((X[i] >> bit) & 1u);
  return h;
}

inline std::array<uint32_t, 3> deinterleave_transpose(uint64_t h, int bits) {
  std::array<uint32_t, 3> X = {0, 0, 0};
  for (int bit = bits - 1; bit >= 0; --bit)
    for (int i = 0; i < 3; ++i) {
      X[i] |= static_cast<uint32_t>((h >> (3 * bit + 2 - i)) & 1u) << bit;
    }
  return X;
}

}  // namespace detail

inline uint64_t curve_encode(const std::array<uint32_t, 3>& key, CurveKind kind, int bits) {
  if (bits < 1 || bits > kMaxCurveBits) throw std::invalid_argument("key overflow");
  const uint32_t limit = 1u << bits;
  for (uint32_t k : key)
    if (k >= limit) throw std::invalid_argument("key overflow");
  if (kind == CurveKind::morton) {
    return detail::split3(key[0]) | detail::split3(key[1]) << 1 | detail::split3(key[2]) << 2;
  }
  std::array<uint32_t, 3> X = key;
  detail::axes_to_transpose(X, bits);
  return detail::interleave_transpose(X, bits);
}

inline std::array<uint32_t, 3> curve_decode(uint64_t code, CurveKind kind, int bits) {
  if (bits < 1 || bits > kMaxCurveBits) throw std::invalid_argument("code out of range");
  if (code >= (uint64_t(1) << (3 * bits))) throw std::invalid_argument("code out of range");
  if (kind == CurveKind::morton) {
    return {detail::compact3(code), detail::compact3(code >> 1), detail::compact3(code >> 2)};
  }
  std::array<uint32_t, 3> X = detail::deinterleave_transpose(code, bits);
  detail::transpose_to_axes(X, bits);
  return X;
}

}  // namespace voxrec
