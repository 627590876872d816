#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include <voxrec/curves.hpp>
#include <voxrec/rng.hpp>

using namespace voxrec;

namespace {

// bit-by-bit interleave oracle for morton codes
uint64_t morton_naive(const std::array<uint32_t, 3>& k, int bits) {
  uint64_t code = 0;
  for (int b = 0; b < bits; ++b)
    for (int a = 0; a < 3; ++a)
      code |= static_cast<uint64_t>((k[a] >> b) & 1u) << (3 * b + a);
  return code;
}

int manhattan(const std::array<uint32_t, 3>& a, const std::array<uint32_t, 3>& b) {
  int d = 0;
  for (int c = 0; c < 3; ++c)
    d += std::abs(static_cast<int>(a[c]) - static_cast<int>(b[c]));
  return d;
}

int chebyshev(const std::array<uint32_t, 3>& a, const std::array<uint32_t, 3>& b) {
  int d = 0;
  for (int c = 0; c < 3; ++c)
    d = std::max(d, std::abs(static_cast<int>(a[c]) - static_cast<int>(b[c])));
  return d;
}

}  // namespace

TEST_CASE("morton closed-form codes") {
  CHECK(curve_encode({0, 0, 0}, CurveKind::morton, 1) == 0);
  CHECK(curve_encode({1, 1, 1}, CurveKind::morton, 1) == 7);
  CHECK(curve_decode(0, CurveKind::morton, 4) == std::array<uint32_t, 3>{0, 0, 0});
  CHECK(curve_decode(5, CurveKind::morton, 1) == std::array<uint32_t, 3>{1, 0, 1});
}

TEST_CASE("morton matches the bit-loop oracle") {
  Rng rng(41);
  for (int i = 0; i < 10000; ++i) {
    const int bits = rng.uniform_int(1, 21);
    const uint32_t mask = (1u << bits) - 1;
    const std::array<uint32_t, 3> k = {static_cast<uint32_t>(rng.bits()) & mask,
                                       static_cast<uint32_t>(rng.bits()) & mask,
                                       static_cast<uint32_t>(rng.bits()) & mask};
    const uint64_t code = curve_encode(k, CurveKind::morton, bits);
    CHECK(code == morton_naive(k, bits));
    CHECK(curve_decode(code, CurveKind::morton, bits) == k);
  }
}

TEST_CASE("round trips for random keys on both curves") {
  Rng rng(42);
  for (CurveKind kind : {CurveKind::morton, CurveKind::hilbert}) {
    for (int i = 0; i < 10000; ++i) {
      const int bits = rng.uniform_int(1, 21);
      const uint32_t mask = (1u << bits) - 1;
      const std::array<uint32_t, 3> k = {static_cast<uint32_t>(rng.bits()) & mask,
                                         static_cast<uint32_t>(rng.bits()) & mask,
                                         static_cast<uint32_t>(rng.bits()) & mask};
      CHECK(curve_decode(curve_encode(k, kind, bits), kind, bits) == k);
    }
  }
}

TEST_CASE("exhaustive bijectivity for small bit widths") {
  for (CurveKind kind : {CurveKind::morton, CurveKind::hilbert}) {
    for (int bits = 1; bits <= 3; ++bits) {
      const uint64_t n = uint64_t(1) << (3 * bits);
      std::set<uint64_t> seen;
      for (uint32_t x = 0; x < (1u << bits); ++x)
        for (uint32_t y = 0; y < (1u << bits); ++y)
          for (uint32_t z = 0; z < (1u << bits); ++z) {
            const uint64_t code = curve_encode({x, y, z}, kind, bits);
            REQUIRE(code < n);
            seen.insert(code);
            REQUIRE(curve_decode(code, kind, bits) == std::array<uint32_t, 3>{x, y, z});
          }
      REQUIRE(seen.size() == n);
    }
  }
}

TEST_CASE("hilbert consecutive codes take unit steps") {
  for (int bits = 1; bits <= 3; ++bits) {
    const uint64_t n = uint64_t(1) << (3 * bits);
    std::array<uint32_t, 3> prev = curve_decode(0, CurveKind::hilbert, bits);
    for (uint64_t code = 1; code < n; ++code) {
      const std::array<uint32_t, 3> cur = curve_decode(code, CurveKind::hilbert, bits);
      REQUIRE(manhattan(prev, cur) == 1);
      REQUIRE(chebyshev(prev, cur) == 1);
      prev = cur;
    }
  }
}

TEST_CASE("hilbert 4x4x4 cube is a unit-step permutation of 0..63") {
  std::vector<uint64_t> codes;
  for (uint32_t x = 0; x < 4; ++x)
    for (uint32_t y = 0; y < 4; ++y)
      for (uint32_t z = 0; z < 4; ++z)
        codes.push_back(curve_encode({x, y, z}, CurveKind::hilbert, 2));
  std::sort(codes.begin(), codes.end());
  for (uint64_t i = 0; i < 64; ++i) REQUIRE(codes[i] == i);
}

TEST_CASE("hilbert preserves locality better than a random order") {
  Rng rng(43);
  const int bits = 6;
  const uint32_t mask = (1u << bits) - 1;
  double hilbert_gap = 0.0, random_gap = 0.0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    std::array<uint32_t, 3> a = {static_cast<uint32_t>(rng.bits()) & mask,
                                 static_cast<uint32_t>(rng.bits()) & mask,
                                 static_cast<uint32_t>(rng.bits()) & mask};
    std::array<uint32_t, 3> b = a;
    const int axis = rng.uniform_int(0, 2);
    b[axis] = std::min(mask, b[axis] + 1);
    const double ha = static_cast<double>(curve_encode(a, CurveKind::hilbert, bits));
    const double hb = static_cast<double>(curve_encode(b, CurveKind::hilbert, bits));
    hilbert_gap += std::abs(ha - hb);
    // random permutation baseline: codes of neighbors are unrelated draws
    random_gap += std::abs(static_cast<double>(rng.bits() >> 46) -
                           static_cast<double>(rng.bits() >> 46));
  }
  CHECK(hilbert_gap / pairs < random_gap / pairs);
}

TEST_CASE("curve range errors") {
  CHECK_THROWS_WITH(curve_encode({2, 0, 0}, CurveKind::morton, 1), "key overflow");
  CHECK_THROWS_WITH(curve_encode({0, 0, 0}, CurveKind::morton, 22), "key overflow");
  CHECK_THROWS_WITH(curve_decode(8, CurveKind::hilbert, 1), "code out of range");
}
