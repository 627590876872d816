#pragma once

// Deterministic random sampling on top of std::mt19937_64. The uniform and
// normal draws are generated from raw 64-bit words instead of the standard
// distributions, whose output is implementation-defined; this keeps runs
// byte-identical across compilers.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace voxrec {

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(gen_() % static_cast<uint64_t>(hi - lo + 1));
  }

  // Box-Muller; one spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::Vector3d normal3() {
    Eigen::Vector3d v;
    v << normal(), normal(), normal();
    return v;
  }

  Eigen::Vector3d uniform3(double lo, double hi) {
    Eigen::Vector3d v;
    v << uniform(lo, hi), uniform(lo, hi), uniform(lo, hi);
    return v;
  }

  // Sub-stream keyed by an id; used for per-frame noise that must not depend
  // on call order.
  static Rng keyed(uint64_t seed, uint64_t key) {
    uint64_t h = seed ^ (0x9e3779b97f4a7c15ULL + key);
    h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27; h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return Rng(h);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace voxrec
