#pragma once

// Shared generators for randomized tests.

#include <voxrec/geometry.hpp>
#include <voxrec/rng.hpp>

namespace voxrec::testing {

inline Quat random_quat(Rng& rng) {
  return Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
}

inline Sim3 random_sim3(Rng& rng, double t_range = 2.0, double s_lo = 0.3, double s_hi = 3.0) {
  Sim3 p;
  p.q = random_quat(rng);
  p.t = rng.uniform3(-t_range, t_range);
  p.s = rng.uniform(s_lo, s_hi);
  return p;
}

inline Vec3 random_point(Rng& rng, double range = 2.0) { return rng.uniform3(-range, range); }

}  // namespace voxrec::testing
