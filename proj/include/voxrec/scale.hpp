#pragma once

// Robust and median scale estimators. roe_scale solves the confidence
// weighted L1 problem
//     min_{s>0}  f(s) = sum_i w_i |s * src_i - dst_i|_1
// exactly: f is convex piecewise linear in s with breakpoints dst_ic/src_ic,
// so the global minimizer is the weighted median of the breakpoints with
// weights w_i * |src_ic|.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace voxrec {

struct Correspondences {
  std::vector<Eigen::Vector3d> src;
  std::vector<Eigen::Vector3d> dst;
  std::vector<double> ws;  // nonnegative confidence weights
};

// L1 objective of the scale fit; exposed so callers can audit optimality.
inline double roe_objective(const Correspondences& c, double s) {
  double f = 0.0;
  for (size_t i = 0; i < c.src.size(); ++i) {
    const double w = c.ws.empty() ? 1.0 : c.ws[i];
    if (w <= 0.0) continue;
    f += w * (s * c.src[i] - c.dst[i]).cwiseAbs().sum();
  }
  return f;
}

inline double roe_scale(const Correspondences& c) {
  if (c.src.size() != c.dst.size() || (!c.ws.empty() && c.ws.size() != c.src.size()))
    throw std::invalid_argument("size mismatch");

  struct Breakpoint {
    double value;
    double weight;
  };
  std::vector<Breakpoint> bps;
  bps.reserve(c.src.size() * 3);
  double total = 0.0;
  for (size_t i = 0; i < c.src.size(); ++i) {
    const double w = c.ws.empty() ? 1.0 : c.ws[i];
    if (w <= 0.0) continue;
    if (!c.src[i].allFinite() || !c.dst[i].allFinite()) continue;
    for (int k = 0; k < 3; ++k) {
      const double a = c.src[i](k);
      if (a == 0.0) continue;  // constant term, does not move the argmin
      const double bw = w * std::abs(a);
      bps.push_back({c.dst[i](k) / a, bw});
      total += bw;
    }
  }
  if (bps.empty() || total <= 0.0) throw std::invalid_argument("scale unobservable");

  std::sort(bps.begin(), bps.end(),
            [](const Breakpoint& a, const Breakpoint& b) { return a.value < b.value; });

  // Smallest breakpoint with cumulative weight >= half the total; equality
  // means a flat segment and we break the tie toward the smaller scale.
  const double half = 0.5 * total;
  double cum = 0.0;
  double s = bps.back().value;
  for (const Breakpoint& b : bps) {
    cum += b.weight;
    if (cum >= half) {
      s = b.value;
      break;
    }
  }
  if (!(s > 0.0)) throw std::invalid_argument("scale unobservable");
  return s;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("empty median");
  const size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + (n - 1) / 2, v.end());
  const double lo = v[(n - 1) / 2];
  if (n % 2 == 1) return lo;
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  return 0.5 * (lo + v[n / 2]);
}

// median(dst) / median(src) after dropping non-finite and nonpositive depths.
inline double median_scale(std::span<const double> src_depths,
                           std::span<const double> dst_depths) {
  auto filter = [](std::span<const double> in) {
    std::vector<double> out;
    out.reserve(in.size());
    for (double d : in)
      if (std::isfinite(d) && d > 0.0) out.push_back(d);
    return out;
  };
  std::vector<double> s = filter(src_depths);
  std::vector<double> d = filter(dst_depths);
  if (s.empty() || d.empty()) throw std::invalid_argument("no valid depths");
  return median_of(std::move(d)) / median_of(std::move(s));
}

// Median of the per-frame scale estimates.
inline double metric_factor_from_frames(std::span<const double> per_frame_factors) {
  if (per_frame_factors.empty()) throw std::invalid_argument("no frames");
  return median_of({per_frame_factors.begin(), per_frame_factors.end()});
}

}  // namespace voxrec
