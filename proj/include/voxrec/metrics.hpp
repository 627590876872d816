#pragma once

// Evaluation toolkit: depth metrics (rel, inlier ratios), reconstruction
// accuracy/completeness, trajectory ATE RMSE, and relative-pose accuracy
// curves. All computations are pure; distances come out in the units of the
// inputs (the CLI reports centimeters).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "voxrec/geometry.hpp"
#include "voxrec/scale.hpp"
#include "voxrec/trajectory.hpp"

namespace voxrec {

// ---------------------------------------------------------------------------
// depth

enum class DepthAlignment { median, metric_none };

struct DepthEvalResult {
  double rel = 0.0;
  double delta_103 = 0.0;
  double delta_125 = 0.0;
};

inline DepthEvalResult depth_metrics(std::span<const double> pred, std::span<const double> gt,
                                     std::span<const uint8_t> valid,
                                     DepthAlignment alignment = DepthAlignment::median) {
  if (pred.size() != gt.size() || (!valid.empty() && valid.size() != pred.size()))
    throw std::invalid_argument("size mismatch");
  std::vector<double> p, g;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    if (!(gt[i] > 0.0) || !std::isfinite(pred[i])) continue;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  if (p.empty()) throw std::invalid_argument("no valid pixels");

  double scale = 1.0;
  if (alignment == DepthAlignment::median) scale = median_scale(p, g);

  DepthEvalResult r;
  for (size_t i = 0; i < p.size(); ++i) {
    const double d = scale * p[i];
    r.rel += std::abs(d - g[i]) / g[i];
    const double ratio = std::max(d / g[i], g[i] / d);
    r.delta_103 += ratio < 1.03 ? 1.0 : 0.0;
    r.delta_125 += ratio < 1.25 ? 1.0 : 0.0;
  }
  r.rel /= p.size();
  r.delta_103 /= p.size();
  r.delta_125 /= p.size();
  return r;
}

// ---------------------------------------------------------------------------
// reconstruction

struct ReconEvalResult {
  double rel = 0.0;
  double accuracy = 0.0;      // pred -> GT mean nearest-neighbor distance
  double completeness = 0.0;  // GT -> pred
};

namespace detail {

// Exact nearest-neighbor distances through a uniform cell hash with
// expanding ring search; falls back to a scan for tiny inputs.
class NearestNeighbor {
 public:
  explicit NearestNeighbor(std::span<const Vec3> points) : points_(points) {
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double diag = (hi - lo).norm();
    brute_ = points.size() <= 64 || diag <= 0.0;
    if (brute_) return;
    cell_ = diag / std::cbrt(static_cast<double>(points.size()));
    lo_key_ = key_of(lo);
    hi_key_ = key_of(hi);
    for (size_t i = 0; i < points.size(); ++i)
      cells_[key_of(points[i])].push_back(static_cast<int>(i));
  }

  double distance(const Vec3& q) const {
    if (brute_) return scan(q);
    const std::array<int64_t, 3> center = key_of(q);
    // first shell that can touch an occupied cell, and the shell beyond
    // which every occupied cell has been visited
    int64_t r_min = 0, max_r = 1;
    for (int a = 0; a < 3; ++a) {
      r_min = std::max({r_min, lo_key_[a] - center[a], center[a] - hi_key_[a]});
      max_r = std::max({max_r, std::abs(center[a] - lo_key_[a]) + 1,
                        std::abs(hi_key_[a] - center[a]) + 1});
    }
    if (r_min > 64) return scan(q);  // query far outside the cloud
    double best = std::numeric_limits<double>::infinity();
    for (int64_t r = r_min; r <= max_r; ++r) {
      if (best < (static_cast<double>(r) - 1.0) * cell_) break;
      visit_shell(center, r, q, best);
    }
    return best;
  }

 private:
  double scan(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : points_) best = std::min(best, (p - q).norm());
    return best;
  }

  std::array<int64_t, 3> key_of(const Vec3& p) const {
    return {static_cast<int64_t>(std::floor(p.x() / cell_)),
            static_cast<int64_t>(std::floor(p.y() / cell_)),
            static_cast<int64_t>(std::floor(p.z() / cell_))};
  }

  void visit_shell(const std::array<int64_t, 3>& c, int64_t r, const Vec3& q,
                   double& best) const {
    for (int64_t dx = -r; dx <= r; ++dx)
      for (int64_t dy = -r; dy <= r; ++dy)
        for (int64_t dz = -r; dz <= r; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
          const auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells_.end()) continue;
          for (int i : it->second) best = std::min(best, (points_[i] - q).norm());
        }
  }

  struct KeyHash {
    size_t operator()(const std::array<int64_t, 3>& k) const {
      uint64_t h = 0xcbf29ce484222325ULL;
      for (int64_t v : k) {
        h ^= static_cast<uint64_t>(v);
        h *= 0x100000001b3ULL;
      }
      return static_cast<size_t>(h);
    }
  };

  std::span<const Vec3> points_;
  bool brute_ = false;
  double cell_ = 1.0;
  std::array<int64_t, 3> lo_key_ = {0, 0, 0};
  std::array<int64_t, 3> hi_key_ = {0, 0, 0};
  std::unordered_map<std::array<int64_t, 3>, std::vector<int>, KeyHash> cells_;
};

}  // namespace detail

// pred/gt correspond pixel-wise for rel (masked by `valid` when present);
// accuracy/completeness are set-to-set mean nearest-neighbor distances.
// Median alignment rescales pred by the median-norm ratio first. No rigid
// ICP is ever applied.
inline ReconEvalResult recon_metrics(std::span<const Vec3> pred, std::span<const Vec3> gt,
                                     std::span<const uint8_t> valid = {},
                                     DepthAlignment alignment = DepthAlignment::median) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("empty point set");
  const bool corresponding = pred.size() == gt.size();
  if (!valid.empty() && valid.size() != pred.size())
    throw std::invalid_argument("size mismatch");

  std::vector<Vec3> p, g;
  for (size_t i = 0; i < pred.size(); ++i)
    if (valid.empty() || valid[i]) p.push_back(pred[i]);
  for (size_t i = 0; i < gt.size(); ++i)
    if (!corresponding || valid.empty() || valid[i]) g.push_back(gt[i]);
  if (p.empty() || g.empty()) throw std::invalid_argument("empty point set");

  double scale = 1.0;
  if (alignment == DepthAlignment::median) {
    std::vector<double> pn, gn;
    for (const Vec3& v : p) pn.push_back(v.norm());
    for (const Vec3& v : g) gn.push_back(v.norm());
    scale = median_scale(pn, gn);
  }
  std::vector<Vec3> ps(p.size());
  for (size_t i = 0; i < p.size(); ++i) ps[i] = scale * p[i];

  ReconEvalResult r;
  if (corresponding) {
    double rel = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < ps.size(); ++i) {
      const double gnorm = g[i].norm();
      if (gnorm <= 0.0) continue;
      rel += (ps[i] - g[i]).norm() / gnorm;
      ++n;
    }
    r.rel = n > 0 ? rel / n : 0.0;
  }

  const detail::NearestNeighbor to_gt(g);
  for (const Vec3& v : ps) r.accuracy += to_gt.distance(v);
  r.accuracy /= ps.size();

  const detail::NearestNeighbor to_pred(ps);
  for (const Vec3& v : g) r.completeness += to_pred.distance(v);
  r.completeness /= g.size();
  return r;
}

// ---------------------------------------------------------------------------
// trajectories

enum class TrajectoryAlignment { sim3, se3, none };

inline constexpr double kTimestampTolerance = 0.02;  // seconds

// Associates samples by nearest timestamp within the tolerance (one-to-one,
// in time order), optionally aligns with Kabsch-Umeyama, then reports the
// RMSE of the translation residuals.
inline double ate_rmse(const Trajectory& est, const Trajectory& gt,
                       TrajectoryAlignment alignment = TrajectoryAlignment::sim3) {
  std::vector<Vec3> e, g;
  size_t j = 0;
  for (const TrajectorySample& s : est) {
    while (j + 1 < gt.size() &&
           std::abs(gt[j + 1].timestamp - s.timestamp) <= std::abs(gt[j].timestamp - s.timestamp))
      ++j;
    if (j < gt.size() && std::abs(gt[j].timestamp - s.timestamp) <= kTimestampTolerance) {
      e.push_back(s.pose.t);
      g.push_back(gt[j].pose.t);
      ++j;
      if (j >= gt.size()) break;
    }
  }
  if (e.empty()) throw std::invalid_argument("no matched poses");

  std::vector<Vec3> aligned = e;
  if (alignment != TrajectoryAlignment::none) {
    if (e.size() < 3) throw std::invalid_argument("need at least 3 matched poses to align");
    const Sim3 a = kabsch_umeyama(e, g, {}, alignment == TrajectoryAlignment::sim3);
    for (Vec3& v : aligned) v = a.apply(v);
  }
  double sum = 0.0;
  for (size_t i = 0; i < aligned.size(); ++i) sum += (aligned[i] - g[i]).squaredNorm();
  return std::sqrt(sum / aligned.size());
}

// ---------------------------------------------------------------------------
// relative poses

struct PoseEvalResult {
  std::map<int, double> rra;  // threshold degrees -> fraction
  std::map<int, double> rta;
  double auc30 = 0.0;
  bool translation_defined = true;  // false when every baseline is degenerate
};

// Over all ordered pairs: rotation error is the geodesic angle between
// relative rotations; translation error is the angle between relative
// translation directions (pairs with GT baseline under 1e-6 are excluded; a
// degenerate estimated baseline counts as maximal error). AUC@30 is the
// arithmetic mean over integer thresholds 1..30 degrees of
// min(RRA, RTA) x 100, a fixed protocol constant of this toolkit.
inline PoseEvalResult relpose_accuracy(const std::vector<Sim3>& est, const std::vector<Sim3>& gt,
                                       const std::vector<int>& thresholds = {1, 3, 5, 10, 15, 30}) {
  if (est.size() != gt.size() || est.size() < 2)
    throw std::invalid_argument("need at least two matched poses");

  std::vector<double> rot_err, trans_err;
  for (size_t i = 0; i < est.size(); ++i) {
    for (size_t j = 0; j < est.size(); ++j) {
      if (i == j) continue;
      const Quat rel_e = est[i].q.conjugate() * est[j].q;
      const Quat rel_g = gt[i].q.conjugate() * gt[j].q;
      rot_err.push_back((rel_e.conjugate() * rel_g).angle() * 180.0 / M_PI);

      const Vec3 te = est[i].q.conjugate().rotate(est[j].t - est[i].t);
      const Vec3 tg = gt[i].q.conjugate().rotate(gt[j].t - gt[i].t);
      if (tg.norm() < 1e-6) continue;  // degenerate GT baseline excluded
      if (te.norm() < 1e-6) {
        trans_err.push_back(180.0);  // estimate collapsed the baseline
        continue;
      }
      const double c = std::clamp(te.normalized().dot(tg.normalized()), -1.0, 1.0);
      trans_err.push_back(std::acos(c) * 180.0 / M_PI);
    }
  }

  PoseEvalResult r;
  r.translation_defined = !trans_err.empty();
  auto fraction_below = [](const std::vector<double>& errs, double threshold) {
    if (errs.empty()) return 0.0;
    size_t n = 0;
    for (double e : errs) n += e < threshold ? 1 : 0;
    return static_cast<double>(n) / errs.size();
  };
  for (int t : thresholds) {
    r.rra[t] = fraction_below(rot_err, t);
    if (r.translation_defined) r.rta[t] = fraction_below(trans_err, t);
  }
  double auc = 0.0;
  for (int t = 1; t <= 30; ++t) {
    const double rra = fraction_below(rot_err, t);
    const double rta = r.translation_defined ? fraction_below(trans_err, t) : rra;
    auc += std::min(rra, rta);
  }
  r.auc30 = 100.0 * auc / 30.0;
  return r;
}

}  // namespace voxrec
