#pragma once

// Sparse voxel data path: voxelization with mean feature pooling, curve
// serialization, a pluggable serialized-sequence processor, and inverse
// distance weighted KNN interpolation back to query points.
//
// Voxel membership uses the floor rule key = floor(p / voxel_size); pooled
// features conceptually live at cell centers (key + 0.5) * voxel_size, which
// is also the KNN distance anchor. A built grid is immutable and safe for
// concurrent queries.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "voxrec/curves.hpp"
#include "voxrec/geometry.hpp"

namespace voxrec {

struct PointFeatureCloud {
  std::vector<Vec3> positions;
  Eigen::MatrixXd features;                 // one row per point
  std::vector<std::pair<int, int>> source;  // optional (frame, pixel) origin

  size_t size() const { return positions.size(); }
};

using VoxelKey = std::array<int32_t, 3>;

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& k) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int32_t v : k) {
      h ^= static_cast<uint32_t>(v);
      h *= 0x100000001b3ULL;
    }
    return static_cast<size_t>(h);
  }
};

struct SparseVoxelGrid {
  double voxel_size = 0.01;
  std::vector<VoxelKey> keys;  // unique, lexicographically ascending
  Eigen::MatrixXd features;    // pooled means, row i belongs to keys[i]
  std::vector<int> counts;
  std::vector<int> point_to_voxel;
  std::vector<int> order;  // voxel indices by ascending curve code
  CurveKind order_kind = CurveKind::morton;

  std::unordered_map<VoxelKey, int, VoxelKeyHash> key_index;

  size_t size() const { return keys.size(); }
  int feature_width() const { return static_cast<int>(features.cols()); }

  Vec3 center(int i) const {
    const VoxelKey& k = keys[i];
    return Vec3((k[0] + 0.5) * voxel_size, (k[1] + 0.5) * voxel_size,
                (k[2] + 0.5) * voxel_size);
  }
};

inline VoxelKey voxel_key_of(const Vec3& p, double voxel_size) {
  VoxelKey k;
  for (int c = 0; c < 3; ++c) {
    const double f = std::floor(p(c) / voxel_size);
    if (f < std::numeric_limits<int32_t>::min() || f > std::numeric_limits<int32_t>::max())
      throw std::invalid_argument("position out of voxel key range");
    k[c] = static_cast<int32_t>(f);
  }
  return k;
}

namespace detail {

// Curve order of a key set; minimal bits covering the shifted extent.
inline std::vector<int> curve_order(const std::vector<VoxelKey>& keys, CurveKind kind) {
  std::vector<int> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  if (keys.empty()) return order;

  VoxelKey lo = keys[0];
  VoxelKey hi = keys[0];
  for (const VoxelKey& k : keys)
    for (int c = 0; c < 3; ++c) {
      lo[c] = std::min(lo[c], k[c]);
      hi[c] = std::max(hi[c], k[c]);
    }
  uint64_t extent = 0;
  for (int c = 0; c < 3; ++c)
    extent = std::max(extent, static_cast<uint64_t>(int64_t(hi[c]) - int64_t(lo[c])));
  if (extent >= (uint64_t(1) << kMaxCurveBits)) throw std::invalid_argument("grid too large");
  int bits = 1;
  while ((uint64_t(1) << bits) <= extent) ++bits;

  std::vector<uint64_t> codes(keys.size());
  for (size_t i = 0; i < keys.size(); ++i) {
    const std::array<uint32_t, 3> shifted = {
        static_cast<uint32_t>(keys[i][0] - lo[0]),
        static_cast<uint32_t>(keys[i][1] - lo[1]),
        static_cast<uint32_t>(keys[i][2] - lo[2])};
    codes[i] = curve_encode(shifted, kind, bits);
  }
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return codes[a] < codes[b]; });
  return order;
}

}  // namespace detail

// Groups points by voxel key and pools features by unweighted mean. The
// accumulation runs in long double so the pooled means are stable under
// input permutation well below the 1e-12 contract.
inline SparseVoxelGrid voxelize(const PointFeatureCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("nonpositive voxel size");
  if (cloud.features.rows() != static_cast<Eigen::Index>(cloud.positions.size()))
    throw std::invalid_argument("positions/features size mismatch");

  SparseVoxelGrid grid;
  grid.voxel_size = voxel_size;
  const size_t n = cloud.positions.size();
  const int width = static_cast<int>(cloud.features.cols());
  grid.features.resize(0, width);
  if (n == 0) return grid;

  std::vector<VoxelKey> point_keys(n);
  for (size_t i = 0; i < n; ++i) {
    if (!cloud.positions[i].allFinite())
      throw std::invalid_argument("non-finite position");
    point_keys[i] = voxel_key_of(cloud.positions[i], voxel_size);
  }

  std::vector<VoxelKey> unique_keys = point_keys;
  std::sort(unique_keys.begin(), unique_keys.end());
  unique_keys.erase(std::unique(unique_keys.begin(), unique_keys.end()), unique_keys.end());

  grid.keys = std::move(unique_keys);
  grid.key_index.reserve(grid.keys.size());
  for (size_t i = 0; i < grid.keys.size(); ++i)
    grid.key_index.emplace(grid.keys[i], static_cast<int>(i));

  const size_t nv = grid.keys.size();
  grid.counts.assign(nv, 0);
  grid.point_to_voxel.resize(n);
  std::vector<long double> acc(nv * width, 0.0L);
  for (size_t i = 0; i < n; ++i) {
    const int v = grid.key_index.at(point_keys[i]);
    grid.point_to_voxel[i] = v;
    grid.counts[v] += 1;
    for (int c = 0; c < width; ++c) acc[v * width + c] += cloud.features(i, c);
  }

  grid.features.resize(nv, width);
  for (size_t v = 0; v < nv; ++v)
    for (int c = 0; c < width; ++c)
      grid.features(v, c) = static_cast<double>(acc[v * width + c] / grid.counts[v]);

  grid.order = detail::curve_order(grid.keys, grid.order_kind);
  return grid;
}

// A grid's features laid out along a space-filling curve, together with the
// permutation needed to map processed features back onto voxels.
struct SerializedGrid {
  CurveKind kind = CurveKind::morton;
  std::vector<int> order;      // order[rank] = voxel index
  Eigen::MatrixXd features;    // row per rank
};

inline SerializedGrid serialize(const SparseVoxelGrid& grid, CurveKind kind) {
  SerializedGrid s;
  s.kind = kind;
  s.order = detail::curve_order(grid.keys, kind);
  s.features.resize(grid.features.rows(), grid.features.cols());
  for (size_t r = 0; r < s.order.size(); ++r) s.features.row(r) = grid.features.row(s.order[r]);
  return s;
}

// Scatters processed features back into voxel-index order.
inline Eigen::MatrixXd unserialize(const SerializedGrid& s, const Eigen::MatrixXd& processed) {
  if (processed.rows() != s.features.rows() || processed.cols() != s.features.cols())
    throw std::invalid_argument("shape contract violated");
  Eigen::MatrixXd out(processed.rows(), processed.cols());
  for (size_t r = 0; r < s.order.size(); ++r) out.row(s.order[r]) = processed.row(r);
  return out;
}

// Integration seam for the learned sequence model; stand-ins only.
class SequenceProcessor {
 public:
  virtual ~SequenceProcessor() = default;
  virtual Eigen::MatrixXd apply(const Eigen::MatrixXd& seq) const = 0;
  virtual std::string name() const = 0;
};

class IdentityProcessor final : public SequenceProcessor {
 public:
  Eigen::MatrixXd apply(const Eigen::MatrixXd& seq) const override { return seq; }
  std::string name() const override { return "identity"; }
};

// 1D moving average along the sequence, window 3, edge-clamped.
class MovingAverageProcessor final : public SequenceProcessor {
 public:
  Eigen::MatrixXd apply(const Eigen::MatrixXd& seq) const override {
    const Eigen::Index n = seq.rows();
    Eigen::MatrixXd out(n, seq.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = std::max<Eigen::Index>(i - 1, 0);
      const Eigen::Index b = std::min<Eigen::Index>(i + 1, n - 1);
      out.row(i) = (seq.row(a) + seq.row(i) + seq.row(b)) / 3.0;
    }
    return out;
  }
  std::string name() const override { return "moving_average"; }
};

inline Eigen::MatrixXd process_serialized(const SerializedGrid& s, const SequenceProcessor& p) {
  Eigen::MatrixXd out = p.apply(s.features);
  if (out.rows() != s.features.rows() || out.cols() != s.features.cols())
    throw std::runtime_error("shape contract violated");
  return out;
}

namespace detail {

struct KnnCandidate {
  double dist;
  int voxel;
  bool operator<(const KnnCandidate& o) const {
    return dist < o.dist || (dist == o.dist && voxel < o.voxel);
  }
};

// Expanding Chebyshev shells around the query's cell. Shell r centers are at
// least (r - 0.5) * voxel_size away, which gives the exact stop condition.
inline void knn_voxel_centers(const SparseVoxelGrid& grid, const Vec3& query, int k,
                              std::vector<KnnCandidate>& out) {
  out.clear();
  const int n = static_cast<int>(grid.size());
  k = std::min(k, n);

  std::priority_queue<KnnCandidate> heap;  // max-heap on (dist, voxel)
  auto consider = [&](int v) {
    const double d = (grid.center(v) - query).norm();
    KnnCandidate c{d, v};
    if (static_cast<int>(heap.size()) < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  };

  const VoxelKey q = voxel_key_of(query, grid.voxel_size);
  bool done = false;
  for (int r = 0;; ++r) {
    const uint64_t cells = static_cast<uint64_t>(2 * r + 1);
    if (cells * cells * cells > 8ull * static_cast<uint64_t>(n)) break;  // sparse: scan instead
    if (r == 0) {
      auto it = grid.key_index.find(q);
      if (it != grid.key_index.end()) consider(it->second);
    } else {
      for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy)
          for (int dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            const VoxelKey nk = {q[0] + dx, q[1] + dy, q[2] + dz};
            auto it = grid.key_index.find(nk);
            if (it != grid.key_index.end()) consider(it->second);
          }
    }
    if (static_cast<int>(heap.size()) == k &&
        (r + 1 - 0.5) * grid.voxel_size > heap.top().dist) {
      done = true;
      break;
    }
  }
  if (!done) {
    // shell sweep aborted (grid too sparse for ring search to pay off);
    // fall back to a full scan to stay exact
    while (!heap.empty()) heap.pop();
    for (int v = 0; v < n; ++v) consider(v);
  }

  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::sort(out.begin(), out.end());
}

}  // namespace detail

inline constexpr double kKnnEpsilon = 1e-8;

// Inverse-distance-weighted mean of the k nearest voxel center features.
// An exact hit (distance below epsilon) returns that voxel's feature.
inline Eigen::MatrixXd knn_interpolate(std::span<const Vec3> queries,
                                       const SparseVoxelGrid& grid, int k) {
  if (grid.size() == 0) throw std::invalid_argument("no support");
  if (k < 1) throw std::invalid_argument("k must be positive");

  Eigen::MatrixXd out(queries.size(), grid.feature_width());
  std::vector<detail::KnnCandidate> nn;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    detail::knn_voxel_centers(grid, queries[qi], k, nn);
    if (nn.front().dist < kKnnEpsilon) {
      out.row(qi) = grid.features.row(nn.front().voxel);
      continue;
    }
    double wsum = 0.0;
    out.row(qi).setZero();
    for (const auto& c : nn) {
      const double w = 1.0 / (c.dist + kKnnEpsilon);
      wsum += w;
      out.row(qi) += w * grid.features.row(c.voxel);
    }
    out.row(qi) /= wsum;
  }
  return out;
}

}  // namespace voxrec
