#pragma once

// Divide-and-conquer feed-forward SfM: whitened-descriptor clustering via
// farthest point sampling, incremental coarse registration of clusters
// against a global keyframe list, and a two-stage confidence-prioritized
// refinement. Alignment and fusion reuse the VO machinery.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "voxrec/map.hpp"
#include "voxrec/prediction.hpp"
#include "voxrec/vo.hpp"

namespace voxrec {

struct SfmConfig {
  double eta_d = 0.2;  // keyframe admission distance
  int top_k = 5;       // candidate clusters / sub-clusters / refinement peers
  int n_kmax = 8;      // keyframe count that triggers sub-clustering
  double eta_r = 1.5;  // refinement neighborhood radius
  int n_cmin = 5;      // cluster size range
  int n_cmax = 16;
  double registration_quantile = 0.1;  // defer frames below this confidence
  double lambda = 1.0;

  void validate() const {
    if (!(eta_d > 0.0)) throw std::invalid_argument("invariant violation: eta_d");
    if (!(eta_r > 0.0)) throw std::invalid_argument("invariant violation: eta_r");
    if (top_k < 1) throw std::invalid_argument("invariant violation: top_k");
    if (n_kmax < 1) throw std::invalid_argument("invariant violation: n_kmax");
    if (n_cmin < 1 || n_cmin > n_cmax) throw std::invalid_argument("invariant violation: n_cmin");
    if (registration_quantile < 0.0 || registration_quantile >= 1.0)
      throw std::invalid_argument("invariant violation: registration_quantile");
    if (lambda < 0.0) throw std::invalid_argument("invariant violation: lambda");
  }
};

struct ImageDescriptorSet {
  Eigen::MatrixXd descriptors;  // T x C, one row per image
  bool whitened = false;
};

// PCA whitening: subtract the mean, rotate into principal axes, divide by
// sqrt(eigenvalue + eps). Rank-deficient directions stay bounded through the
// epsilon regularizer.
inline ImageDescriptorSet whiten(const ImageDescriptorSet& desc, double eps = 1e-6) {
  const Eigen::Index t = desc.descriptors.rows();
  if (t < 2) throw std::invalid_argument("need at least two descriptors");
  const Eigen::RowVectorXd mean = desc.descriptors.colwise().mean();
  const Eigen::MatrixXd centered = desc.descriptors.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(t - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd scale = (eig.eigenvalues().array() + eps).rsqrt();
  ImageDescriptorSet out;
  out.descriptors = centered * eig.eigenvectors() * scale.asDiagonal();
  out.whitened = true;
  return out;
}

inline Eigen::MatrixXd feature_distance_matrix(const ImageDescriptorSet& desc) {
  const Eigen::Index t = desc.descriptors.rows();
  Eigen::MatrixXd d(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < t; ++j) {
      d(i, j) = (desc.descriptors.row(i) - desc.descriptors.row(j)).norm();
      d(j, i) = d(i, j);
    }
  }
  return d;
}

struct ClusterSet {
  std::vector<std::vector<int>> clusters;  // image ids per cluster
  Eigen::MatrixXd centroids;               // one row per cluster
  bool undersized = false;                 // T < n_cmin collapses to one cluster
};

namespace detail {

// Greedy max-min selection over a pairwise-distance callback; the first seed
// is the element farthest from the mean of the candidate set. Ties break
// toward the lower index.
template <typename DistFn>
std::vector<int> farthest_point_sample(int count, int seeds, DistFn&& dist_to_mean,
                                       const Eigen::MatrixXd& pairwise) {
  std::vector<int> chosen;
  if (count == 0 || seeds == 0) return chosen;
  int first = 0;
  double best = -1.0;
  for (int i = 0; i < count; ++i) {
    const double d = dist_to_mean(i);
    if (d > best) {
      best = d;
      first = i;
    }
  }
  chosen.push_back(first);
  std::vector<double> min_dist(count);
  for (int i = 0; i < count; ++i) min_dist[i] = pairwise(i, first);
  while (static_cast<int>(chosen.size()) < std::min(seeds, count)) {
    int next = -1;
    double far = -1.0;
    for (int i = 0; i < count; ++i) {
      if (min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    }
    if (next < 0 || far <= 0.0) break;
    chosen.push_back(next);
    for (int i = 0; i < count; ++i) min_dist[i] = std::min(min_dist[i], pairwise(i, next));
  }
  return chosen;
}

}  // namespace detail

// FPS seeding with iterative splitting and merging until every cluster size
// lands in [n_cmin, n_cmax]; a residual violation after the iteration cap is
// clamped by moving members from the largest to the smallest cluster.
inline ClusterSet cluster_images(const ImageDescriptorSet& desc, const SfmConfig& cfg) {
  cfg.validate();
  if (!desc.whitened) throw std::invalid_argument("descriptors must be whitened");
  const int t = static_cast<int>(desc.descriptors.rows());
  const int c = static_cast<int>(desc.descriptors.cols());

  ClusterSet out;
  if (t < cfg.n_cmin) {
    out.clusters.push_back(std::vector<int>(t));
    std::iota(out.clusters[0].begin(), out.clusters[0].end(), 0);
    out.undersized = true;
    out.centroids = desc.descriptors.colwise().mean();
    return out;
  }

  const Eigen::MatrixXd pairwise = feature_distance_matrix(desc);
  const Eigen::RowVectorXd global_mean = desc.descriptors.colwise().mean();
  const int n_seeds = (t + cfg.n_cmax - 1) / cfg.n_cmax;
  const std::vector<int> seeds = detail::farthest_point_sample(
      t, n_seeds,
      [&](int i) { return (desc.descriptors.row(i) - global_mean).norm(); }, pairwise);

  Eigen::MatrixXd centroids(seeds.size(), c);
  for (size_t s = 0; s < seeds.size(); ++s) centroids.row(s) = desc.descriptors.row(seeds[s]);

  std::vector<std::vector<int>> clusters;
  auto assign = [&]() {
    clusters.assign(centroids.rows(), {});
    for (int i = 0; i < t; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (Eigen::Index s = 0; s < centroids.rows(); ++s) {
        const double d = (desc.descriptors.row(i) - centroids.row(s)).norm();
        if (d < bd) {
          bd = d;
          best = static_cast<int>(s);
        }
      }
      clusters[best].push_back(i);
    }
    std::erase_if(clusters, [](const std::vector<int>& cl) { return cl.empty(); });
  };
  auto recompute_centroids = [&]() {
    centroids.resize(clusters.size(), c);
    for (size_t s = 0; s < clusters.size(); ++s) {
      Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(c);
      for (int i : clusters[s]) m += desc.descriptors.row(i);
      centroids.row(s) = m / clusters[s].size();
    }
  };

  assign();
  recompute_centroids();

  for (int iter = 0; iter < 20; ++iter) {
    bool changed = false;

    // split oversized clusters with a two-seed FPS inside the cluster
    std::vector<std::vector<int>> next;
    for (const std::vector<int>& cl : clusters) {
      if (static_cast<int>(cl.size()) <= cfg.n_cmax) {
        next.push_back(cl);
        continue;
      }
      changed = true;
      const int n = static_cast<int>(cl.size());
      Eigen::MatrixXd sub(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) sub(i, j) = pairwise(cl[i], cl[j]);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(c);
      for (int i : cl) mean += desc.descriptors.row(i);
      mean /= n;
      const std::vector<int> two = detail::farthest_point_sample(
          n, 2, [&](int i) { return (desc.descriptors.row(cl[i]) - mean).norm(); }, sub);
      std::vector<int> a, b;
      for (int i = 0; i < n; ++i) {
        if (two.size() < 2 || sub(i, two[0]) <= sub(i, two[1]))
          a.push_back(cl[i]);
        else
          b.push_back(cl[i]);
      }
      if (a.empty() || b.empty()) {
        next.push_back(cl);
      } else {
        next.push_back(a);
        next.push_back(b);
      }
    }
    clusters = std::move(next);
    recompute_centroids();

    // merge undersized clusters into the nearest-centroid neighbor
    for (;;) {
      int small = -1;
      for (size_t s = 0; s < clusters.size(); ++s)
        if (static_cast<int>(clusters[s].size()) < cfg.n_cmin &&
            (small < 0 || clusters[s].size() < clusters[small].size()))
          small = static_cast<int>(s);
      if (small < 0 || clusters.size() <= 1) break;
      changed = true;
      int nearest = -1;
      double bd = std::numeric_limits<double>::infinity();
      for (size_t s = 0; s < clusters.size(); ++s) {
        if (static_cast<int>(s) == small) continue;
        const double d = (centroids.row(s) - centroids.row(small)).norm();
        if (d < bd) {
          bd = d;
          nearest = static_cast<int>(s);
        }
      }
      std::vector<int>& dst = clusters[nearest];
      dst.insert(dst.end(), clusters[small].begin(), clusters[small].end());
      std::sort(dst.begin(), dst.end());
      clusters.erase(clusters.begin() + small);
      recompute_centroids();
    }

    bool ok = true;
    for (const std::vector<int>& cl : clusters)
      ok = ok && static_cast<int>(cl.size()) >= cfg.n_cmin &&
           static_cast<int>(cl.size()) <= cfg.n_cmax;
    if (ok || !changed) break;
  }

  // clamp any residual violation by moving members from largest to smallest
  for (int guard = 0; guard < 10 * t; ++guard) {
    size_t largest = 0, smallest = 0;
    for (size_t s = 0; s < clusters.size(); ++s) {
      if (clusters[s].size() > clusters[largest].size()) largest = s;
      if (clusters[s].size() < clusters[smallest].size()) smallest = s;
    }
    const bool too_big = static_cast<int>(clusters[largest].size()) > cfg.n_cmax;
    const bool too_small = static_cast<int>(clusters[smallest].size()) < cfg.n_cmin;
    if (!too_big && !too_small) break;
    if (largest == smallest) break;
    recompute_centroids();
    // move the member of the largest cluster closest to the smallest centroid
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < clusters[largest].size(); ++i) {
      const double d =
          (desc.descriptors.row(clusters[largest][i]) - centroids.row(smallest)).norm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    clusters[smallest].push_back(clusters[largest][best]);
    std::sort(clusters[smallest].begin(), clusters[smallest].end());
    clusters[largest].erase(clusters[largest].begin() + best);
  }

  for (std::vector<int>& cl : clusters) std::sort(cl.begin(), cl.end());
  std::sort(clusters.begin(), clusters.end());
  out.clusters = std::move(clusters);
  recompute_centroids();
  out.centroids = centroids;
  return out;
}

// ---------------------------------------------------------------------------
// registration pipeline

struct SfmFrameStatus {
  int frame_id = -1;
  int cluster = -1;
  bool registered = false;
  double confidence = 0.0;
};

struct SfmResult {
  GlobalMap map;
  std::vector<SfmFrameStatus> frames;  // by frame id order after the run
  std::vector<int> unregistered;       // frame ids
  std::vector<double> cluster_confidence;
  std::vector<int> refine_visit_order;  // BFS pop order of stage-1 refinement
  int deferred_count = 0;               // frames sent to the retry pass
  int predictor_calls = 0;
};

class SfmPipeline {
 public:
  SfmPipeline(Predictor& predictor, SfmConfig cfg, VoConfig vo_cfg = {})
      : predictor_(predictor), cfg_(std::move(cfg)), vo_cfg_(std::move(vo_cfg)) {
    cfg_.validate();
    vo_cfg_.eta_d = cfg_.eta_d;  // SfM keyframe admission distance
    vo_cfg_.lambda = cfg_.lambda;
  }

  // Full pipeline over an unordered image collection.
  SfmResult run(const std::vector<int>& image_ids) {
    ImageDescriptorSet desc;
    desc.descriptors.resize(image_ids.size(), predictor_.frame_descriptor(image_ids[0]).size());
    for (size_t i = 0; i < image_ids.size(); ++i)
      desc.descriptors.row(i) = predictor_.frame_descriptor(image_ids[i]).transpose();
    const ImageDescriptorSet white = whiten(desc);
    const ClusterSet clusters = cluster_images(white, cfg_);

    SfmResult result = coarse_register(clusters, image_ids, white);
    global_map_refine(result);
    return result;
  }

  // Coarse registration over precomputed clusters; cluster member indices
  // refer to rows of `white` / entries of `image_ids`.
  SfmResult coarse_register(const ClusterSet& clusters, const std::vector<int>& image_ids,
                            const ImageDescriptorSet& white) {
    SfmResult result;
    const size_t n_clusters = clusters.clusters.size();
    std::vector<bool> mapped(n_clusters, false);

    // predict every cluster once; initialization picks the most confident
    std::vector<WindowPrediction> predictions(n_clusters);
    result.cluster_confidence.resize(n_clusters);
    for (size_t ci = 0; ci < n_clusters; ++ci) {
      predictions[ci] = predictor_.predict(to_frame_ids(clusters.clusters[ci], image_ids));
      ++result.predictor_calls;
      result.cluster_confidence[ci] = cluster_confidence(predictions[ci]);
    }
    size_t init = 0;
    for (size_t ci = 1; ci < n_clusters; ++ci)
      if (result.cluster_confidence[ci] > result.cluster_confidence[init]) init = ci;

    GlobalMap& map = result.map;
    bootstrap_map(map, predictions[init]);
    mapped[init] = true;
    note_frames(result, predictions[init], static_cast<int>(init));

    // incremental registration: top-k unmapped clusters by feature distance,
    // commit the best mapping per iteration
    for (;;) {
      std::vector<std::pair<double, int>> candidates;  // (feature distance, cluster)
      for (size_t ci = 0; ci < n_clusters; ++ci) {
        if (mapped[ci]) continue;
        candidates.emplace_back(cluster_to_keyframes_distance(clusters, white,
                                                              static_cast<int>(ci), image_ids, map),
                                static_cast<int>(ci));
      }
      if (candidates.empty()) break;
      std::sort(candidates.begin(), candidates.end());
      candidates.resize(std::min<size_t>(candidates.size(), cfg_.top_k));

      double best_conf = -1.0;
      int best_cluster = -1;
      WindowPrediction best_window;
      Sim3 best_transform;
      for (const auto& [fdist, ci] : candidates) {
        auto attempt = map_cluster_against_keyframes(map, clusters.clusters[ci], image_ids, white);
        if (!attempt.has_value()) continue;
        const double conf = cluster_confidence(attempt->first, clusters.clusters[ci], image_ids);
        if (conf > best_conf ||
            (conf == best_conf && ci < best_cluster)) {
          best_conf = conf;
          best_cluster = ci;
          best_window = std::move(attempt->first);
          best_transform = attempt->second;
        }
      }
      if (best_cluster < 0) {
        // none of the candidates aligned; their frames are unregistered
        for (const auto& [fdist, ci] : candidates) {
          mapped[ci] = true;
          for (int member : clusters.clusters[ci]) {
            const int fid = image_ids[member];
            if (std::none_of(result.frames.begin(), result.frames.end(),
                             [&](const SfmFrameStatus& st) { return st.frame_id == fid; }))
              result.frames.push_back({fid, ci, false, 0.0});
          }
        }
        continue;
      }

      const WindowPrediction global_window = transform_window(best_window, best_transform);
      fuse_window(map, global_window, best_transform.s);
      admit_cluster_keyframes(map, global_window);
      map.update_translation_normalizer();
      mapped[best_cluster] = true;
      note_frames(result, global_window, best_cluster);
    }

    // defer low-confidence frames and retry them once at the end
    retry_low_confidence(result);
    collect_unregistered(result);
    return result;
  }

  // Stage 1: confidence-prioritized BFS over keyframes, mapping each with its
  // top-k closest keyframes within eta_r. Stage 2: every non-keyframe is
  // remapped with its top-k closest keyframes and its pose re-fused.
  void global_map_refine(SfmResult& result) {
    GlobalMap& map = result.map;
    if (map.keyframes.empty()) return;
    const PoseDistanceParams params = map.distance_params(cfg_.lambda);

    std::set<int> visited;
    auto by_confidence = [&](int id) {
      const KeyframeRecord& kf = map.keyframe(id);
      double c = 0.0;
      int n = 0;
      for (size_t px = 0; px < kf.confidence.size(); ++px)
        if (kf.valid[px]) {
          c += kf.confidence[px];
          ++n;
        }
      return n > 0 ? c / n : 0.0;
    };

    // (confidence, frame id): highest confidence first, ties by lower id
    auto cmp = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second > b.second;
    };
    std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>, decltype(cmp)>
        queue(cmp);

    const int first_kf = map.keyframes.front().frame_id;
    queue.emplace(by_confidence(first_kf), first_kf);
    size_t kf_cursor = 0;  // restart source for disconnected components

    while (visited.size() < map.keyframes.size()) {
      if (queue.empty()) {
        while (kf_cursor < map.keyframes.size() &&
               visited.count(map.keyframes[kf_cursor].frame_id))
          ++kf_cursor;
        if (kf_cursor >= map.keyframes.size()) break;
        const int id = map.keyframes[kf_cursor].frame_id;
        queue.emplace(by_confidence(id), id);
      }
      const int id = queue.top().second;
      queue.pop();
      if (visited.count(id)) continue;
      visited.insert(id);
      result.refine_visit_order.push_back(id);

      // neighbors: top-k closest keyframes within eta_r
      std::vector<std::pair<double, int>> neighbors;
      for (const KeyframeRecord& other : map.keyframes) {
        if (other.frame_id == id) continue;
        const double d = pose_distance(map.keyframe(id).pose, other.pose, params);
        if (d <= cfg_.eta_r) neighbors.emplace_back(d, other.frame_id);
      }
      std::sort(neighbors.begin(), neighbors.end());
      neighbors.resize(std::min<size_t>(neighbors.size(), cfg_.top_k));
      if (neighbors.empty()) continue;

      std::vector<int> window_ids = {id};
      for (const auto& [d, nid] : neighbors) window_ids.push_back(nid);

      WindowPrediction window = predictor_.predict(window_ids);
      ++result.predictor_calls;
      try {
        const Sim3 to_global = align_coordinates(map, window, window_ids);
        const WindowPrediction global_window = transform_window(window, to_global);
        fuse_window(map, global_window, to_global.s);
      } catch (const std::invalid_argument&) {
        // unalignable refinement window is skipped, map keeps its state
      }
      for (const auto& [d, nid] : neighbors)
        if (!visited.count(nid)) queue.emplace(by_confidence(nid), nid);
    }
    map.update_translation_normalizer();

    // stage 2: non-keyframes against their top-k closest keyframes
    for (const RegisteredFrame& frame : map.frames) {
      if (map.has_keyframe(frame.frame_id)) continue;
      std::vector<std::pair<double, int>> closest;
      for (const KeyframeRecord& kf : map.keyframes)
        closest.emplace_back(pose_distance(frame.pose, kf.pose, params), kf.frame_id);
      std::sort(closest.begin(), closest.end());
      closest.resize(std::min<size_t>(closest.size(), cfg_.top_k));
      if (closest.empty()) continue;

      // anchor at the nearest keyframe so the map side is re-expressible
      std::vector<int> window_ids;
      for (const auto& [d, nid] : closest) window_ids.push_back(nid);
      window_ids.push_back(frame.frame_id);

      WindowPrediction window = predictor_.predict(window_ids);
      ++result.predictor_calls;
      try {
        std::vector<int> shared(window_ids.begin(), window_ids.end() - 1);
        const Sim3 to_global = align_coordinates(map, window, shared);
        const WindowPrediction global_window = transform_window(window, to_global);
        // re-fuse the non-keyframe pose: running average with the old pose
        for (const FramePrediction& f : global_window.frames) {
          if (f.frame_id != frame.frame_id) continue;
          RegisteredFrame& reg = map.frame(frame.frame_id);
          double cw = 0.0;
          for (int px = 0; px < f.pixel_count(); ++px)
            if (f.valid[px]) cw += f.confidence[px];
          if (cw > 0.0) {
            reg.pose.t = 0.5 * (reg.pose.t + f.pose.t);
            reg.pose.q = slerp(reg.pose.q, f.pose.q, 0.5);
          }
        }
      } catch (const std::invalid_argument&) {
      }
    }
  }

  const SfmConfig& config() const { return cfg_; }

 private:
  static std::vector<int> to_frame_ids(const std::vector<int>& members,
                                       const std::vector<int>& image_ids) {
    std::vector<int> ids;
    ids.reserve(members.size());
    for (int m : members) ids.push_back(image_ids[m]);
    return ids;
  }

  static double cluster_confidence(const WindowPrediction& w) {
    std::vector<double> per_frame;
    for (const FramePrediction& f : w.frames) per_frame.push_back(frame_median_confidence(f));
    double s = 0.0;
    for (double c : per_frame) s += c;
    return per_frame.empty() ? 0.0 : s / per_frame.size();
  }

  // mean frame confidence over the cluster's own members only
  static double cluster_confidence(const WindowPrediction& w, const std::vector<int>& members,
                                   const std::vector<int>& image_ids) {
    std::set<int> ids;
    for (int m : members) ids.insert(image_ids[m]);
    double s = 0.0;
    int n = 0;
    for (const FramePrediction& f : w.frames)
      if (ids.count(f.frame_id)) {
        s += frame_median_confidence(f);
        ++n;
      }
    return n > 0 ? s / n : 0.0;
  }

  void bootstrap_map(GlobalMap& map, const WindowPrediction& window) {
    map.metric_factor = window_metric_factor(window);
    for (const FramePrediction& f : window.frames) map.register_frame(f.frame_id, f.pose);
    admit_cluster_keyframes(map, window);
    map.update_translation_normalizer();
  }

  void admit_cluster_keyframes(GlobalMap& map, const WindowPrediction& window) {
    const PoseDistanceParams params = map.distance_params(cfg_.lambda);
    std::vector<KeyframeCandidate> candidates;
    for (const FramePrediction& f : window.frames) {
      if (map.has_keyframe(f.frame_id)) continue;
      candidates.push_back({f.frame_id, f.pose, frame_median_confidence(f)});
    }
    std::vector<Sim3> existing;
    for (const KeyframeRecord& kf : map.keyframes) existing.push_back(kf.pose);
    for (int id : select_keyframes(candidates, existing, vo_cfg_, params)) {
      for (const FramePrediction& f : window.frames) {
        if (f.frame_id != id) continue;
        KeyframeRecord rec;
        rec.frame_id = id;
        rec.height = f.height;
        rec.width = f.width;
        rec.points = f.pointmap;
        rec.confidence = f.confidence;
        rec.valid = f.valid;
        rec.pose = f.pose;
        rec.descriptor = f.descriptor;
        map.add_keyframe(std::move(rec));
        break;
      }
    }
  }

  // Minimum whitened distance between the cluster's members and the map's
  // keyframe descriptors.
  double cluster_to_keyframes_distance(const ClusterSet& clusters,
                                       const ImageDescriptorSet& white, int cluster,
                                       const std::vector<int>& image_ids,
                                       const GlobalMap& map) const {
    double best = std::numeric_limits<double>::infinity();
    for (int member : clusters.clusters[cluster]) {
      for (const KeyframeRecord& kf : map.keyframes) {
        // keyframe descriptor in whitened space: find its row
        const auto it = std::find(image_ids.begin(), image_ids.end(), kf.frame_id);
        if (it == image_ids.end()) continue;
        const Eigen::Index row = std::distance(image_ids.begin(), it);
        best = std::min(best,
                        (white.descriptors.row(member) - white.descriptors.row(row)).norm());
      }
    }
    return best;
  }

  // Predicts the cluster against keyframe memory. With more keyframes than
  // n_kmax the keyframes are FPS-partitioned by pose distance and the
  // cluster is mapped against the top-k nearest sub-clusters; the best
  // alignable attempt wins. Returns the raw window plus its local-to-global
  // transform, or nothing when no attempt aligns.
  std::optional<std::pair<WindowPrediction, Sim3>> map_cluster_against_keyframes(
      GlobalMap& map, const std::vector<int>& members, const std::vector<int>& image_ids,
      const ImageDescriptorSet& white) {
    const std::vector<int> cluster_ids = to_frame_ids(members, image_ids);
    std::vector<std::vector<int>> memory_sets;

    if (static_cast<int>(map.keyframes.size()) <= cfg_.n_kmax) {
      std::vector<int> all;
      for (const KeyframeRecord& kf : map.keyframes) all.push_back(kf.frame_id);
      memory_sets.push_back(order_memory(map, all));
    } else {
      const std::vector<std::vector<int>> subs = partition_keyframes(map);
      // rank sub-clusters by feature distance to the cluster
      std::vector<std::pair<double, int>> ranked;
      for (size_t si = 0; si < subs.size(); ++si) {
        double best = std::numeric_limits<double>::infinity();
        for (int kf_id : subs[si]) {
          const auto it = std::find(image_ids.begin(), image_ids.end(), kf_id);
          if (it == image_ids.end()) continue;
          const Eigen::Index row = std::distance(image_ids.begin(), it);
          for (int member : members)
            best = std::min(best,
                            (white.descriptors.row(member) - white.descriptors.row(row)).norm());
        }
        ranked.emplace_back(best, static_cast<int>(si));
      }
      std::sort(ranked.begin(), ranked.end());
      for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(cfg_.top_k); ++i)
        memory_sets.push_back(order_memory(map, subs[ranked[i].second]));
    }

    double best_conf = -1.0;
    std::optional<std::pair<WindowPrediction, Sim3>> best;
    for (const std::vector<int>& memory : memory_sets) {
      std::vector<int> request = memory;
      for (int id : cluster_ids) request.push_back(id);
      WindowPrediction window = predictor_.predict(request);
      try {
        const Sim3 to_global = align_coordinates(map, window, memory);
        const double conf = cluster_confidence(window, members, image_ids);
        if (conf > best_conf) {
          best_conf = conf;
          best = std::make_pair(std::move(window), to_global);
        }
      } catch (const std::invalid_argument&) {
      }
    }
    return best;
  }

  // FPS partition of the keyframe list by pose distance into
  // ceil(K / n_kmax) groups.
  std::vector<std::vector<int>> partition_keyframes(const GlobalMap& map) const {
    const int k = static_cast<int>(map.keyframes.size());
    const int groups = (k + cfg_.n_kmax - 1) / cfg_.n_kmax;
    const PoseDistanceParams params = map.distance_params(cfg_.lambda);

    Eigen::MatrixXd pairwise(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        pairwise(i, j) =
            pose_distance(map.keyframes[i].pose, map.keyframes[j].pose, params);

    const std::vector<int> seeds = detail::farthest_point_sample(
        k, groups,
        [&](int i) {
          double s = 0.0;
          for (int j = 0; j < k; ++j) s += pairwise(i, j);
          return s;
        },
        pairwise);

    std::vector<std::vector<int>> result(seeds.size());
    for (int i = 0; i < k; ++i) {
      int best = 0;
      for (size_t s = 1; s < seeds.size(); ++s)
        if (pairwise(i, seeds[s]) < pairwise(i, seeds[best])) best = static_cast<int>(s);
      result[best].push_back(map.keyframes[i].frame_id);
    }
    std::erase_if(result, [](const std::vector<int>& g) { return g.empty(); });
    return result;
  }

  // Memory order for prediction: the member with minimal summed pose
  // distance anchors the window.
  std::vector<int> order_memory(const GlobalMap& map, std::vector<int> ids) const {
    if (ids.size() <= 1) return ids;
    const PoseDistanceParams params = map.distance_params(cfg_.lambda);
    int anchor = ids.front();
    double best = std::numeric_limits<double>::infinity();
    for (int id : ids) {
      double s = 0.0;
      for (int other : ids)
        if (other != id)
          s += pose_distance(map.keyframe(id).pose, map.keyframe(other).pose, params);
      if (s < best || (s == best && id < anchor)) {
        best = s;
        anchor = id;
      }
    }
    std::vector<int> ordered = {anchor};
    for (int id : ids)
      if (id != anchor) ordered.push_back(id);
    return ordered;
  }

  void note_frames(SfmResult& result, const WindowPrediction& window, int cluster) {
    for (const FramePrediction& f : window.frames) {
      auto it = std::find_if(result.frames.begin(), result.frames.end(),
                             [&](const SfmFrameStatus& s) { return s.frame_id == f.frame_id; });
      const double conf = frame_median_confidence(f);
      if (it == result.frames.end()) {
        result.frames.push_back({f.frame_id, cluster, true, conf});
      } else if (conf > it->confidence) {
        it->confidence = conf;
      }
    }
  }

  // Frames whose confidence sits strictly below the run quantile are marked
  // unregistered and retried once against the finished keyframe map.
  void retry_low_confidence(SfmResult& result) {
    if (result.frames.empty()) return;
    std::vector<double> confs;
    for (const SfmFrameStatus& s : result.frames) confs.push_back(s.confidence);
    std::sort(confs.begin(), confs.end());
    const size_t idx =
        static_cast<size_t>(cfg_.registration_quantile * (confs.size() - 1));
    const double threshold = confs[idx];

    for (SfmFrameStatus& s : result.frames) {
      if (!s.registered) continue;
      if (s.confidence >= threshold) continue;
      if (result.map.has_keyframe(s.frame_id)) continue;
      // deferred: drop from the coarse result and retry against the map
      s.registered = false;
      ++result.deferred_count;
      const PoseDistanceParams params = result.map.distance_params(cfg_.lambda);
      if (!result.map.has_frame(s.frame_id)) continue;
      std::vector<std::pair<double, int>> closest;
      const Sim3 pose = result.map.frame(s.frame_id).pose;
      for (const KeyframeRecord& kf : result.map.keyframes)
        closest.emplace_back(pose_distance(pose, kf.pose, params), kf.frame_id);
      std::sort(closest.begin(), closest.end());
      closest.resize(std::min<size_t>(closest.size(), cfg_.top_k));
      std::vector<int> ids;
      for (const auto& [d, nid] : closest) ids.push_back(nid);
      ids.push_back(s.frame_id);
      WindowPrediction window = predictor_.predict(ids);
      ++result.predictor_calls;
      try {
        std::vector<int> shared(ids.begin(), ids.end() - 1);
        const Sim3 to_global = align_coordinates(result.map, window, shared);
        const WindowPrediction global_window = transform_window(window, to_global);
        for (const FramePrediction& f : global_window.frames)
          if (f.frame_id == s.frame_id) {
            result.map.frame(s.frame_id).pose = f.pose;
            s.confidence = frame_median_confidence(f);
            s.registered = true;
          }
      } catch (const std::invalid_argument&) {
        s.registered = false;
      }
    }
  }

  void collect_unregistered(SfmResult& result) {
    std::sort(result.frames.begin(), result.frames.end(),
              [](const SfmFrameStatus& a, const SfmFrameStatus& b) {
                return a.frame_id < b.frame_id;
              });
    for (const SfmFrameStatus& s : result.frames)
      if (!s.registered) result.unregistered.push_back(s.frame_id);
  }

  Predictor& predictor_;
  SfmConfig cfg_;
  VoConfig vo_cfg_;
};

}  // namespace voxrec
