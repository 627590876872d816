#pragma once

// Keyframe-memory visual odometry: windowed mapping against active
// keyframes, robust window-to-map scale, weighted-average coordinate
// alignment, running-average fusion, greedy keyframe selection, active-set
// resampling, and optional backend refinement with self-consistency
// blending. The pipeline owns all mutable state and processes windows
// strictly sequentially.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "voxrec/geometry.hpp"
#include "voxrec/map.hpp"
#include "voxrec/prediction.hpp"
#include "voxrec/scale.hpp"
#include "voxrec/voxel_grid.hpp"

namespace voxrec {

struct VoConfig {
  double eta_d = 0.15;  // min pose distance for new keyframes
  int window_size = 8;  // new frames per mapping window
  int max_active = 10;  // resample once the active set reaches this
  int min_active = 7;   // resampled active-set size
  double eta_b = 0.4;   // backward search window for loop keyframes
  double eta_max = 1.2; // max pose spread the memory may cover
  int n_topk = 3;       // keyframes nearest to the last one
  int n_old = 3;        // earliest keyframes admitted through eta_b
  double lambda = 1.0;  // translation weight in the pose distance

  std::string backend_mode = "auto";  // off | auto | always
  double backend_quantile = 0.3;      // trigger when below this history quantile
  double blend_margin = 2.0;          // sigma ratio that switches sources hard
  double voxel_size = 0.01;
  CurveKind curve = CurveKind::morton;
  std::string processor = "identity";  // identity | moving_average
  int knn_k = 3;

  void validate() const {
    auto positive = [](double v, const char* key) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("invariant violation: ") + key);
    };
    positive(eta_d, "eta_d");
    positive(eta_b, "eta_b");
    positive(eta_max, "eta_max");
    positive(voxel_size, "voxel_size");
    positive(backend_quantile, "backend_quantile");
    positive(blend_margin, "blend_margin");
    if (lambda < 0.0) throw std::invalid_argument("invariant violation: lambda");
    if (window_size < 1) throw std::invalid_argument("invariant violation: window_size");
    if (min_active > max_active) throw std::invalid_argument("invariant violation: min_active");
    if (n_topk < 0 || n_old < 0) throw std::invalid_argument("invariant violation: n_topk");
    if (knn_k < 1) throw std::invalid_argument("invariant violation: knn_k");
    if (backend_mode != "off" && backend_mode != "auto" && backend_mode != "always")
      throw std::invalid_argument("invariant violation: backend_mode");
    if (processor != "identity" && processor != "moving_average")
      throw std::invalid_argument("invariant violation: processor");
  }

  std::unique_ptr<SequenceProcessor> make_processor() const {
    if (processor == "moving_average") return std::make_unique<MovingAverageProcessor>();
    return std::make_unique<IdentityProcessor>();
  }
};

// ---------------------------------------------------------------------------
// window-to-map alignment

// Re-expresses the map keyframe pointmaps in the window anchor's camera
// frame and solves the robust scale s_w such that s_w * window ~ map.
// Pairs are weighted by min(map confidence, window confidence).
inline double estimate_window_scale(const GlobalMap& map, const WindowPrediction& window,
                                    const std::vector<int>& shared_keyframes) {
  const int k0 = window.anchor().frame_id;
  if (!map.has_frame(k0)) throw std::invalid_argument("anchor not in map");
  const Sim3 to_local = inverse(map.final_pose(k0));

  Correspondences c;
  for (int id : shared_keyframes) {
    if (!map.has_keyframe(id)) continue;
    const KeyframeRecord& rec = map.keyframe(id);
    const FramePrediction* fw = nullptr;
    for (const FramePrediction& f : window.frames)
      if (f.frame_id == id) {
        fw = &f;
        break;
      }
    if (fw == nullptr) continue;
    for (int px = 0; px < fw->pixel_count(); ++px) {
      if (!fw->valid[px] || !rec.valid[px]) continue;
      c.src.push_back(fw->pointmap[px]);
      c.dst.push_back(to_local.apply(rec.points[px]));
      c.ws.push_back(std::min(rec.confidence[px], fw->confidence[px]));
    }
  }
  if (c.src.empty()) throw std::invalid_argument("scale unobservable");
  return roe_scale(c);
}

// Combined local-to-global similarity: per shared keyframe the relative pose
// between its map pose and its scale-corrected window pose, averaged with
// window scalar confidences (weighted quaternion mean + weighted translation
// mean). The returned Sim3 carries s_w as its scale.
inline Sim3 align_coordinates(const GlobalMap& map, const WindowPrediction& window,
                              const std::vector<int>& shared_keyframes) {
  const double s_w = estimate_window_scale(map, window, shared_keyframes);

  std::vector<Quat> rotations;
  std::vector<Vec3> translations;
  std::vector<double> weights;
  for (int id : shared_keyframes) {
    if (!map.has_keyframe(id)) continue;
    for (const FramePrediction& f : window.frames) {
      if (f.frame_id != id) continue;
      Sim3 local_scaled;
      local_scaled.q = f.pose.q;
      local_scaled.t = s_w * f.pose.t;
      const Sim3 rel = compose(map.keyframe(id).pose, inverse(local_scaled));
      double cw = 0.0;
      for (int px = 0; px < f.pixel_count(); ++px)
        if (f.valid[px]) cw += f.confidence[px];
      rotations.push_back(rel.q);
      translations.push_back(rel.t);
      weights.push_back(cw);
      break;
    }
  }
  if (rotations.empty()) throw std::invalid_argument("scale unobservable");

  Sim3 out;
  out.q = weighted_quat_mean(rotations, weights);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (wsum <= 0.0) throw std::invalid_argument("degenerate weights");
  Vec3 t = Vec3::Zero();
  for (size_t i = 0; i < translations.size(); ++i) t += weights[i] * translations[i];
  out.t = t / wsum;
  out.s = s_w;
  return out;
}

// Applies the local-to-global similarity to every frame of a window: points
// and poses move to global coordinates, depths pick up the scale.
inline WindowPrediction transform_window(const WindowPrediction& window, const Sim3& a) {
  WindowPrediction out = window;
  for (FramePrediction& f : out.frames) {
    for (Vec3& p : f.pointmap) p = a.apply(p);
    for (double& d : f.depth) d *= a.s;
    Sim3 pose;
    pose.q = a.q * f.pose.q;
    pose.t = a.apply(f.pose.t);
    f.pose = pose;
  }
  return out;
}

// ---------------------------------------------------------------------------
// fusion (running averages)

// Fuses a window already expressed in global coordinates into the map:
// per-pixel pointmap and confidence running averages for shared keyframes,
// scalar-confidence updates of the metric factor, keyframe translation and
// slerp rotation, and pose registration for frames not yet in the map.
// s_w is the window-to-map scale the transform applied; since depths were
// scaled by it, the transformed window's metric factor already equals
// m_w / s_w and enters the metric update directly.
inline void fuse_window(GlobalMap& map, const WindowPrediction& window, double s_w) {
  (void)s_w;  // retained in the metric factor through the scaled depths
  std::vector<double> frame_scales;
  for (const FramePrediction& f : window.frames) {
    bool any_valid = false;
    for (uint8_t v : f.valid) any_valid = any_valid || v != 0;
    if (any_valid) frame_scales.push_back(frame_metric_scale(f));
  }
  // all-invalid windows never reach a scalar update (ckw stays 0 below)
  const double m_w_over_s_w =
      frame_scales.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : metric_factor_from_frames(frame_scales);

  for (const FramePrediction& f : window.frames) {
    if (!map.has_keyframe(f.frame_id)) {
      map.register_frame(f.frame_id, f.pose);
      continue;
    }
    KeyframeRecord& rec = map.keyframe(f.frame_id);
    if (static_cast<int>(rec.points.size()) != f.pixel_count())
      throw std::invalid_argument("keyframe resolution mismatch");

    const double ck = rec.scalar_confidence();
    double ckw = 0.0;
    for (int px = 0; px < f.pixel_count(); ++px)
      if (f.valid[px]) ckw += f.confidence[px];
    if (ckw <= 0.0) continue;  // zero-weight update leaves the map unchanged

    // per-pixel running average; pixels valid in one source copy that source
    for (int px = 0; px < f.pixel_count(); ++px) {
      const bool in_map = rec.valid[px] != 0;
      const bool in_window = f.valid[px] != 0;
      if (in_map && in_window) {
        const double cm = rec.confidence[px];
        const double cw = f.confidence[px];
        rec.points[px] = (cm * rec.points[px] + cw * f.pointmap[px]) / (cm + cw);
        rec.confidence[px] = cm + cw;
      } else if (in_window) {
        rec.points[px] = f.pointmap[px];
        rec.confidence[px] = f.confidence[px];
        rec.valid[px] = 1;
      }
    }

    if (ck > 0.0) {
      map.metric_factor = (ck * map.metric_factor + ckw * m_w_over_s_w) / (ck + ckw);
      rec.pose.t = (ck * rec.pose.t + ckw * f.pose.t) / (ck + ckw);
      rec.pose.q = slerp(rec.pose.q, f.pose.q, ckw / (ck + ckw));
      map.register_frame(f.frame_id, rec.pose);
    } else {
      map.metric_factor = m_w_over_s_w;
      rec.pose = f.pose;
      map.register_frame(f.frame_id, rec.pose);
    }
  }
}

// ---------------------------------------------------------------------------
// keyframe selection and active-set management

struct KeyframeCandidate {
  int frame_id = -1;
  Sim3 pose;
  double confidence = 0.0;  // frame confidence: median valid pixel confidence
};

// Greedy selection: among candidates farther than eta_d from every current
// keyframe, repeatedly admit the highest-confidence one (ties by lower id);
// admitted frames immediately constrain the rest.
inline std::vector<int> select_keyframes(const std::vector<KeyframeCandidate>& candidates,
                                         std::vector<Sim3> keyframe_poses, const VoConfig& cfg,
                                         const PoseDistanceParams& params) {
  std::vector<int> chosen;
  std::vector<bool> used(candidates.size(), false);
  for (;;) {
    int best = -1;
    for (size_t i = 0; i < candidates.size(); ++i) {
      if (used[i]) continue;
      bool eligible = true;
      for (const Sim3& kf : keyframe_poses)
        if (pose_distance(candidates[i].pose, kf, params) <= cfg.eta_d) {
          eligible = false;
          break;
        }
      if (!eligible) continue;
      if (best < 0 || candidates[i].confidence > candidates[best].confidence ||
          (candidates[i].confidence == candidates[best].confidence &&
           candidates[i].frame_id < candidates[best].frame_id))
        best = static_cast<int>(i);
    }
    if (best < 0) break;
    used[best] = true;
    chosen.push_back(candidates[best].frame_id);
    keyframe_poses.push_back(candidates[best].pose);
  }
  return chosen;
}

struct ActiveSetResult {
  std::vector<int> active;               // anchor first
  std::vector<int> backward_window_ids;  // members admitted through eta_b
  int last_keyframe = -1;                // always preserved in the set
};

inline bool need_resample(const GlobalMap& map, const std::vector<int>& active,
                          const VoConfig& cfg, const PoseDistanceParams& params) {
  if (static_cast<int>(active.size()) >= cfg.max_active) return true;
  for (size_t i = 0; i < active.size(); ++i)
    for (size_t j = i + 1; j < active.size(); ++j)
      if (pose_distance(map.keyframe(active[i]).pose, map.keyframe(active[j]).pose, params) >
          cfg.eta_max)
        return true;
  return false;
}

// Resample from ALL historical keyframes: the last keyframe, the n_topk
// nearest to it, and up to n_old of the earliest keyframes inside the
// backward window eta_b. The member with minimal summed pose distance to the
// others becomes the anchor (first). Members are pruned (farthest summed
// distance first) until the pairwise spread fits eta_max.
inline ActiveSetResult manage_active_set(const GlobalMap& map, const VoConfig& cfg,
                                         const PoseDistanceParams& params) {
  if (map.keyframes.empty()) return {};
  ActiveSetResult result;
  const int last_id = map.keyframes.back().frame_id;
  result.last_keyframe = last_id;
  const Sim3& last_pose = map.keyframes.back().pose;

  std::vector<int> picked = {last_id};
  auto already = [&](int id) {
    return std::find(picked.begin(), picked.end(), id) != picked.end();
  };

  std::vector<std::pair<double, int>> by_dist;
  for (const KeyframeRecord& kf : map.keyframes) {
    if (kf.frame_id == last_id) continue;
    by_dist.emplace_back(pose_distance(kf.pose, last_pose, params), kf.frame_id);
  }
  std::sort(by_dist.begin(), by_dist.end());
  for (int i = 0; i < cfg.n_topk && i < static_cast<int>(by_dist.size()); ++i)
    picked.push_back(by_dist[i].second);

  int added_old = 0;
  for (const KeyframeRecord& kf : map.keyframes) {  // earliest first
    if (added_old >= cfg.n_old) break;
    if (already(kf.frame_id)) continue;
    if (pose_distance(kf.pose, last_pose, params) <= cfg.eta_b) {
      picked.push_back(kf.frame_id);
      result.backward_window_ids.push_back(kf.frame_id);
      ++added_old;
    }
  }

  if (static_cast<int>(picked.size()) > cfg.min_active) picked.resize(cfg.min_active);

  auto summed = [&](int id) {
    double s = 0.0;
    for (int other : picked)
      if (other != id)
        s += pose_distance(map.keyframe(id).pose, map.keyframe(other).pose, params);
    return s;
  };

  // enforce the eta_max spread contract; the last keyframe always survives
  while (picked.size() > 2) {
    double max_pairwise = 0.0;
    for (size_t i = 0; i < picked.size(); ++i)
      for (size_t j = i + 1; j < picked.size(); ++j)
        max_pairwise = std::max(max_pairwise, pose_distance(map.keyframe(picked[i]).pose,
                                                            map.keyframe(picked[j]).pose, params));
    if (max_pairwise <= cfg.eta_max) break;
    int worst = -1;
    double worst_sum = -1.0;
    for (int id : picked) {
      if (id == last_id) continue;
      const double s = summed(id);
      if (s > worst_sum) {
        worst_sum = s;
        worst = id;
      }
    }
    picked.erase(std::remove(picked.begin(), picked.end(), worst), picked.end());
  }

  int anchor = picked.front();
  double best = std::numeric_limits<double>::infinity();
  for (int id : picked) {
    const double s = summed(id);
    if (s < best || (s == best && id < anchor)) {
      best = s;
      anchor = id;
    }
  }
  std::vector<int> ordered = {anchor};
  for (int id : picked)
    if (id != anchor) ordered.push_back(id);
  result.active = std::move(ordered);

  // drop backward-window entries that were pruned again
  std::erase_if(result.backward_window_ids,
                [&](int id) { return std::find(result.active.begin(), result.active.end(), id) ==
                                     result.active.end(); });
  return result;
}

// ---------------------------------------------------------------------------
// backend data path and robust blending

// Runs the sparse-voxel path over a window: pool per-pixel points into the
// grid (positions double as backend features), serialize along the curve,
// apply the pluggable processor, unserialize, and interpolate per-pixel
// features back. Returns the refined window; poses and confidences are
// reused from the front-end.
inline WindowPrediction backend_refine(const WindowPrediction& front, const VoConfig& cfg) {
  PointFeatureCloud cloud;
  for (size_t fi = 0; fi < front.frames.size(); ++fi) {
    const FramePrediction& f = front.frames[fi];
    for (int px = 0; px < f.pixel_count(); ++px) {
      if (!f.valid[px]) continue;
      cloud.positions.push_back(f.pointmap[px]);
      cloud.source.emplace_back(static_cast<int>(fi), px);
    }
  }
  cloud.features.resize(cloud.positions.size(), 3);
  for (size_t i = 0; i < cloud.positions.size(); ++i)
    cloud.features.row(i) = cloud.positions[i].transpose();
  if (cloud.positions.empty()) return front;

  const SparseVoxelGrid grid = voxelize(cloud, cfg.voxel_size);
  const SerializedGrid seq = serialize(grid, cfg.curve);
  const Eigen::MatrixXd processed = process_serialized(seq, *cfg.make_processor());
  SparseVoxelGrid refined = grid;
  refined.features = unserialize(seq, processed);

  const Eigen::MatrixXd interp = knn_interpolate(cloud.positions, refined, cfg.knn_k);

  WindowPrediction back = front;
  for (size_t i = 0; i < cloud.positions.size(); ++i) {
    FramePrediction& f = back.frames[cloud.source[i].first];
    const int px = cloud.source[i].second;
    const Vec3 p = interp.row(i).transpose();
    f.pointmap[px] = p;
    f.depth[px] = std::max(inverse(f.pose).apply(p).z(), 1e-9);
  }
  return back;
}

// Per-pixel self-consistency: deviation between the raw pointmap and the
// pointmap unprojected from depth + pose, relative to depth.
inline double self_consistency_sigma(const FramePrediction& f, int px) {
  return (f.pointmap[px] - f.unproject(px)).norm() / f.depth[px];
}

// Chooses per pixel between front and backend: the lower-sigma source when
// they disagree by more than blend_margin, otherwise a confidence-weighted
// blend. Absent backend returns the front unchanged.
inline WindowPrediction robust_blend(const WindowPrediction& front,
                                     const WindowPrediction* back, const VoConfig& cfg) {
  if (back == nullptr) return front;
  WindowPrediction out = front;
  for (size_t fi = 0; fi < front.frames.size(); ++fi) {
    const FramePrediction& ff = front.frames[fi];
    const FramePrediction& fb = back->frames[fi];
    FramePrediction& fo = out.frames[fi];
    for (int px = 0; px < ff.pixel_count(); ++px) {
      if (!ff.valid[px] || !fb.valid[px]) continue;
      const double sf = self_consistency_sigma(ff, px);
      const double sb = self_consistency_sigma(fb, px);
      const double lo = std::min(sf, sb);
      const double hi = std::max(sf, sb);
      if (hi > cfg.blend_margin * lo + 1e-15) {
        if (sb < sf) {
          fo.pointmap[px] = fb.pointmap[px];
          fo.depth[px] = fb.depth[px];
          fo.confidence[px] = fb.confidence[px];
        }
        // front already in place otherwise
      } else {
        const double cf = ff.confidence[px];
        const double cb = fb.confidence[px];
        const Vec3 blended = (cf * ff.pointmap[px] + cb * fb.pointmap[px]) / (cf + cb);
        if (blended != ff.pointmap[px]) {
          fo.pointmap[px] = blended;
          fo.depth[px] = std::max(inverse(ff.pose).apply(blended).z(), 1e-9);
          fo.confidence[px] = 0.5 * (cf + cb);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

class VoPipeline {
 public:
  struct ResampleEvent {
    std::vector<int> active;
    std::vector<int> backward_window_ids;
    int last_keyframe = -1;
    double max_pairwise = 0.0;
  };
  struct WindowStats {
    std::vector<int> frames;
    double s_w = 1.0;
    double median_confidence = 0.0;
    double normalizer = 0.0;
    bool backend_used = false;
    bool rejected = false;
  };

  VoPipeline(Predictor& predictor, VoConfig cfg) : predictor_(predictor), cfg_(std::move(cfg)) {
    cfg_.validate();
  }

  // Feeds frames through the pipeline in mapping windows of window_size.
  void run(const std::vector<int>& frame_ids) {
    for (size_t i = 0; i < frame_ids.size(); i += cfg_.window_size) {
      const size_t end = std::min(frame_ids.size(), i + cfg_.window_size);
      process_window({frame_ids.begin() + i, frame_ids.begin() + end});
    }
  }

  void process_window(const std::vector<int>& new_frames) {
    if (new_frames.empty()) return;
    if (static_cast<int>(new_frames.size()) > cfg_.window_size)
      throw std::invalid_argument("window exceeds window_size");

    std::vector<int> request = active_;
    for (int id : new_frames) request.push_back(id);

    WindowPrediction front = predictor_.predict(request);

    WindowStats stats;
    stats.frames = request;
    stats.normalizer = front.normalizer;
    stats.median_confidence = window_median_confidence(front);

    WindowPrediction window = front;
    if (backend_triggered(stats.median_confidence)) {
      const WindowPrediction back = backend_refine(front, cfg_);
      window = robust_blend(front, &back, cfg_);
      stats.backend_used = true;
    }
    confidence_history_.push_back(stats.median_confidence);

    if (map_.empty()) {
      bootstrap(window, stats);
    } else {
      integrate(window, new_frames, stats);
    }

    map_.normalizer_history.push_back(front.normalizer);
    window_stats_.push_back(std::move(stats));
  }

  const GlobalMap& map() const { return map_; }
  GlobalMap& map() { return map_; }
  const std::vector<int>& active_keyframes() const { return active_; }
  const std::vector<ResampleEvent>& resample_events() const { return resample_events_; }
  const std::vector<WindowStats>& window_stats() const { return window_stats_; }
  const VoConfig& config() const { return cfg_; }

 private:
  bool backend_triggered(double median_confidence) const {
    if (cfg_.backend_mode == "always") return true;
    if (cfg_.backend_mode == "off") return false;
    if (confidence_history_.size() < 4) return false;
    std::vector<double> sorted = confidence_history_;
    std::sort(sorted.begin(), sorted.end());
    const size_t idx = static_cast<size_t>(cfg_.backend_quantile * (sorted.size() - 1));
    return median_confidence < sorted[idx];
  }

  void bootstrap(const WindowPrediction& window, WindowStats& stats) {
    stats.s_w = 1.0;
    map_.metric_factor = window_metric_factor(window);
    for (const FramePrediction& f : window.frames) map_.register_frame(f.frame_id, f.pose);
    admit_keyframes(window);
    map_.update_translation_normalizer();
    finish_active_set();
  }

  void integrate(const WindowPrediction& window, const std::vector<int>& new_frames,
                 WindowStats& stats) {
    Sim3 to_global;
    try {
      to_global = align_coordinates(map_, window, active_);
    } catch (const std::invalid_argument&) {
      reject_window(new_frames, stats);
      return;
    }
    stats.s_w = to_global.s;

    const WindowPrediction global_window = transform_window(window, to_global);
    fuse_window(map_, global_window, to_global.s);
    admit_keyframes(global_window, &new_frames);
    map_.update_translation_normalizer();
    finish_active_set();
  }

  // Creates keyframe records for the frames picked by the greedy rule.
  void admit_keyframes(const WindowPrediction& window,
                       const std::vector<int>* only_ids = nullptr) {
    const PoseDistanceParams params = map_.distance_params(cfg_.lambda);
    std::vector<KeyframeCandidate> candidates;
    for (const FramePrediction& f : window.frames) {
      if (map_.has_keyframe(f.frame_id)) continue;
      if (only_ids != nullptr &&
          std::find(only_ids->begin(), only_ids->end(), f.frame_id) == only_ids->end())
        continue;
      candidates.push_back({f.frame_id, f.pose, frame_median_confidence(f)});
    }
    std::vector<Sim3> existing;
    for (const KeyframeRecord& kf : map_.keyframes) existing.push_back(kf.pose);
    const std::vector<int> chosen = select_keyframes(candidates, existing, cfg_, params);

    for (int id : chosen) {
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
        map_.add_keyframe(std::move(rec));
        active_.push_back(id);
        break;
      }
    }
  }

  void finish_active_set() {
    const PoseDistanceParams params = map_.distance_params(cfg_.lambda);
    if (!need_resample(map_, active_, cfg_, params)) return;
    const ActiveSetResult result = manage_active_set(map_, cfg_, params);
    if (result.active.empty()) return;
    active_ = result.active;

    ResampleEvent event;
    event.active = result.active;
    event.backward_window_ids = result.backward_window_ids;
    event.last_keyframe = result.last_keyframe;
    for (size_t i = 0; i < active_.size(); ++i)
      for (size_t j = i + 1; j < active_.size(); ++j)
        event.max_pairwise = std::max(
            event.max_pairwise,
            pose_distance(map_.keyframe(active_[i]).pose, map_.keyframe(active_[j]).pose, params));
    resample_events_.push_back(std::move(event));
  }

  // Scale-unobservable windows: constant-velocity extrapolation, flagged.
  void reject_window(const std::vector<int>& new_frames, WindowStats& stats) {
    stats.rejected = true;
    Sim3 delta;  // identity when there is no motion history
    if (map_.frames.size() >= 2) {
      const Sim3& a = map_.frames[map_.frames.size() - 2].pose;
      const Sim3& b = map_.frames.back().pose;
      delta = compose(inverse(a), b);
    }
    Sim3 pose = map_.frames.empty() ? Sim3::identity() : map_.frames.back().pose;
    for (int id : new_frames) {
      pose = compose(pose, delta);
      map_.register_frame(id, pose, true);
    }
  }

  Predictor& predictor_;
  VoConfig cfg_;
  GlobalMap map_;
  std::vector<int> active_;
  std::vector<double> confidence_history_;
  std::vector<ResampleEvent> resample_events_;
  std::vector<WindowStats> window_stats_;
};

}  // namespace voxrec
