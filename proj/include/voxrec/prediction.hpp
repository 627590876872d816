#pragma once

// The pointmap-predictor contract. A predictor maps an ordered list of frame
// handles to per-frame pointmaps expressed in the FIRST listed frame's camera
// coordinates, normalized so the median distance of valid points from the
// origin is 1. Implementations: the synthetic oracle (oracle.hpp) and the
// file-exchange seam for external models (exchange.hpp).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "voxrec/geometry.hpp"
#include "voxrec/scale.hpp"

namespace voxrec {

struct FramePrediction {
  int frame_id = -1;
  int height = 0;
  int width = 0;
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;  // pinhole intrinsics, pixels

  std::vector<Vec3> pointmap;      // h*w, reference-frame coordinates
  std::vector<double> depth;       // h*w, z-depth in the frame's own camera
  std::vector<double> confidence;  // h*w, positive where valid
  std::vector<uint8_t> valid;      // h*w
  Sim3 pose;                       // camera-to-reference, s = 1
  double metric_log_depth = 0.0;   // log metric depth at the median-depth pixel
  Eigen::VectorXd descriptor;      // viewpoint embedding for clustering

  int pixel_count() const { return height * width; }

  // Unnormalized camera ray through the center of pixel index px (z = 1).
  Vec3 pixel_ray(int px) const {
    const int u = px % width;
    const int v = px / width;
    return Vec3((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0);
  }

  // Pointmap implied by depth + pose, used for self-consistency scoring.
  Vec3 unproject(int px) const { return pose.apply(depth[px] * pixel_ray(px)); }
};

struct WindowPrediction {
  std::vector<FramePrediction> frames;
  double normalizer = 1.0;  // median point distance divided out of the output

  const FramePrediction& anchor() const { return frames.front(); }
};

// The frame's "median predicted depth" names an actual pixel: the lower
// median (order statistic at (n-1)/2) of valid depths, ties by pixel index.
inline int median_depth_pixel(const FramePrediction& f) {
  std::vector<std::pair<double, int>> depths;
  depths.reserve(f.depth.size());
  for (int px = 0; px < f.pixel_count(); ++px)
    if (f.valid[px]) depths.emplace_back(f.depth[px], px);
  if (depths.empty()) throw std::runtime_error("frame has no valid pixels");
  const size_t mid = (depths.size() - 1) / 2;
  std::nth_element(depths.begin(), depths.begin() + mid, depths.end());
  return depths[mid].second;
}

// Per-frame metric scale estimate: exp(metric log depth) over the median
// predicted depth. The window metric factor is the median of these.
inline double frame_metric_scale(const FramePrediction& f) {
  return std::exp(f.metric_log_depth) / f.depth[median_depth_pixel(f)];
}

inline double window_metric_factor(const WindowPrediction& w) {
  std::vector<double> scales;
  scales.reserve(w.frames.size());
  for (const FramePrediction& f : w.frames) scales.push_back(frame_metric_scale(f));
  return metric_factor_from_frames(scales);
}

inline double frame_median_confidence(const FramePrediction& f) {
  std::vector<double> conf;
  conf.reserve(f.confidence.size());
  for (int px = 0; px < f.pixel_count(); ++px)
    if (f.valid[px]) conf.push_back(f.confidence[px]);
  if (conf.empty()) return 0.0;
  return median_of(std::move(conf));
}

inline double window_median_confidence(const WindowPrediction& w) {
  std::vector<double> conf;
  for (const FramePrediction& f : w.frames)
    for (int px = 0; px < f.pixel_count(); ++px)
      if (f.valid[px]) conf.push_back(f.confidence[px]);
  if (conf.empty()) return 0.0;
  return median_of(std::move(conf));
}

class Predictor {
 public:
  virtual ~Predictor() = default;

  // Frames of one mapping window, first frame anchoring the coordinates.
  virtual WindowPrediction predict(const std::vector<int>& frame_ids) = 0;

  virtual int num_frames() const = 0;

  // Whitened-space clustering input; available without running prediction.
  virtual Eigen::VectorXd frame_descriptor(int frame_id) = 0;
};

}  // namespace voxrec
