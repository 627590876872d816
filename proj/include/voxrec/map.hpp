#pragma once

// Global map state shared by the VO and SfM pipelines: fused keyframe
// geometry, registered frame poses, and the metric factor. Map coordinates
// are anchored at the first registered frame's camera and scaled so the
// first window's median point distance is 1; metric_factor converts map
// units back to metric.

#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "voxrec/geometry.hpp"
#include "voxrec/prediction.hpp"
#include "voxrec/scale.hpp"

namespace voxrec {

struct KeyframeRecord {
  int frame_id = -1;
  int height = 0;
  int width = 0;
  std::vector<Vec3> points;        // fused pointmap, global coordinates
  std::vector<double> confidence;  // fused per-pixel confidence
  std::vector<uint8_t> valid;
  Sim3 pose;  // camera-to-global, s = 1
  Eigen::VectorXd descriptor;

  // Per-source scalar confidence used by the running-average pose and
  // metric updates: sum of valid pixel confidences.
  double scalar_confidence() const {
    double c = 0.0;
    for (size_t px = 0; px < confidence.size(); ++px)
      if (valid[px]) c += confidence[px];
    return c;
  }
};

struct RegisteredFrame {
  int frame_id = -1;
  Sim3 pose;
  bool low_confidence = false;  // rejected-window extrapolation flag
};

struct GlobalMap {
  std::vector<KeyframeRecord> keyframes;  // registration order
  std::vector<RegisteredFrame> frames;    // registration order
  double metric_factor = 1.0;
  std::vector<double> normalizer_history;
  double translation_normalizer = 1.0;  // median point distance of the map

  std::unordered_map<int, int> keyframe_index;
  std::unordered_map<int, int> frame_index;

  bool empty() const { return frames.empty(); }

  bool has_keyframe(int frame_id) const { return keyframe_index.count(frame_id) > 0; }

  KeyframeRecord& keyframe(int frame_id) { return keyframes[keyframe_index.at(frame_id)]; }
  const KeyframeRecord& keyframe(int frame_id) const {
    return keyframes[keyframe_index.at(frame_id)];
  }

  bool has_frame(int frame_id) const { return frame_index.count(frame_id) > 0; }

  RegisteredFrame& frame(int frame_id) { return frames[frame_index.at(frame_id)]; }
  const RegisteredFrame& frame(int frame_id) const { return frames[frame_index.at(frame_id)]; }

  void register_frame(int frame_id, const Sim3& pose, bool low_confidence = false) {
    if (has_frame(frame_id)) {
      frame(frame_id).pose = pose;
      return;
    }
    frame_index.emplace(frame_id, static_cast<int>(frames.size()));
    frames.push_back({frame_id, pose, low_confidence});
  }

  void add_keyframe(KeyframeRecord record) {
    if (has_keyframe(record.frame_id)) throw std::logic_error("duplicate keyframe");
    keyframe_index.emplace(record.frame_id, static_cast<int>(keyframes.size()));
    keyframes.push_back(std::move(record));
  }

  // Final pose of a frame: fused keyframe pose when available, otherwise the
  // registration-time pose.
  Sim3 final_pose(int frame_id) const {
    if (has_keyframe(frame_id)) return keyframe(frame_id).pose;
    return frame(frame_id).pose;
  }

  // Median distance of fused keyframe points from the origin; used as the
  // translation normalizer of Eq-style pose distances evaluated in this map.
  double update_translation_normalizer() {
    std::vector<double> norms;
    for (const KeyframeRecord& kf : keyframes)
      for (size_t px = 0; px < kf.points.size(); ++px)
        if (kf.valid[px]) norms.push_back(kf.points[px].norm());
    if (!norms.empty()) translation_normalizer = median_of(std::move(norms));
    return translation_normalizer;
  }

  PoseDistanceParams distance_params(double lambda) const {
    return PoseDistanceParams(lambda, translation_normalizer);
  }
};

}  // namespace voxrec
