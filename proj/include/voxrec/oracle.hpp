#pragma once

// Deterministic synthetic predictor for desk-scale verification: a box-world
// scene with exact ray-cast depth, a smooth look-at trajectory, and a
// corruption model whose confidence anti-correlates with the injected error.
// All ground truth is generated at construction, so predict() is a pure read
// and safe to call concurrently.

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "voxrec/geometry.hpp"
#include "voxrec/prediction.hpp"
#include "voxrec/rng.hpp"
#include "voxrec/scale.hpp"

namespace voxrec {

struct OracleConfig {
  uint64_t seed = 1;

  // scene + trajectory
  int num_frames = 60;
  int width = 32;
  int height = 24;
  double focal = 28.0;  // pixels
  Vec3 room_size = Vec3(6.0, 5.0, 3.0);
  int num_boxes = 6;
  int num_waypoints = 5;
  bool loop = false;       // close the waypoint polygon so the path returns home
  double loop_turns = 1.0;  // full revolutions when loop is set

  // corruption model
  double noise_sigma = 0.0;       // depth-proportional point noise
  double pose_noise_rot = 0.0;    // radians
  double pose_noise_trans = 0.0;  // normalized units
  double dropout = 0.0;           // fraction of pixels marked invalid

  // descriptor embedding
  int descriptor_dim = 8;
  double descriptor_noise = 0.02;

  void validate() const {
    if (num_frames < 1) throw std::invalid_argument("invariant violation: num_frames");
    if (width < 2 || height < 2) throw std::invalid_argument("invariant violation: image size");
    if (!(focal > 0.0)) throw std::invalid_argument("invariant violation: focal");
    if (noise_sigma < 0.0) throw std::invalid_argument("invariant violation: noise_sigma");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("invariant violation: dropout");
    if (descriptor_dim < 6) throw std::invalid_argument("invariant violation: descriptor_dim");
  }
};

struct Aabb {
  Vec3 lo, hi;
  bool contains(const Vec3& p, double margin = 0.0) const {
    return (p.array() >= lo.array() - margin).all() && (p.array() <= hi.array() + margin).all();
  }
  bool intersects(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() && (hi.array() >= o.lo.array()).all();
  }
};

class SyntheticScene {
 public:
  explicit SyntheticScene(const OracleConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    fx_ = fy_ = cfg.focal;
    cx_ = 0.5 * cfg.width;
    cy_ = 0.5 * cfg.height;

    room_.lo = -0.5 * cfg.room_size;
    room_.hi = 0.5 * cfg.room_size;
    // cameras stay inside the central region; boxes stay outside it so no
    // ray ever starts inside geometry
    inner_.lo = 0.3 * room_.lo;
    inner_.hi = 0.3 * room_.hi;

    Rng rng(cfg.seed);
    place_boxes(rng);
    build_trajectory(rng);
    render_all();
    build_descriptors();
  }

  const OracleConfig& config() const { return cfg_; }
  int num_frames() const { return cfg_.num_frames; }
  const std::vector<Sim3>& trajectory() const { return traj_; }
  const std::vector<double>& gt_depth(int frame) const { return gt_depth_[frame]; }
  const Eigen::VectorXd& descriptor(int frame) const { return descriptors_[frame]; }
  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }

  Vec3 pixel_ray(int px) const {
    const int u = px % cfg_.width;
    const int v = px / cfg_.width;
    return Vec3((u + 0.5 - cx_) / fx_, (v + 0.5 - cy_) / fy_, 1.0);
  }

  // GT surface point of a pixel in metric world coordinates.
  Vec3 world_point(int frame, int px) const {
    return traj_[frame].apply(gt_depth_[frame][px] * pixel_ray(px));
  }

  double scene_diameter() const { return (room_.hi - room_.lo).norm(); }

 private:
  void place_boxes(Rng& rng) {
    for (int b = 0; b < cfg_.num_boxes; ++b) {
      Aabb box;
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        const Vec3 size(rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9));
        Vec3 center = rng.uniform3(-0.5, 0.5).cwiseProduct(cfg_.room_size) * 0.9;
        center = center.cwiseMax(room_.lo + 0.5 * size).cwiseMin(room_.hi - 0.5 * size);
        box.lo = center - 0.5 * size;
        box.hi = center + 0.5 * size;
        placed = !box.intersects(inner_);
      }
      if (placed) boxes_.push_back(box);
    }
  }

  // Waypoints wind around the room center on an annulus inside the camera
  // region, so the look-at target never comes close to the path and the
  // resulting orientation varies smoothly. loop=true closes one full turn.
  void build_trajectory(Rng& rng) {
    const Vec3 half = 0.5 * (inner_.hi - inner_.lo);
    const int m = std::max(3, cfg_.num_waypoints);
    std::vector<Vec3> waypoints;
    double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double theta0 = theta;
    for (int i = 0; i < m; ++i) {
      if (cfg_.loop)
        theta = theta0 + 2.0 * M_PI * cfg_.loop_turns * i / m;
      else if (i > 0)
        theta += rng.uniform(0.3, 1.0);
      const double rad = rng.uniform(0.55, 0.95);
      waypoints.push_back(Vec3(rad * half.x() * std::cos(theta), rad * half.y() * std::sin(theta),
                               rng.uniform(-0.8, 0.8) * half.z()));
    }
    if (cfg_.loop) waypoints.push_back(waypoints.front());

    traj_.reserve(cfg_.num_frames);
    const int segments = static_cast<int>(waypoints.size()) - 1;
    for (int f = 0; f < cfg_.num_frames; ++f) {
      const double t = cfg_.num_frames == 1
                           ? 0.0
                           : static_cast<double>(f) / (cfg_.num_frames - 1) * segments;
      const int seg = std::min(static_cast<int>(t), segments - 1);
      const Vec3 pos = catmull_rom(waypoints, seg, t - seg);
      traj_.push_back(look_at(pos, Vec3::Zero()));
    }
  }

  static Vec3 catmull_rom(const std::vector<Vec3>& w, int seg, double u) {
    const int n = static_cast<int>(w.size());
    auto at = [&](int i) { return w[std::clamp(i, 0, n - 1)]; };
    const Vec3 p0 = at(seg - 1), p1 = at(seg), p2 = at(seg + 1), p3 = at(seg + 2);
    const double u2 = u * u, u3 = u2 * u;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u3);
  }

  // +z forward, +x right, +y down; world up is +z.
  static Sim3 look_at(const Vec3& pos, const Vec3& target) {
    Vec3 fwd = target - pos;
    if (fwd.norm() < 1e-9) fwd = Vec3::UnitX();
    fwd.normalize();
    Vec3 right = fwd.cross(Vec3::UnitZ());
    if (right.norm() < 1e-6) right = fwd.cross(Vec3::UnitY());
    right.normalize();
    Mat3 rot;
    rot.col(0) = right;
    rot.col(1) = fwd.cross(right).normalized();  // camera down
    rot.col(2) = fwd;
    return Sim3(Quat::from_matrix(rot), pos, 1.0);
  }

  // Exit distance of a ray starting inside the room shell.
  double room_exit(const Vec3& o, const Vec3& d) const {
    double t = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (d(a) > 1e-300)
        t = std::min(t, (room_.hi(a) - o(a)) / d(a));
      else if (d(a) < -1e-300)
        t = std::min(t, (room_.lo(a) - o(a)) / d(a));
    }
    return t;
  }

  // Slab-method entry distance; infinity when the ray misses the box.
  static double box_entry(const Aabb& b, const Vec3& o, const Vec3& d) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d(a)) < 1e-300) {
        if (o(a) < b.lo(a) || o(a) > b.hi(a)) return std::numeric_limits<double>::infinity();
        continue;
      }
      double near = (b.lo(a) - o(a)) / d(a);
      double far = (b.hi(a) - o(a)) / d(a);
      if (near > far) std::swap(near, far);
      t0 = std::max(t0, near);
      t1 = std::min(t1, far);
    }
    return (t0 <= t1 && t0 > 0.0) ? t0 : std::numeric_limits<double>::infinity();
  }

  void render_all() {
    const int pixels = cfg_.width * cfg_.height;
    gt_depth_.assign(cfg_.num_frames, std::vector<double>(pixels));
    for (int f = 0; f < cfg_.num_frames; ++f) {
      const Sim3& pose = traj_[f];
      for (int px = 0; px < pixels; ++px) {
        const Vec3 dir = pose.q.rotate(pixel_ray(px));
        double t = room_exit(pose.t, dir);
        for (const Aabb& b : boxes_) t = std::min(t, box_entry(b, pose.t, dir));
        gt_depth_[f][px] = t;  // parameter along a z=1 camera ray IS the z-depth
      }
    }
  }

  void build_descriptors() {
    const double diag = scene_diameter();
    descriptors_.reserve(cfg_.num_frames);
    for (int f = 0; f < cfg_.num_frames; ++f) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(cfg_.descriptor_dim);
      d.segment<3>(0) = traj_[f].t / diag;
      d.segment<3>(3) = traj_[f].q.rotate(Vec3::UnitZ());
      Rng rng = Rng::keyed(cfg_.seed, 0xde5c0000ULL + static_cast<uint64_t>(f));
      for (int i = 0; i < d.size(); ++i) d(i) += cfg_.descriptor_noise * rng.normal();
      descriptors_.push_back(std::move(d));
    }
  }

  OracleConfig cfg_;
  Aabb room_, inner_;
  std::vector<Aabb> boxes_;
  std::vector<Sim3> traj_;
  std::vector<std::vector<double>> gt_depth_;
  std::vector<Eigen::VectorXd> descriptors_;
  double fx_, fy_, cx_, cy_;
};

inline std::shared_ptr<SyntheticScene> synth_scene(const OracleConfig& cfg) {
  return std::make_shared<SyntheticScene>(cfg);
}

// Injects depth-proportional noise along each pixel ray, small pose
// perturbations on non-anchor frames, and dropout. Confidence becomes
// 1 / (1 + |relative error| / sigma), so it anti-correlates with the injected
// error; with all noise parameters zero the window is returned untouched.
// Noise streams are keyed by frame id, never by call order.
inline WindowPrediction corrupt(const WindowPrediction& gt, const OracleConfig& cfg) {
  cfg.validate();
  WindowPrediction out = gt;
  const bool point_noise = cfg.noise_sigma > 0.0;
  const bool pose_noise = cfg.pose_noise_rot > 0.0 || cfg.pose_noise_trans > 0.0;
  const bool dropout = cfg.dropout > 0.0;
  if (!point_noise && !pose_noise && !dropout) return out;

  for (size_t fi = 0; fi < out.frames.size(); ++fi) {
    FramePrediction& f = out.frames[fi];
    Rng rng = Rng::keyed(cfg.seed, 0xc0440000ULL + static_cast<uint64_t>(f.frame_id));
    if (point_noise) {
      for (int px = 0; px < f.pixel_count(); ++px) {
        const double n = rng.normal();
        const double old_depth = f.depth[px];
        const double new_depth = old_depth * std::max(1.0 + cfg.noise_sigma * n, 0.01);
        const Vec3 ray_dir = f.pose.q.rotate(f.pixel_ray(px));
        f.pointmap[px] += (new_depth - old_depth) * ray_dir;
        f.depth[px] = new_depth;
        const double rel_err = std::abs(new_depth - old_depth) / old_depth;
        f.confidence[px] = 1.0 / (1.0 + rel_err / cfg.noise_sigma);
      }
    }
    if (pose_noise && fi != 0) {
      if (cfg.pose_noise_rot > 0.0)
        f.pose.q = f.pose.q * Quat::from_axis_angle(rng.normal3(), cfg.pose_noise_rot * rng.normal());
      if (cfg.pose_noise_trans > 0.0) f.pose.t += cfg.pose_noise_trans * rng.normal3();
    }
    if (dropout) {
      for (int px = 0; px < f.pixel_count(); ++px)
        if (rng.uniform() < cfg.dropout) f.valid[px] = 0;
    }
  }
  return out;
}

class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(std::shared_ptr<const SyntheticScene> scene)
      : scene_(std::move(scene)) {}

  WindowPrediction predict(const std::vector<int>& frame_ids) override {
    if (frame_ids.empty()) throw std::invalid_argument("unknown frame");
    for (int id : frame_ids)
      if (id < 0 || id >= scene_->num_frames()) throw std::invalid_argument("unknown frame");

    const OracleConfig& cfg = scene_->config();
    const Sim3& anchor = scene_->trajectory()[frame_ids.front()];
    const Mat3 anchor_rot_t = anchor.q.matrix().transpose();
    const int pixels = cfg.width * cfg.height;

    WindowPrediction w;
    w.frames.reserve(frame_ids.size());
    std::vector<double> norms;
    norms.reserve(frame_ids.size() * pixels);

    for (int id : frame_ids) {
      FramePrediction f;
      f.frame_id = id;
      f.height = cfg.height;
      f.width = cfg.width;
      f.fx = scene_->fx(); f.fy = scene_->fy();
      f.cx = scene_->cx(); f.cy = scene_->cy();
      f.depth = scene_->gt_depth(id);
      f.pointmap.resize(pixels);
      f.confidence.assign(pixels, 1.0);
      f.valid.assign(pixels, 1);
      const bool is_anchor = (id == frame_ids.front());
      for (int px = 0; px < pixels; ++px) {
        if (is_anchor) {
          f.pointmap[px] = f.depth[px] * f.pixel_ray(px);
        } else {
          const Vec3 world = scene_->world_point(id, px);
          f.pointmap[px] = anchor_rot_t * (world - anchor.t);
        }
        norms.push_back(f.pointmap[px].norm());
      }
      if (!is_anchor) {
        const Sim3& cam = scene_->trajectory()[id];
        f.pose.q = Quat::from_matrix(anchor_rot_t * cam.q.matrix());
        f.pose.t = anchor_rot_t * (cam.t - anchor.t);
      }
      f.descriptor = scene_->descriptor(id);
      w.frames.push_back(std::move(f));
    }

    // canonical space: median point distance across all frames becomes 1
    w.normalizer = median_of(std::move(norms));
    const double inv = 1.0 / w.normalizer;
    for (FramePrediction& f : w.frames) {
      for (Vec3& p : f.pointmap) p *= inv;
      for (double& d : f.depth) d *= inv;
      f.pose.t *= inv;
      // metric head stand-in: true metric depth of the median-depth pixel
      f.metric_log_depth = std::log(f.depth[median_depth_pixel(f)] * w.normalizer);
    }
    return corrupt(w, cfg);
  }

  int num_frames() const override { return scene_->num_frames(); }

  Eigen::VectorXd frame_descriptor(int frame_id) override {
    if (frame_id < 0 || frame_id >= scene_->num_frames())
      throw std::invalid_argument("unknown frame");
    return scene_->descriptor(frame_id);
  }

  const SyntheticScene& scene() const { return *scene_; }

 private:
  std::shared_ptr<const SyntheticScene> scene_;
};

}  // namespace voxrec
