#pragma once

// Mode orchestration behind the CLI: synth writes the ground-truth bundle,
// vo and sfm run their pipelines and export trajectories/clouds/reports,
// eval compares artifacts into a metrics table. All functions throw on
// failure; the CLI maps exception types to exit codes.

#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxrec/config.hpp"
#include "voxrec/exchange.hpp"
#include "voxrec/log.hpp"
#include "voxrec/metrics.hpp"
#include "voxrec/oracle.hpp"
#include "voxrec/ply.hpp"
#include "voxrec/sfm.hpp"
#include "voxrec/trajectory.hpp"
#include "voxrec/vo.hpp"

namespace voxrec {

inline constexpr double kFrameRate = 30.0;  // synthetic timestamps: id / 30 s

namespace detail {

inline std::shared_ptr<const SyntheticScene> scene_for(const RunConfig& cfg) {
  OracleConfig oracle = cfg.oracle;
  oracle.seed = cfg.seed;
  return synth_scene(oracle);
}

inline std::unique_ptr<Predictor> predictor_for(const RunConfig& cfg,
                                                std::shared_ptr<const SyntheticScene> scene) {
  if (cfg.predictor == "external-exchange") {
    if (cfg.exchange_dir.empty())
      throw std::invalid_argument("invariant violation: exchange_dir");
    return std::make_unique<DirectoryPredictor>(cfg.exchange_dir);
  }
  return std::make_unique<OraclePredictor>(std::move(scene));
}

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline Trajectory map_trajectory_metric(const GlobalMap& map) {
  std::vector<int> ids;
  for (const RegisteredFrame& f : map.frames) ids.push_back(f.frame_id);
  std::sort(ids.begin(), ids.end());
  Trajectory traj;
  for (int id : ids) {
    TrajectorySample s;
    s.timestamp = id / kFrameRate;
    s.pose = map.final_pose(id);
    s.pose.t *= map.metric_factor;
    traj.push_back(s);
  }
  return traj;
}

inline PointCloud keyframe_cloud_metric(const GlobalMap& map, int subsample) {
  PointCloud cloud;
  size_t total = 0;
  for (const KeyframeRecord& kf : map.keyframes)
    for (size_t px = 0; px < kf.points.size(); ++px) total += kf.valid[px] ? 1 : 0;
  const size_t stride = std::max<size_t>(1, total / std::max(1, subsample));
  size_t seen = 0;
  for (const KeyframeRecord& kf : map.keyframes)
    for (size_t px = 0; px < kf.points.size(); ++px) {
      if (!kf.valid[px]) continue;
      if (seen++ % stride != 0) continue;
      cloud.points.push_back(map.metric_factor * kf.points[px]);
      cloud.confidences.push_back(kf.confidence[px]);
    }
  return cloud;
}

}  // namespace detail

// Ground-truth bundle: trajectory, surface cloud, and a scene manifest.
inline void run_synth(const RunConfig& cfg) {
  const auto scene = detail::scene_for(cfg);

  Trajectory traj;
  for (int id = 0; id < scene->num_frames(); ++id) {
    TrajectorySample s;
    s.timestamp = id / kFrameRate;
    s.pose = scene->trajectory()[id];
    traj.push_back(s);
  }
  write_trajectory(traj, detail::out_path(cfg, "gt_trajectory.txt"));

  PointCloud cloud;
  const size_t total =
      static_cast<size_t>(scene->num_frames()) * cfg.oracle.width * cfg.oracle.height;
  const size_t stride = std::max<size_t>(1, total / std::max(1, cfg.eval.cloud_subsample));
  size_t seen = 0;
  for (int id = 0; id < scene->num_frames(); ++id)
    for (int px = 0; px < cfg.oracle.width * cfg.oracle.height; ++px)
      if (seen++ % stride == 0) cloud.points.push_back(scene->world_point(id, px));
  export_pointcloud(cloud, detail::out_path(cfg, "gt_cloud.ply"));

  nlohmann::json manifest;
  manifest["num_frames"] = scene->num_frames();
  manifest["scene_diameter"] = scene->scene_diameter();
  manifest["config"] = config_to_json(cfg);
  std::ofstream os = open_output(detail::out_path(cfg, "scene.json"), false);
  os << manifest.dump(2) << "\n";
  log_info("synth: wrote GT bundle to " + cfg.out_dir);
}

inline void run_vo(const RunConfig& cfg) {
  const auto scene = detail::scene_for(cfg);
  const auto predictor = detail::predictor_for(cfg, scene);

  VoPipeline vo(*predictor, cfg.vo);
  std::vector<int> ids(predictor->num_frames());
  std::iota(ids.begin(), ids.end(), 0);
  vo.run(ids);

  write_trajectory(detail::map_trajectory_metric(vo.map()),
                   detail::out_path(cfg, "vo_trajectory.txt"));
  export_pointcloud(detail::keyframe_cloud_metric(vo.map(), cfg.eval.cloud_subsample),
                    detail::out_path(cfg, "vo_keyframes.ply"));

  nlohmann::json stats;
  stats["frames"] = vo.map().frames.size();
  stats["keyframes"] = vo.map().keyframes.size();
  stats["windows"] = vo.window_stats().size();
  stats["metric_factor"] = vo.map().metric_factor;
  stats["resamples"] = vo.resample_events().size();
  int rejected = 0, backend_used = 0;
  for (const auto& w : vo.window_stats()) {
    rejected += w.rejected ? 1 : 0;
    backend_used += w.backend_used ? 1 : 0;
  }
  stats["rejected_windows"] = rejected;
  stats["backend_windows"] = backend_used;
  std::ofstream os = open_output(detail::out_path(cfg, "vo_run.json"), false);
  os << stats.dump(2) << "\n";
  log_info("vo: " + std::to_string(vo.map().frames.size()) + " frames, " +
           std::to_string(vo.map().keyframes.size()) + " keyframes");
}

inline void run_sfm(const RunConfig& cfg) {
  const auto scene = detail::scene_for(cfg);
  const auto predictor = detail::predictor_for(cfg, scene);

  SfmPipeline sfm(*predictor, cfg.sfm, cfg.vo);
  std::vector<int> ids(predictor->num_frames());
  std::iota(ids.begin(), ids.end(), 0);
  const SfmResult result = sfm.run(ids);

  // trajectory carries registered frames; the report carries every status
  Trajectory traj;
  for (const SfmFrameStatus& s : result.frames) {
    if (!s.registered || !result.map.has_frame(s.frame_id)) continue;
    TrajectorySample sample;
    sample.timestamp = s.frame_id / kFrameRate;
    sample.pose = result.map.final_pose(s.frame_id);
    sample.pose.t *= result.map.metric_factor;
    traj.push_back(sample);
  }
  std::sort(traj.begin(), traj.end(), [](const TrajectorySample& a, const TrajectorySample& b) {
    return a.timestamp < b.timestamp;
  });
  write_trajectory(traj, detail::out_path(cfg, "sfm_trajectory.txt"));
  export_pointcloud(detail::keyframe_cloud_metric(result.map, cfg.eval.cloud_subsample),
                    detail::out_path(cfg, "sfm_cloud.ply"));

  std::ofstream report = open_output(detail::out_path(cfg, "sfm_report.txt"), false);
  for (size_t ci = 0; ci < result.cluster_confidence.size(); ++ci)
    report << "cluster " << ci << " confidence " << result.cluster_confidence[ci] << "\n";
  for (const SfmFrameStatus& s : result.frames)
    report << "frame " << s.frame_id << " cluster " << s.cluster << " status "
           << (s.registered ? "registered" : "unregistered") << " conf " << s.confidence
           << "\n";
  if (!report) io_error("write failure", detail::out_path(cfg, "sfm_report.txt"));
  log_info("sfm: " + std::to_string(result.frames.size() - result.unregistered.size()) +
           " registered, " + std::to_string(result.unregistered.size()) + " unregistered");
}

// Metrics table: ATE plus relative-pose accuracy from trajectories, optional
// accuracy/completeness from clouds. Distances are reported in centimeters.
inline void run_eval(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  std::string est = cfg.eval.est_trajectory;
  if (est.empty()) {
    const std::string vo_path = detail::out_path(cfg, "vo_trajectory.txt");
    const std::string sfm_path = detail::out_path(cfg, "sfm_trajectory.txt");
    est = fs::exists(vo_path) ? vo_path : sfm_path;
  }
  std::string gt = cfg.eval.gt_trajectory;
  if (gt.empty()) gt = detail::out_path(cfg, "gt_trajectory.txt");

  const Trajectory est_traj = read_trajectory(est);
  const Trajectory gt_traj = read_trajectory(gt);

  std::ofstream os = open_output(detail::out_path(cfg, "metrics.txt"), false);
  char line[128];
  const double ate_m = ate_rmse(est_traj, gt_traj, cfg.eval.alignment_mode());
  std::snprintf(line, sizeof(line), "ate_rmse_cm %.9g\n", 100.0 * ate_m);
  os << line;

  // relative poses over timestamp-matched pairs
  std::vector<Sim3> est_poses, gt_poses;
  size_t j = 0;
  for (const TrajectorySample& s : est_traj) {
    while (j + 1 < gt_traj.size() && std::abs(gt_traj[j + 1].timestamp - s.timestamp) <=
                                         std::abs(gt_traj[j].timestamp - s.timestamp))
      ++j;
    if (j < gt_traj.size() && std::abs(gt_traj[j].timestamp - s.timestamp) <= kTimestampTolerance) {
      est_poses.push_back(s.pose);
      gt_poses.push_back(gt_traj[j].pose);
      ++j;
      if (j >= gt_traj.size()) break;
    }
  }
  if (est_poses.size() >= 2) {
    const PoseEvalResult rel = relpose_accuracy(est_poses, gt_poses);
    for (const auto& [t, v] : rel.rra) {
      std::snprintf(line, sizeof(line), "rra_at_%d %.9g\n", t, v);
      os << line;
    }
    for (const auto& [t, v] : rel.rta) {
      std::snprintf(line, sizeof(line), "rta_at_%d %.9g\n", t, v);
      os << line;
    }
    std::snprintf(line, sizeof(line), "auc_at_30 %.9g\n", rel.auc30);
    os << line;
  }

  if (!cfg.eval.est_cloud.empty() && !cfg.eval.gt_cloud.empty()) {
    const PointCloud est_cloud = read_pointcloud(cfg.eval.est_cloud);
    const PointCloud gt_cloud = read_pointcloud(cfg.eval.gt_cloud);
    const ReconEvalResult recon = recon_metrics(est_cloud.points, gt_cloud.points, {},
                                                cfg.eval.alignment == "none"
                                                    ? DepthAlignment::metric_none
                                                    : DepthAlignment::median);
    std::snprintf(line, sizeof(line), "accuracy_cm %.9g\n", 100.0 * recon.accuracy);
    os << line;
    std::snprintf(line, sizeof(line), "completeness_cm %.9g\n", 100.0 * recon.completeness);
    os << line;
    if (est_cloud.points.size() == gt_cloud.points.size()) {
      std::snprintf(line, sizeof(line), "recon_rel %.9g\n", recon.rel);
      os << line;
    }
  }
  if (!os) io_error("write failure", detail::out_path(cfg, "metrics.txt"));
  log_info("eval: metrics written to " + detail::out_path(cfg, "metrics.txt"));
}

inline void run(const std::string& mode, const RunConfig& cfg) {
  cfg.validate();
  if (mode == "synth")
    run_synth(cfg);
  else if (mode == "vo")
    run_vo(cfg);
  else if (mode == "sfm")
    run_sfm(cfg);
  else if (mode == "eval")
    run_eval(cfg);
  else
    throw std::invalid_argument("unknown mode: " + mode);
}

}  // namespace voxrec
