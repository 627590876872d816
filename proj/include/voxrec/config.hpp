#pragma once

// Run configuration: one JSON document with sections per subsystem, every
// constant exposed under its documented default. Loading applies defaults,
// validates invariants, and rejects unknown keys with their full path.
// Serialization is canonical (sorted keys, two-space indent), so
// save(load(x)) is byte-stable.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "voxrec/io_util.hpp"
#include "voxrec/metrics.hpp"
#include "voxrec/oracle.hpp"
#include "voxrec/sfm.hpp"
#include "voxrec/vo.hpp"

namespace voxrec {

struct EvalConfig {
  std::string alignment = "sim3";  // sim3 | se3 | none
  int cloud_subsample = 100000;
  std::string est_trajectory;  // defaults derived from out_dir when empty
  std::string gt_trajectory;
  std::string est_cloud;
  std::string gt_cloud;

  TrajectoryAlignment alignment_mode() const {
    if (alignment == "sim3") return TrajectoryAlignment::sim3;
    if (alignment == "se3") return TrajectoryAlignment::se3;
    if (alignment == "none") return TrajectoryAlignment::none;
    throw std::invalid_argument("invariant violation: eval.alignment");
  }

  void validate() const {
    alignment_mode();
    if (cloud_subsample < 1)
      throw std::invalid_argument("invariant violation: eval.cloud_subsample");
  }
};

struct RunConfig {
  uint64_t seed = 1;
  std::string predictor = "synthetic";  // synthetic | external-exchange
  std::string exchange_dir;
  std::string out_dir = "out";
  OracleConfig oracle;
  VoConfig vo;
  SfmConfig sfm;
  EvalConfig eval;

  void validate() const {
    if (predictor != "synthetic" && predictor != "external-exchange")
      throw std::invalid_argument("invariant violation: predictor");
    oracle.validate();
    vo.validate();
    sfm.validate();
    eval.validate();
  }
};

namespace detail {

// Tracks consumed keys so leftovers can be reported with their path.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string prefix)
      : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw std::invalid_argument("expected object at " + display_prefix());
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument("bad value for key: " + path(key));
    }
  }

  const nlohmann::json* section(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw std::invalid_argument("unknown key: " + path(key));
  }

 private:
  std::string display_prefix() const { return prefix_.empty() ? "<root>" : prefix_; }
  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const nlohmann::json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline CurveKind curve_from_string(const std::string& s) {
  if (s == "morton") return CurveKind::morton;
  if (s == "hilbert") return CurveKind::hilbert;
  throw std::invalid_argument("invariant violation: vo.curve");
}

inline std::string curve_to_string(CurveKind k) {
  return k == CurveKind::morton ? "morton" : "hilbert";
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  detail::SectionReader root(j, "");
  root.get("seed", cfg.seed);
  root.get("predictor", cfg.predictor);
  root.get("exchange_dir", cfg.exchange_dir);
  root.get("out_dir", cfg.out_dir);

  if (const nlohmann::json* s = root.section("oracle")) {
    detail::SectionReader r(*s, "oracle");
    r.get("num_frames", cfg.oracle.num_frames);
    r.get("width", cfg.oracle.width);
    r.get("height", cfg.oracle.height);
    r.get("focal", cfg.oracle.focal);
    std::vector<double> room = {cfg.oracle.room_size.x(), cfg.oracle.room_size.y(),
                                cfg.oracle.room_size.z()};
    r.get("room_size", room);
    if (room.size() != 3) throw std::invalid_argument("bad value for key: oracle.room_size");
    cfg.oracle.room_size = Vec3(room[0], room[1], room[2]);
    r.get("num_boxes", cfg.oracle.num_boxes);
    r.get("num_waypoints", cfg.oracle.num_waypoints);
    r.get("loop", cfg.oracle.loop);
    r.get("loop_turns", cfg.oracle.loop_turns);
    r.get("noise_sigma", cfg.oracle.noise_sigma);
    r.get("pose_noise_rot", cfg.oracle.pose_noise_rot);
    r.get("pose_noise_trans", cfg.oracle.pose_noise_trans);
    r.get("dropout", cfg.oracle.dropout);
    r.get("descriptor_dim", cfg.oracle.descriptor_dim);
    r.get("descriptor_noise", cfg.oracle.descriptor_noise);
    r.finish();
  }

  if (const nlohmann::json* s = root.section("vo")) {
    detail::SectionReader r(*s, "vo");
    r.get("eta_d", cfg.vo.eta_d);
    r.get("window_size", cfg.vo.window_size);
    r.get("max_active", cfg.vo.max_active);
    r.get("min_active", cfg.vo.min_active);
    r.get("eta_b", cfg.vo.eta_b);
    r.get("eta_max", cfg.vo.eta_max);
    r.get("n_topk", cfg.vo.n_topk);
    r.get("n_old", cfg.vo.n_old);
    r.get("lambda", cfg.vo.lambda);
    r.get("backend_mode", cfg.vo.backend_mode);
    r.get("backend_quantile", cfg.vo.backend_quantile);
    r.get("blend_margin", cfg.vo.blend_margin);
    r.get("voxel_size", cfg.vo.voxel_size);
    std::string curve = detail::curve_to_string(cfg.vo.curve);
    r.get("curve", curve);
    cfg.vo.curve = detail::curve_from_string(curve);
    r.get("processor", cfg.vo.processor);
    r.get("knn_k", cfg.vo.knn_k);
    r.finish();
  }

  if (const nlohmann::json* s = root.section("sfm")) {
    detail::SectionReader r(*s, "sfm");
    r.get("eta_d", cfg.sfm.eta_d);
    r.get("top_k", cfg.sfm.top_k);
    r.get("n_kmax", cfg.sfm.n_kmax);
    r.get("eta_r", cfg.sfm.eta_r);
    r.get("n_cmin", cfg.sfm.n_cmin);
    r.get("n_cmax", cfg.sfm.n_cmax);
    r.get("registration_quantile", cfg.sfm.registration_quantile);
    r.get("lambda", cfg.sfm.lambda);
    r.finish();
  }

  if (const nlohmann::json* s = root.section("eval")) {
    detail::SectionReader r(*s, "eval");
    r.get("alignment", cfg.eval.alignment);
    r.get("cloud_subsample", cfg.eval.cloud_subsample);
    r.get("est_trajectory", cfg.eval.est_trajectory);
    r.get("gt_trajectory", cfg.eval.gt_trajectory);
    r.get("est_cloud", cfg.eval.est_cloud);
    r.get("gt_cloud", cfg.eval.gt_cloud);
    r.finish();
  }

  root.finish();
  cfg.oracle.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["predictor"] = cfg.predictor;
  j["exchange_dir"] = cfg.exchange_dir;
  j["out_dir"] = cfg.out_dir;
  j["oracle"] = {{"num_frames", cfg.oracle.num_frames},
                 {"width", cfg.oracle.width},
                 {"height", cfg.oracle.height},
                 {"focal", cfg.oracle.focal},
                 {"room_size", {cfg.oracle.room_size.x(), cfg.oracle.room_size.y(),
                                cfg.oracle.room_size.z()}},
                 {"num_boxes", cfg.oracle.num_boxes},
                 {"num_waypoints", cfg.oracle.num_waypoints},
                 {"loop", cfg.oracle.loop},
                 {"loop_turns", cfg.oracle.loop_turns},
                 {"noise_sigma", cfg.oracle.noise_sigma},
                 {"pose_noise_rot", cfg.oracle.pose_noise_rot},
                 {"pose_noise_trans", cfg.oracle.pose_noise_trans},
                 {"dropout", cfg.oracle.dropout},
                 {"descriptor_dim", cfg.oracle.descriptor_dim},
                 {"descriptor_noise", cfg.oracle.descriptor_noise}};
  j["vo"] = {{"eta_d", cfg.vo.eta_d},
             {"window_size", cfg.vo.window_size},
             {"max_active", cfg.vo.max_active},
             {"min_active", cfg.vo.min_active},
             {"eta_b", cfg.vo.eta_b},
             {"eta_max", cfg.vo.eta_max},
             {"n_topk", cfg.vo.n_topk},
             {"n_old", cfg.vo.n_old},
             {"lambda", cfg.vo.lambda},
             {"backend_mode", cfg.vo.backend_mode},
             {"backend_quantile", cfg.vo.backend_quantile},
             {"blend_margin", cfg.vo.blend_margin},
             {"voxel_size", cfg.vo.voxel_size},
             {"curve", detail::curve_to_string(cfg.vo.curve)},
             {"processor", cfg.vo.processor},
             {"knn_k", cfg.vo.knn_k}};
  j["sfm"] = {{"eta_d", cfg.sfm.eta_d},
              {"top_k", cfg.sfm.top_k},
              {"n_kmax", cfg.sfm.n_kmax},
              {"eta_r", cfg.sfm.eta_r},
              {"n_cmin", cfg.sfm.n_cmin},
              {"n_cmax", cfg.sfm.n_cmax},
              {"registration_quantile", cfg.sfm.registration_quantile},
              {"lambda", cfg.sfm.lambda}};
  j["eval"] = {{"alignment", cfg.eval.alignment},
               {"cloud_subsample", cfg.eval.cloud_subsample},
               {"est_trajectory", cfg.eval.est_trajectory},
               {"gt_trajectory", cfg.eval.gt_trajectory},
               {"est_cloud", cfg.eval.est_cloud},
               {"gt_cloud", cfg.eval.gt_cloud}};
  return j;
}

// Whitespace-only files yield the full default configuration.
inline RunConfig load_config(const std::string& path) {
  std::ifstream is = open_input(path, false);
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    RunConfig cfg;
    cfg.oracle.seed = cfg.seed;
    return cfg;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config parse failure in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os = open_output(path, false);
  os << config_to_json(cfg).dump(2) << "\n";
  if (!os) io_error("write failure", path);
}

}  // namespace voxrec
