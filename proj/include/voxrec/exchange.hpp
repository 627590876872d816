#pragma once

// File-exchange seam for external predictor backends. One directory per
// window: manifest.json with frame metadata plus one little-endian binary
// tensor file per field (see docs/FORMATS.md). A dataset root carries
// index.json mapping frame-id lists to window directories and a
// descriptors.bin table, which lets DirectoryPredictor serve precomputed
// predictions through the Predictor interface.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxrec/io_util.hpp"
#include "voxrec/prediction.hpp"

namespace voxrec {

namespace detail {

inline std::string window_key(const std::vector<int>& frame_ids) {
  std::string key;
  for (size_t i = 0; i < frame_ids.size(); ++i) {
    if (i > 0) key += "_";
    key += std::to_string(frame_ids[i]);
  }
  return key;
}

template <typename T>
void write_tensor(const std::string& path, std::span<const T> data) {
  std::ofstream os = open_output(path);
  write_span(os, data);
  if (!os) io_error("write failure", path);
}

template <typename T>
std::vector<T> read_tensor(const std::string& path, size_t expected) {
  std::ifstream is = open_input(path);
  std::vector<T> data(expected);
  read_span<T>(is, data);
  return data;
}

}  // namespace detail

inline void write_window_exchange(const std::string& dir, const WindowPrediction& window) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const size_t n_frames = window.frames.size();
  if (n_frames == 0) throw std::invalid_argument("empty window");
  const int pixels = window.frames.front().pixel_count();
  const Eigen::Index desc_dim = window.frames.front().descriptor.size();

  nlohmann::json manifest;
  manifest["normalizer"] = window.normalizer;
  manifest["height"] = window.frames.front().height;
  manifest["width"] = window.frames.front().width;
  manifest["descriptor_dim"] = desc_dim;
  manifest["fields"] = {"pointmap", "depth", "confidence", "valid", "poses",
                        "metric_log_depth", "intrinsics", "descriptors"};

  std::vector<double> pointmap, depth, confidence, poses, mld, intrinsics, descriptors;
  std::vector<uint8_t> valid;
  std::vector<int> frame_ids;
  for (const FramePrediction& f : window.frames) {
    if (f.pixel_count() != pixels) throw std::invalid_argument("mixed window resolutions");
    frame_ids.push_back(f.frame_id);
    for (const Vec3& p : f.pointmap) {
      pointmap.push_back(p.x());
      pointmap.push_back(p.y());
      pointmap.push_back(p.z());
    }
    depth.insert(depth.end(), f.depth.begin(), f.depth.end());
    confidence.insert(confidence.end(), f.confidence.begin(), f.confidence.end());
    valid.insert(valid.end(), f.valid.begin(), f.valid.end());
    const double pose[8] = {f.pose.t.x(), f.pose.t.y(), f.pose.t.z(), f.pose.q.x,
                            f.pose.q.y,   f.pose.q.z,   f.pose.q.w,   f.pose.s};
    poses.insert(poses.end(), pose, pose + 8);
    mld.push_back(f.metric_log_depth);
    const double intr[4] = {f.fx, f.fy, f.cx, f.cy};
    intrinsics.insert(intrinsics.end(), intr, intr + 4);
    for (Eigen::Index i = 0; i < desc_dim; ++i) descriptors.push_back(f.descriptor(i));
  }
  manifest["frame_ids"] = frame_ids;

  const fs::path root(dir);
  {
    std::ofstream os = open_output((root / "manifest.json").string(), false);
    os << manifest.dump(2) << "\n";
  }
  detail::write_tensor<double>((root / "pointmap.bin").string(), pointmap);
  detail::write_tensor<double>((root / "depth.bin").string(), depth);
  detail::write_tensor<double>((root / "confidence.bin").string(), confidence);
  detail::write_tensor<uint8_t>((root / "valid.bin").string(), valid);
  detail::write_tensor<double>((root / "poses.bin").string(), poses);
  detail::write_tensor<double>((root / "metric_log_depth.bin").string(), mld);
  detail::write_tensor<double>((root / "intrinsics.bin").string(), intrinsics);
  detail::write_tensor<double>((root / "descriptors.bin").string(), descriptors);
}

inline WindowPrediction read_window_exchange(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  nlohmann::json manifest;
  {
    std::ifstream is = open_input((root / "manifest.json").string(), false);
    is >> manifest;
  }
  const std::vector<int> frame_ids = manifest.at("frame_ids").get<std::vector<int>>();
  const int height = manifest.at("height").get<int>();
  const int width = manifest.at("width").get<int>();
  const Eigen::Index desc_dim = manifest.at("descriptor_dim").get<Eigen::Index>();
  const size_t n = frame_ids.size();
  const size_t pixels = static_cast<size_t>(height) * width;

  const auto pointmap = detail::read_tensor<double>((root / "pointmap.bin").string(), n * pixels * 3);
  const auto depth = detail::read_tensor<double>((root / "depth.bin").string(), n * pixels);
  const auto confidence =
      detail::read_tensor<double>((root / "confidence.bin").string(), n * pixels);
  const auto valid = detail::read_tensor<uint8_t>((root / "valid.bin").string(), n * pixels);
  const auto poses = detail::read_tensor<double>((root / "poses.bin").string(), n * 8);
  const auto mld = detail::read_tensor<double>((root / "metric_log_depth.bin").string(), n);
  const auto intrinsics = detail::read_tensor<double>((root / "intrinsics.bin").string(), n * 4);
  const auto descriptors =
      detail::read_tensor<double>((root / "descriptors.bin").string(), n * desc_dim);

  WindowPrediction window;
  window.normalizer = manifest.at("normalizer").get<double>();
  for (size_t fi = 0; fi < n; ++fi) {
    FramePrediction f;
    f.frame_id = frame_ids[fi];
    f.height = height;
    f.width = width;
    f.fx = intrinsics[fi * 4 + 0];
    f.fy = intrinsics[fi * 4 + 1];
    f.cx = intrinsics[fi * 4 + 2];
    f.cy = intrinsics[fi * 4 + 3];
    f.pointmap.resize(pixels);
    for (size_t px = 0; px < pixels; ++px)
      f.pointmap[px] = Vec3(pointmap[(fi * pixels + px) * 3 + 0],
                            pointmap[(fi * pixels + px) * 3 + 1],
                            pointmap[(fi * pixels + px) * 3 + 2]);
    f.depth.assign(depth.begin() + fi * pixels, depth.begin() + (fi + 1) * pixels);
    f.confidence.assign(confidence.begin() + fi * pixels,
                        confidence.begin() + (fi + 1) * pixels);
    f.valid.assign(valid.begin() + fi * pixels, valid.begin() + (fi + 1) * pixels);
    const double* p = &poses[fi * 8];
    // the writer serialized a normalized quaternion; assign fields directly
    // so the round trip stays bit-exact
    f.pose.q.w = p[6];
    f.pose.q.x = p[3];
    f.pose.q.y = p[4];
    f.pose.q.z = p[5];
    f.pose.t = Vec3(p[0], p[1], p[2]);
    f.pose.s = p[7];
    f.metric_log_depth = mld[fi];
    f.descriptor.resize(desc_dim);
    for (Eigen::Index i = 0; i < desc_dim; ++i) f.descriptor(i) = descriptors[fi * desc_dim + i];
    window.frames.push_back(std::move(f));
  }
  return window;
}

// Precomputed-prediction backend: predict() looks the requested frame list
// up in index.json and loads that window directory.
class DirectoryPredictor final : public Predictor {
 public:
  explicit DirectoryPredictor(std::string root) : root_(std::move(root)) {
    std::ifstream is = open_input((std::filesystem::path(root_) / "index.json").string(), false);
    is >> index_;
    num_frames_ = index_.at("num_frames").get<int>();
    descriptor_dim_ = index_.at("descriptor_dim").get<Eigen::Index>();
    descriptors_ = detail::read_tensor<double>(
        (std::filesystem::path(root_) / "descriptors.bin").string(),
        static_cast<size_t>(num_frames_) * descriptor_dim_);
  }

  WindowPrediction predict(const std::vector<int>& frame_ids) override {
    const std::string key = detail::window_key(frame_ids);
    const auto& windows = index_.at("windows");
    if (!windows.contains(key))
      throw std::runtime_error("no exchange window for frames " + key);
    const std::string sub = windows.at(key).get<std::string>();
    return read_window_exchange((std::filesystem::path(root_) / sub).string());
  }

  int num_frames() const override { return num_frames_; }

  Eigen::VectorXd frame_descriptor(int frame_id) override {
    if (frame_id < 0 || frame_id >= num_frames_) throw std::invalid_argument("unknown frame");
    Eigen::VectorXd d(descriptor_dim_);
    for (Eigen::Index i = 0; i < descriptor_dim_; ++i)
      d(i) = descriptors_[frame_id * descriptor_dim_ + i];
    return d;
  }

 private:
  std::string root_;
  nlohmann::json index_;
  int num_frames_ = 0;
  Eigen::Index descriptor_dim_ = 0;
  std::vector<double> descriptors_;
};

// Dumps a predictor's outputs for the given window requests into an
// exchange dataset that DirectoryPredictor can serve back.
inline void write_exchange_dataset(const std::string& root, Predictor& predictor,
                                   const std::vector<std::vector<int>>& requests) {
  namespace fs = std::filesystem;
  fs::create_directories(root);

  nlohmann::json index;
  index["num_frames"] = predictor.num_frames();
  const Eigen::VectorXd d0 = predictor.frame_descriptor(0);
  index["descriptor_dim"] = d0.size();

  std::vector<double> descriptors;
  for (int id = 0; id < predictor.num_frames(); ++id) {
    const Eigen::VectorXd d = predictor.frame_descriptor(id);
    for (Eigen::Index i = 0; i < d.size(); ++i) descriptors.push_back(d(i));
  }
  detail::write_tensor<double>((fs::path(root) / "descriptors.bin").string(), descriptors);

  nlohmann::json windows = nlohmann::json::object();
  for (size_t w = 0; w < requests.size(); ++w) {
    const std::string sub = "window_" + std::to_string(w);
    write_window_exchange((fs::path(root) / sub).string(), predictor.predict(requests[w]));
    windows[detail::window_key(requests[w])] = sub;
  }
  index["windows"] = windows;
  std::ofstream os = open_output((fs::path(root) / "index.json").string(), false);
  os << index.dump(2) << "\n";
}

}  // namespace voxrec
