#pragma once

// Binary little-endian PLY export/import. Layout: float32 x,y,z, optional
// uchar red,green,blue, optional float32 confidence; the header declares the
// exact vertex count. The reader accepts exactly the property sets this
// writer produces.

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "voxrec/geometry.hpp"
#include "voxrec/io_util.hpp"

namespace voxrec {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::array<uint8_t, 3>> colors;  // empty when absent
  std::vector<double> confidences;             // empty when absent
};

inline void export_pointcloud(const PointCloud& cloud, const std::string& path) {
  for (const Vec3& p : cloud.points)
    if (!p.allFinite()) throw std::invalid_argument("non-finite point");
  const bool with_color = !cloud.colors.empty();
  const bool with_conf = !cloud.confidences.empty();
  if (with_color && cloud.colors.size() != cloud.points.size())
    throw std::invalid_argument("color count mismatch");
  if (with_conf && cloud.confidences.size() != cloud.points.size())
    throw std::invalid_argument("confidence count mismatch");

  std::ofstream os = open_output(path);
  os << "ply\nformat binary_little_endian 1.0\n";
  os << "element vertex " << cloud.points.size() << "\n";
  os << "property float x\nproperty float y\nproperty float z\n";
  if (with_color)
    os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (with_conf) os << "property float confidence\n";
  os << "end_header\n";

  for (size_t i = 0; i < cloud.points.size(); ++i) {
    const float xyz[3] = {static_cast<float>(cloud.points[i].x()),
                          static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z())};
    os.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    if (with_color)
      os.write(reinterpret_cast<const char*>(cloud.colors[i].data()), 3);
    if (with_conf) {
      const float c = static_cast<float>(cloud.confidences[i]);
      os.write(reinterpret_cast<const char*>(&c), sizeof(c));
    }
  }
  if (!os) io_error("write failure", path);
}

inline PointCloud read_pointcloud(const std::string& path) {
  std::ifstream is = open_input(path);
  std::string line;
  if (!std::getline(is, line) || line != "ply") io_error("not a ply file", path);

  size_t count = 0;
  std::vector<std::string> properties;
  bool binary_le = false;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (tok == "element") {
      std::string what;
      ss >> what >> count;
      if (what != "vertex") io_error("unsupported ply element", path);
    } else if (tok == "property") {
      std::string type, name;
      ss >> type >> name;
      properties.push_back(name);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!binary_le) io_error("unsupported ply format", path);

  const std::vector<std::string> base = {"x", "y", "z"};
  bool with_color = false, with_conf = false;
  if (properties.size() >= 3 &&
      std::equal(base.begin(), base.end(), properties.begin())) {
    std::vector<std::string> rest(properties.begin() + 3, properties.end());
    if (rest == std::vector<std::string>{}) {
    } else if (rest == std::vector<std::string>{"red", "green", "blue"}) {
      with_color = true;
    } else if (rest == std::vector<std::string>{"confidence"}) {
      with_conf = true;
    } else if (rest == std::vector<std::string>{"red", "green", "blue", "confidence"}) {
      with_color = with_conf = true;
    } else {
      io_error("unsupported ply properties", path);
    }
  } else {
    io_error("unsupported ply properties", path);
  }

  PointCloud cloud;
  cloud.points.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    float xyz[3];
    is.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    if (!is) io_error("truncated ply payload", path);
    cloud.points.emplace_back(xyz[0], xyz[1], xyz[2]);
    if (with_color) {
      std::array<uint8_t, 3> rgb;
      is.read(reinterpret_cast<char*>(rgb.data()), 3);
      cloud.colors.push_back(rgb);
    }
    if (with_conf) {
      float c;
      is.read(reinterpret_cast<char*>(&c), sizeof(c));
      cloud.confidences.push_back(c);
    }
  }
  return cloud;
}

}  // namespace voxrec
