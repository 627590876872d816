#pragma once

// Trajectory text format: one line per frame,
//   timestamp tx ty tz qx qy qz qw
// space-separated, poses camera-to-world, timestamps strictly increasing.
// Values are written with 9 significant digits (timestamps with 9 decimal
// places), which round-trips all fields to better than 1e-8.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxrec/geometry.hpp"
#include "voxrec/io_util.hpp"

namespace voxrec {

struct TrajectorySample {
  double timestamp = 0.0;
  Sim3 pose;  // camera-to-world, s = 1
};

using Trajectory = std::vector<TrajectorySample>;

inline void write_trajectory(const Trajectory& traj, const std::string& path) {
  for (size_t i = 1; i < traj.size(); ++i)
    if (!(traj[i].timestamp > traj[i - 1].timestamp))
      throw std::invalid_argument("timestamps not strictly increasing");
  std::ofstream os = open_output(path, false);
  char line[256];
  for (const TrajectorySample& s : traj) {
    std::snprintf(line, sizeof(line), "%.9f %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  s.timestamp, s.pose.t.x(), s.pose.t.y(), s.pose.t.z(), s.pose.q.x,
                  s.pose.q.y, s.pose.q.z, s.pose.q.w);
    os << line;
  }
  if (!os) io_error("write failure", path);
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream is = open_input(path, false);
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    std::string extra;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw) || (ss >> extra))
      throw std::runtime_error("malformed line " + std::to_string(line_no));
    const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    if (std::abs(norm - 1.0) > 1e-6)
      throw std::runtime_error("quaternion not unit at line " + std::to_string(line_no));
    if (!traj.empty() && !(t > traj.back().timestamp))
      throw std::runtime_error("timestamps not increasing at line " + std::to_string(line_no));
    TrajectorySample s;
    s.timestamp = t;
    s.pose = Sim3(Quat(qw, qx, qy, qz), Vec3(tx, ty, tz), 1.0);
    traj.push_back(s);
  }
  return traj;
}

}  // namespace voxrec
