#include "cdslam/trajectory_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "cdslam/error.hpp"

namespace cdslam {

std::string FormatTrajectory(const Trajectory& trajectory, const std::string& comment) {
  std::string out;
  if (!comment.empty()) out += "# " + comment + "\n";
  out += "# timestamp tx ty tz qx qy qz qw\n";
  char line[256];
  for (const auto& e : trajectory.entries()) {
    Eigen::Quaterniond q(e.pose.rotation());
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Eigen::Vector3d& t = e.pose.translation();
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", e.timestamp, t.x(), t.y(),
                  t.z(), q.x(), q.y(), q.z(), q.w());
    out += line;
  }
  return out;
}

Trajectory ParseTrajectory(const std::string& text) {
  Trajectory trajectory;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double v[8];
    for (double& x : v) {
      if (!(fields >> x)) throw Error(ErrorCode::kIo, "line " + std::to_string(line_no) + ": expected 8 numbers");
    }
    std::string extra;
    if (fields >> extra) throw Error(ErrorCode::kIo, "line " + std::to_string(line_no) + ": trailing fields");
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-9) throw Error(ErrorCode::kIo, "line " + std::to_string(line_no) + ": zero quaternion");
    q.normalize();
    trajectory.Append(v[0], Pose(q.toRotationMatrix(), Eigen::Vector3d(v[1], v[2], v[3])));
  }
  return trajectory;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void WriteTrajectory(const std::filesystem::path& path, const Trajectory& trajectory, const std::string& comment) {
  WriteTextFile(path, FormatTrajectory(trajectory, comment));
}

Trajectory ReadTrajectory(const std::filesystem::path& path) { return ParseTrajectory(ReadTextFile(path)); }

}  // namespace cdslam
