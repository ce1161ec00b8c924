#pragma once

#include <filesystem>
#include <string>

#include "cdslam/metrics.hpp"

namespace cdslam {

// One pose per line: "timestamp tx ty tz qx qy qz qw", 9 significant
// digits, quaternion w-last with qw >= 0. Lines starting with '#' are
// comments.

std::string FormatTrajectory(const Trajectory& trajectory, const std::string& comment = {});
/// Throws kIo on malformed lines, kConfigInvalid on non-increasing stamps.
Trajectory ParseTrajectory(const std::string& text);

void WriteTrajectory(const std::filesystem::path& path, const Trajectory& trajectory,
                     const std::string& comment = {});
Trajectory ReadTrajectory(const std::filesystem::path& path);

/// Whole-file helpers shared by the writers; throw kIo.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace cdslam
