#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdslam/metrics.hpp"
#include "cdslam/pipeline.hpp"
#include "cdslam/simkit.hpp"

namespace cdslam {

struct ObjectReport {
  ClusterId id = -1;
  std::string class_label;
  std::string joint;
  int frames_tracked = 0;
  double ate = 0.0;
  double rpe_t = 0.0;
  double rpe_r_deg = 0.0;
  double out_of_plane_drift = 0.0;
  double twist_error_mean = 0.0;  // GT joint frame, per frame
  double twist_error_max = 0.0;
  double mean_speed_kmh = 0.0;
  double gt_mean_speed_kmh = 0.0;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  int n_frames = 0;
  bool constrained = true;
  double camera_ate = 0.0;
  double camera_rpe_t = 0.0;
  double camera_rpe_r_deg = 0.0;
  std::vector<ObjectReport> objects;
  PipelineStats stats;
  double runtime_s = 0.0;
};

/// Everything an experiment produces, for callers that need more than the
/// summary numbers.
struct ExperimentOutput {
  ExperimentReport report;
  GroundTruth gt;
  Trajectory camera_est;
  Trajectory camera_gt;
  std::map<ClusterId, Trajectory> object_est;
  std::map<ClusterId, Trajectory> object_gt;  // re-anchored to the estimator's object frame
  std::map<ClusterId, std::map<int, Vector6d>> object_twists_joint;  // estimator joint frame
  WorldMap map;
};

/// Simulates the scene frame by frame through the pipeline and evaluates
/// against ground truth. The pipeline starts from the true first camera
/// pose, which fixes the world frame.
ExperimentOutput RunExperiment(const SceneConfig& scene, const PipelineConfig& pipeline);

/// Runs from config files and writes trajectories, report.txt,
/// runtime.txt and, with `write_csv`, the per-frame CSV tables.
ExperimentReport RunExperimentFiles(const std::filesystem::path& scene_path,
                                    const std::filesystem::path& pipeline_path,
                                    const std::filesystem::path& out_dir, bool write_csv = true);

void WriteExperimentOutputs(const ExperimentOutput& output, const std::filesystem::path& out_dir, bool write_csv);

/// key: value text; runtime is left out so reruns compare byte for byte.
std::string FormatReport(const ExperimentReport& report);

std::string CameraMetricsCsv(const ExperimentOutput& output);
std::string ObjectTwistsCsv(const ExperimentOutput& output, ClusterId id);

/// Body-origin speed between consecutive poses.
double SpeedKmh(const Pose& previous, const Pose& current, double frame_rate);

}  // namespace cdslam
