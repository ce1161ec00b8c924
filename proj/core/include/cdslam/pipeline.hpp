#pragma once

#include <map>
#include <string>
#include <vector>

#include "cdslam/dynba.hpp"
#include "cdslam/joints.hpp"
#include "cdslam/robust.hpp"
#include "cdslam/simkit.hpp"
#include "cdslam/tracking.hpp"
#include "cdslam/worldmodel.hpp"

namespace cdslam {

struct PipelineConfig {
  RobustConfig robust;
  BAOptions ba;
  KeyframePolicy keyframes;
  JointTable joints = JointTable::Default();
  StaticityTable staticity = StaticityTable::Default();
  bool constrained = true;
  int ba_every = 5;        // frames between windowed BA runs, 0 disables
  int ba_window = 10;      // most recent temporal keyframes per BA problem
  int ba_max_spatial = 5;  // most recent spatial keyframes per BA problem
  int lost_after = 10;     // untracked frames before a cluster is dropped
  double refine_radius_px = 3.0;
  int min_object_points = 10;
  int min_road_points = 30;
  int road_fit_frame = 10;  // road plane is fitted after this frame's BA, from refined points
  RansacOptions ransac;

  /// Throws kConfigInvalid.
  void Validate() const;
};

/// One frame of front-end output: observations with segmentation labels
/// and frame-to-frame matches (previous frame -> this frame).
struct FrameInput {
  int frame_index = 0;
  double timestamp = 0.0;
  std::vector<StereoObservation> observations;
  std::vector<Match> matches;
  std::map<ClusterId, std::string> labels;
};

struct PipelineStats {
  int ba_runs = 0;
  int ba_failures = 0;
  int camera_fallbacks = 0;
  int object_failures = 0;
};

/// Per-frame tracking, map growth and windowed dynamic BA.
class Pipeline {
 public:
  Pipeline(const PinholeCamera& cam, PipelineConfig cfg, const Pose& initial_T_wc);

  void Process(const FrameInput& frame);

  const WorldMap& map() const { return map_; }
  /// Latest T_wc estimate for every processed frame.
  const std::map<int, Pose>& camera_poses() const { return camera_poses_; }
  /// Point ids that defined each dynamic cluster's object frame.
  const std::map<ClusterId, std::vector<PointId>>& creation_points() const { return creation_points_; }
  const PipelineStats& stats() const { return stats_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  Pose PredictCamera(int frame) const;
  bool TrackStatic(const std::vector<StereoObservation>& obs, std::vector<PointId>& assigned, const Pose& T_wc_init,
                   Pose* T_wc);
  int ReacquireStatic(const std::vector<StereoObservation>& obs, std::vector<PointId>& assigned,
                      const Pose& T_cw) const;
  void TrackDynamicCluster(ClusterId id, const FrameInput& frame,
                           const std::vector<std::size_t>& members, const Pose& T_cw, std::vector<PointId>& assigned);
  void CreateDynamicCluster(ClusterId id, const std::string& label, const FrameInput& frame,
                            const std::vector<std::size_t>& members, const Pose& T_wc, std::vector<PointId>& assigned);
  void MaybeFitRoad(std::uint64_t seed);
  void RunWindowedBA();

  PinholeCamera cam_;
  PipelineConfig cfg_;
  JointTable joint_table_;
  Pose initial_T_wc_;
  WorldMap map_;
  std::map<int, Pose> camera_poses_;
  std::map<ClusterId, TwistProjector> projectors_;
  std::map<ClusterId, std::vector<PointId>> creation_points_;
  std::vector<PointId> prev_assigned_;
  PipelineStats stats_;
};

}  // namespace cdslam
