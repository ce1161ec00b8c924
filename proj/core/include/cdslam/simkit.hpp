#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdslam/joints.hpp"
#include "cdslam/liegroup.hpp"
#include "cdslam/scenegeom.hpp"

namespace cdslam {

// Synthetic stereo scenes. World is z-up with the road at z = 0; frame 0
// is the first pose. Pose i of a scripted body is exp(xi_i) * pose_{i-1}
// where xi_i is the segment twist active at frame i.

/// Piecewise-constant twist: applies to frames first..last inclusive.
struct TwistSegment {
  int first_frame = 1;
  int last_frame = 1 << 30;
  Twist twist;
};

struct StaticClusterSpec {
  ClusterId id = 0;
  std::string class_label;
  int n_points = 0;
  // Points are uniform in the axis-aligned box center +- extent / 2.
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d extent = Eigen::Vector3d::Zero();
};

struct ObjectScript {
  ClusterId id = 0;
  std::string class_label = "car";
  JointType joint = JointType::kPlanar;
  Pose initial_pose;                   // T_wo at frame 0, box center
  std::vector<TwistSegment> schedule;  // joint-frame twists
  Eigen::Vector3d bbox = Eigen::Vector3d(4.0, 1.8, 1.5);
  int n_points = 80;
  // Object-frame points; sampled on the box faces when empty.
  std::vector<Eigen::Vector3d> points;
};

struct SceneConfig {
  std::uint64_t seed = 0;
  int n_frames = 100;
  double frame_rate = 10.0;
  PinholeCamera camera;
  Pose camera_initial;                    // T_wc at frame 0
  std::vector<TwistSegment> camera_path;  // body-frame camera twists
  PlaneModel road_plane;
  std::vector<StaticClusterSpec> static_clusters;
  std::vector<ObjectScript> dynamic_objects;
  double pixel_noise_sigma = 0.5;
  double outlier_fraction = 0.0;
  double association_corruption = 0.0;
  double far_spawn_distance = 30.0;

  /// Throws kConfigInvalid.
  void Validate() const;
};

struct GtPoint {
  PointId id = -1;
  ClusterId cluster = -1;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, or object frame if dynamic
};

struct GtObject {
  ClusterId id = -1;
  std::string class_label;
  JointSpec joint;
  std::vector<Pose> poses;          // T_wo per frame
  std::vector<Twist> world_twists;  // twist that produced poses[i]; zero at frame 0
  std::vector<Twist> joint_twists;
};

struct GroundTruth {
  double frame_rate = 10.0;
  std::vector<Pose> camera_poses;  // T_wc per frame
  std::vector<GtPoint> points;     // sorted by id
  std::vector<GtObject> objects;
  std::map<ClusterId, std::string> cluster_labels;
  std::vector<PlaneModel> road_planes;  // per frame

  double Timestamp(int frame) const { return frame / frame_rate; }
  const GtObject* FindObject(ClusterId id) const;
  /// World position of a point at a frame.
  Eigen::Vector3d WorldPoint(const GtPoint& point, int frame) const;
};

/// Independent generator per (seed, channel, frame) so that toggling one
/// random channel leaves the others unchanged.
std::mt19937_64 Substream(std::uint64_t seed, std::string_view channel, std::uint64_t index);

/// Twist active at `frame` in a schedule (zero outside all segments).
Twist ScheduledTwist(const std::vector<TwistSegment>& schedule, int frame);

/// Box-surface samples, object frame centered on the box.
std::vector<Eigen::Vector3d> SampleBoxSurface(const Eigen::Vector3d& bbox, int n, std::mt19937_64& rng);

GroundTruth GenerateScene(const SceneConfig& cfg);

/// Noisy stereo observations of the visible points at one frame, sorted by
/// point id. Outliers keep their ids but get uniform pixels.
std::vector<StereoObservation> RenderObservations(const GroundTruth& gt, int frame, const SceneConfig& cfg);

struct Match {
  std::size_t prev = 0;
  std::size_t curr = 0;
};

/// Id-based matches prev -> curr; a fraction `association_corruption` is
/// rewired to another observation of the same cluster.
std::vector<Match> Associate(std::span<const StereoObservation> prev, std::span<const StereoObservation> curr,
                             const SceneConfig& cfg, int frame);

/// Street scene: road and building points, three cars on the road.
SceneConfig DefaultScene(std::uint64_t seed);

/// Default scene with a single parked car and no moving traffic.
SceneConfig ParkedCarScene(std::uint64_t seed);

}  // namespace cdslam
