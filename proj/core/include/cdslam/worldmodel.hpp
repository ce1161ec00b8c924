#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdslam/joints.hpp"
#include "cdslam/liegroup.hpp"
#include "cdslam/scenegeom.hpp"

namespace cdslam {

struct MapPoint {
  PointId id = -1;
  // World frame for static owners, object frame for dynamic owners.
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  ClusterId owner_cluster = -1;
  std::map<std::string, int> class_votes;

  /// Majority label; ties go to the lexically smallest label.
  std::string EffectiveClass() const;
};

MapPoint FuseSemanticVote(MapPoint point, const std::string& label);

struct Cluster {
  ClusterId id = -1;
  std::string class_label;
  bool is_static = true;
  std::vector<PointId> points;
  std::map<int, Pose> poses;    // T_{w,o_i}
  std::map<int, Twist> twists;  // world-frame twist that produced poses[i]
  std::optional<JointSpec> joint;
  int frames_untracked = 0;
};

struct KeyFrame {
  int frame_index = 0;
  double timestamp = 0.0;
  Pose pose;  // T_{c,w}
  std::vector<StereoObservation> observations;
  bool is_temporal = false;
  bool is_spatial = false;
};

struct KeyframePolicy {
  double temporal_window_s = 5.0;
  int covisibility_min_shared = 30;
  double redundant_overlap = 0.95;
};

/// Labels that are a priori dynamic. Everything else, "unknown" included,
/// is static.
class StaticityTable {
 public:
  static StaticityTable Default();
  explicit StaticityTable(std::set<std::string> dynamic_classes = {})
      : dynamic_classes_(std::move(dynamic_classes)) {}

  bool IsDynamic(const std::string& label) const { return dynamic_classes_.count(label) > 0; }
  const std::set<std::string>& dynamic_classes() const { return dynamic_classes_; }

 private:
  std::set<std::string> dynamic_classes_;
};

/// Semantic map. Mutations go through one owner; const access is safe to
/// share between readers.
class WorldMap {
 public:
  explicit WorldMap(KeyframePolicy policy = {}) : policy_(policy) {}

  Cluster& AddCluster(ClusterId id, std::string class_label, bool is_static);
  /// Registers a point and appends it to its owner cluster.
  MapPoint& AddPoint(PointId id, const Eigen::Vector3d& position, ClusterId owner);

  Cluster* FindCluster(ClusterId id);
  const Cluster* FindCluster(ClusterId id) const;
  MapPoint* FindPoint(PointId id);
  const MapPoint* FindPoint(PointId id) const;
  KeyFrame* FindKeyFrame(int frame_index);
  const KeyFrame* FindKeyFrame(int frame_index) const;

  /// Inserts the frame into the temporal set. Observations of unknown
  /// points are dropped so that every stored observation resolves.
  const KeyFrame& PromoteTemporalKeyframe(KeyFrame frame);

  /// Removes the temporal flag from keyframes at least `temporal_window_s`
  /// old. A non-temporal keyframe survives as spatial iff it shares at
  /// least `covisibility_min_shared` points with a temporal keyframe and
  /// its shared points with the previous spatial keyframe are less than
  /// `redundant_overlap` of the larger observation count. The rest are deleted and returned.
  std::vector<int> CullKeyframes(double now);

  /// Drops dynamic clusters untracked for more than `max_untracked` frames,
  /// together with their points and observations.
  std::vector<ClusterId> DropLostClusters(int max_untracked);

  std::vector<int> TemporalKeyframes() const;
  std::vector<int> SpatialKeyframes() const;
  int SharedPoints(const KeyFrame& a, const KeyFrame& b) const;

  /// Checks the partition, frame-index coherence and referential integrity.
  bool CheckInvariants(std::string* why = nullptr) const;

  const std::map<ClusterId, Cluster>& clusters() const { return clusters_; }
  std::map<ClusterId, Cluster>& clusters() { return clusters_; }
  const std::map<PointId, MapPoint>& points() const { return points_; }
  const std::map<int, KeyFrame>& keyframes() const { return keyframes_; }
  std::map<int, KeyFrame>& keyframes() { return keyframes_; }
  const KeyframePolicy& policy() const { return policy_; }

  std::optional<PlaneModel> road_plane;

 private:
  KeyframePolicy policy_;
  std::map<ClusterId, Cluster> clusters_;
  std::map<PointId, MapPoint> points_;
  std::map<int, KeyFrame> keyframes_;
};

/// Versioned JSON text for golden-file comparisons.
std::string SerializeMap(const WorldMap& map);
WorldMap DeserializeMap(const std::string& text);

}  // namespace cdslam
