#include "cdslam/worldmodel.hpp"

#include <algorithm>

#include "cdslam/error.hpp"

namespace cdslam {

std::string MapPoint::EffectiveClass() const {
  std::string best;
  int best_count = 0;
  for (const auto& [label, count] : class_votes) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

MapPoint FuseSemanticVote(MapPoint point, const std::string& label) {
  ++point.class_votes[label];
  return point;
}

StaticityTable StaticityTable::Default() {
  return StaticityTable({"car", "bus", "bike", "pedestrian"});
}

Cluster& WorldMap::AddCluster(ClusterId id, std::string class_label, bool is_static) {
  Cluster& cluster = clusters_[id];
  cluster.id = id;
  cluster.class_label = std::move(class_label);
  cluster.is_static = is_static;
  return cluster;
}

MapPoint& WorldMap::AddPoint(PointId id, const Eigen::Vector3d& position, ClusterId owner) {
  auto cluster = clusters_.find(owner);
  if (cluster == clusters_.end()) {
    throw Error(ErrorCode::kConfigInvalid, "point " + std::to_string(id) + " has unknown owner");
  }
  auto [it, inserted] = points_.try_emplace(id);
  MapPoint& point = it->second;
  point.id = id;
  point.position = position;
  point.owner_cluster = owner;
  if (inserted) cluster->second.points.push_back(id);
  return point;
}

Cluster* WorldMap::FindCluster(ClusterId id) {
  auto it = clusters_.find(id);
  return it == clusters_.end() ? nullptr : &it->second;
}

const Cluster* WorldMap::FindCluster(ClusterId id) const {
  auto it = clusters_.find(id);
  return it == clusters_.end() ? nullptr : &it->second;
}

MapPoint* WorldMap::FindPoint(PointId id) {
  auto it = points_.find(id);
  return it == points_.end() ? nullptr : &it->second;
}

const MapPoint* WorldMap::FindPoint(PointId id) const {
  auto it = points_.find(id);
  return it == points_.end() ? nullptr : &it->second;
}

KeyFrame* WorldMap::FindKeyFrame(int frame_index) {
  auto it = keyframes_.find(frame_index);
  return it == keyframes_.end() ? nullptr : &it->second;
}

const KeyFrame* WorldMap::FindKeyFrame(int frame_index) const {
  auto it = keyframes_.find(frame_index);
  return it == keyframes_.end() ? nullptr : &it->second;
}

const KeyFrame& WorldMap::PromoteTemporalKeyframe(KeyFrame frame) {
  std::erase_if(frame.observations,
                [this](const StereoObservation& obs) { return points_.count(obs.point_id) == 0; });
  frame.is_temporal = true;
  KeyFrame& stored = keyframes_[frame.frame_index];
  stored = std::move(frame);
  return stored;
}

int WorldMap::SharedPoints(const KeyFrame& a, const KeyFrame& b) const {
  std::vector<PointId> ids_a;
  std::vector<PointId> ids_b;
  for (const auto& obs : a.observations) ids_a.push_back(obs.point_id);
  for (const auto& obs : b.observations) ids_b.push_back(obs.point_id);
  std::sort(ids_a.begin(), ids_a.end());
  std::sort(ids_b.begin(), ids_b.end());
  ids_a.erase(std::unique(ids_a.begin(), ids_a.end()), ids_a.end());
  ids_b.erase(std::unique(ids_b.begin(), ids_b.end()), ids_b.end());
  std::vector<PointId> common;
  std::set_intersection(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(),
                        std::back_inserter(common));
  return static_cast<int>(common.size());
}

std::vector<int> WorldMap::CullKeyframes(double now) {
  // A small slack keeps frame timestamps like i / rate from straddling the
  // window edge through rounding.
  constexpr double kSlack = 1e-9;
  for (auto& [index, kf] : keyframes_) {
    if (kf.is_temporal && now - kf.timestamp >= policy_.temporal_window_s - kSlack) {
      kf.is_temporal = false;
    }
  }

  std::vector<const KeyFrame*> retained;
  for (const auto& [index, kf] : keyframes_) {
    if (kf.is_temporal) retained.push_back(&kf);
  }

  // Oldest to newest, so earlier skeleton frames stay put as the window
  // slides. A frame that mostly sees the same points as the previous kept
  // spatial frame adds nothing.
  std::vector<int> evicted;
  const KeyFrame* last_kept = nullptr;
  for (auto& [index, kf] : keyframes_) {
    if (kf.is_temporal) continue;
    const bool covisible = std::any_of(retained.begin(), retained.end(), [&](const KeyFrame* other) {
      return SharedPoints(kf, *other) >= policy_.covisibility_min_shared;
    });
    bool redundant = false;
    if (covisible && last_kept != nullptr) {
      const auto larger = std::max(kf.observations.size(), last_kept->observations.size());
      const double overlap = static_cast<double>(SharedPoints(kf, *last_kept)) / std::max<std::size_t>(larger, 1);
      redundant = overlap >= policy_.redundant_overlap;
    }
    kf.is_spatial = covisible && !redundant;
    if (kf.is_spatial) {
      last_kept = &kf;
    } else {
      evicted.push_back(index);
    }
  }
  for (int index : evicted) keyframes_.erase(index);
  return evicted;
}

std::vector<ClusterId> WorldMap::DropLostClusters(int max_untracked) {
  std::vector<ClusterId> dropped;
  for (const auto& [id, cluster] : clusters_) {
    if (!cluster.is_static && cluster.frames_untracked > max_untracked) dropped.push_back(id);
  }
  for (ClusterId id : dropped) {
    std::set<PointId> removed(clusters_[id].points.begin(), clusters_[id].points.end());
    for (PointId pid : removed) points_.erase(pid);
    for (auto& [index, kf] : keyframes_) {
      std::erase_if(kf.observations,
                    [&](const StereoObservation& obs) { return removed.count(obs.point_id) > 0; });
    }
    clusters_.erase(id);
  }
  return dropped;
}

std::vector<int> WorldMap::TemporalKeyframes() const {
  std::vector<int> out;
  for (const auto& [index, kf] : keyframes_) {
    if (kf.is_temporal) out.push_back(index);
  }
  return out;
}

std::vector<int> WorldMap::SpatialKeyframes() const {
  std::vector<int> out;
  for (const auto& [index, kf] : keyframes_) {
    if (kf.is_spatial && !kf.is_temporal) out.push_back(index);
  }
  return out;
}

bool WorldMap::CheckInvariants(std::string* why) const {
  auto fail = [why](std::string message) {
    if (why) *why = std::move(message);
    return false;
  };
  for (const auto& [id, cluster] : clusters_) {
    if (cluster.is_static && (!cluster.poses.empty() || !cluster.twists.empty())) {
      return fail("static cluster " + std::to_string(id) + " has a pose history");
    }
    if (cluster.poses.size() != cluster.twists.size() ||
        !std::equal(cluster.poses.begin(), cluster.poses.end(), cluster.twists.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      return fail("cluster " + std::to_string(id) + " pose/twist frames differ");
    }
  }
  for (const auto& [id, point] : points_) {
    if (clusters_.count(point.owner_cluster) == 0) {
      return fail("point " + std::to_string(id) + " has no owner");
    }
    if (!point.position.allFinite()) return fail("point " + std::to_string(id) + " not finite");
  }
  for (const auto& [index, kf] : keyframes_) {
    if (kf.frame_index != index) return fail("keyframe key mismatch at " + std::to_string(index));
    if (kf.is_temporal && kf.is_spatial) {
      return fail("keyframe " + std::to_string(index) + " is both temporal and spatial");
    }
    for (const auto& obs : kf.observations) {
      if (points_.count(obs.point_id) == 0) {
        return fail("keyframe " + std::to_string(index) + " observes missing point " +
                    std::to_string(obs.point_id));
      }
    }
  }
  return true;
}

}  // namespace cdslam
