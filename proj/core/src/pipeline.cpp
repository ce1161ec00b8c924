#include "cdslam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>

#include "cdslam/error.hpp"

namespace cdslam {

void PipelineConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfigInvalid, what);
  };
  require(robust.IsValid(), "robust settings");
  require(ba.max_iters > 0 && ba.outer_rounds > 0 && ba.huber_delta > 0.0 && ba.const_huber_delta > 0.0,
          "bundle adjustment settings");
  require((ba.const_weights.array() >= 0.0).all(), "constant-velocity weights must be non-negative");
  require(keyframes.temporal_window_s > 0.0 && keyframes.covisibility_min_shared > 0 &&
              keyframes.redundant_overlap > 0.0 && keyframes.redundant_overlap <= 1.0,
          "keyframe policy");
  require(ba_every >= 0 && ba_window >= 3 && ba_max_spatial >= 0, "bundle adjustment cadence");
  require(lost_after >= 0 && min_object_points >= kMinObjectMatches && min_road_points >= 3,
          "cluster thresholds");
  require(refine_radius_px >= 0.0, "refine radius");
  require(road_fit_frame >= 0, "road fit frame");
  require(ransac.max_iters > 0 && ransac.inlier_tol > 0.0, "ransac settings");
}

Pipeline::Pipeline(const PinholeCamera& cam, PipelineConfig cfg, const Pose& initial_T_wc)
    : cam_(cam), cfg_(std::move(cfg)), initial_T_wc_(initial_T_wc), map_(cfg_.keyframes) {
  cfg_.Validate();
  joint_table_ = cfg_.constrained ? cfg_.joints : cfg_.joints.Unconstrained();
}

Pose Pipeline::PredictCamera(int frame) const {
  auto last = camera_poses_.find(frame - 1);
  if (last == camera_poses_.end()) {
    return camera_poses_.empty() ? initial_T_wc_ : camera_poses_.rbegin()->second;
  }
  auto before = camera_poses_.find(frame - 2);
  if (before == camera_poses_.end()) return last->second;
  // Constant velocity in the body frame.
  return (last->second * (before->second.inverse() * last->second)).Orthonormalized();
}

void Pipeline::MaybeFitRoad(std::uint64_t seed) {
  if (map_.road_plane) return;
  std::vector<Eigen::Vector3d> road;
  for (const auto& [id, point] : map_.points()) {
    if (point.EffectiveClass() == "road") road.push_back(point.position);
  }
  if (static_cast<int>(road.size()) < cfg_.min_road_points) return;
  RansacOptions options = cfg_.ransac;
  options.seed ^= seed;
  try {
    const RansacPlaneResult fit = FitPlaneRansac(road, options);
    map_.road_plane = CanonicalizePlane(fit.plane.pi);
  } catch (const Error&) {
    // Keep trying on later frames.
  }
}

bool Pipeline::TrackStatic(const std::vector<StereoObservation>& obs, std::vector<PointId>& assigned,
                           const Pose& T_wc_init, Pose* T_wc) {
  std::vector<StaticCorrespondence> corr;
  std::vector<std::size_t> corr_obs;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (assigned[j] < 0) continue;
    const MapPoint* point = map_.FindPoint(assigned[j]);
    const Cluster* owner = point ? map_.FindCluster(point->owner_cluster) : nullptr;
    if (!owner || !owner->is_static) continue;
    corr.push_back({assigned[j], point->position, obs[j].uv()});
    corr_obs.push_back(j);
  }
  try {
    const TrackResult<Pose> tracked = TrackCamera(corr, cam_, T_wc_init.inverse(), cfg_.robust);
    *T_wc = tracked.estimate.inverse().Orthonormalized();
    for (std::size_t k = 0; k < corr_obs.size(); ++k) {
      if (!tracked.inliers[k]) assigned[corr_obs[k]] = -1;
    }
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Static points whose track broke (a rejected or missing match) are found
// again by projecting them into the tracked frame.
int Pipeline::ReacquireStatic(const std::vector<StereoObservation>& obs, std::vector<PointId>& assigned,
                              const Pose& T_cw) const {
  const double radius = cfg_.refine_radius_px;
  if (radius <= 0.0) return 0;
  std::set<PointId> taken;
  for (PointId id : assigned) {
    if (id >= 0) taken.insert(id);
  }
  using Cell = std::pair<long, long>;
  auto cell_of = [radius](double u, double v) {
    return Cell{static_cast<long>(std::floor(u / radius)), static_cast<long>(std::floor(v / radius))};
  };
  struct Projected {
    PointId id;
    ClusterId owner;
    Eigen::Vector3d uvd;
  };
  std::map<Cell, std::vector<Projected>> grid;
  for (const auto& [id, point] : map_.points()) {
    if (taken.count(id)) continue;
    const Cluster* owner = map_.FindCluster(point.owner_cluster);
    if (!owner || !owner->is_static) continue;
    const Eigen::Vector3d p_c = T_cw * point.position;
    if (p_c.z() <= kMinDepth) continue;
    const Eigen::Vector2d uv = ProjectCameraPoint(cam_, p_c);
    if (uv.x() < 0.0 || uv.y() < 0.0 || uv.x() >= cam_.width || uv.y() >= cam_.height) continue;
    grid[cell_of(uv.x(), uv.y())].push_back({id, point.owner_cluster, {uv.x(), uv.y(), cam_.fx * cam_.baseline / p_c.z()}});
  }
  // Nearest candidate per observation, then one observation per point.
  std::map<PointId, std::pair<double, std::size_t>> best;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (assigned[j] >= 0) continue;
    const Cell c = cell_of(obs[j].u, obs[j].v);
    double best_d = radius;
    PointId best_id = -1;
    for (long du = -1; du <= 1; ++du) {
      for (long dv = -1; dv <= 1; ++dv) {
        auto it = grid.find({c.first + du, c.second + dv});
        if (it == grid.end()) continue;
        for (const auto& cand : it->second) {
          if (cand.owner != obs[j].cluster_id) continue;
          const double d = std::hypot(cand.uvd.x() - obs[j].u, cand.uvd.y() - obs[j].v);
          if (d < best_d && std::abs(cand.uvd.z() - obs[j].disparity) < radius) {
            best_d = d;
            best_id = cand.id;
          }
        }
      }
    }
    if (best_id < 0) continue;
    auto [it, inserted] = best.try_emplace(best_id, best_d, j);
    if (!inserted && best_d < it->second.first) it->second = {best_d, j};
  }
  for (const auto& [id, hit] : best) assigned[hit.second] = id;
  return static_cast<int>(best.size());
}

void Pipeline::Process(const FrameInput& frame) {
  const int f = frame.frame_index;
  const auto& obs = frame.observations;
  std::vector<PointId> assigned(obs.size(), -1);
  for (const auto& m : frame.matches) {
    if (m.prev < prev_assigned_.size() && m.curr < obs.size() && prev_assigned_[m.prev] >= 0 &&
        assigned[m.curr] < 0 && map_.FindPoint(prev_assigned_[m.prev])) {
      assigned[m.curr] = prev_assigned_[m.prev];
    }
  }
  auto label_of = [&](ClusterId id) {
    auto it = frame.labels.find(id);
    return it == frame.labels.end() ? std::string("unknown") : it->second;
  };
  auto is_static_label = [&](const std::string& label) { return !cfg_.staticity.IsDynamic(label); };

  // Camera from static map points only: the owner check is the filter.
  Pose T_wc = initial_T_wc_;
  if (f > 0 || !camera_poses_.empty()) {
    const Pose predicted = PredictCamera(f);
    if (TrackStatic(obs, assigned, predicted, &T_wc)) {
      if (ReacquireStatic(obs, assigned, T_wc.inverse()) > 0) TrackStatic(obs, assigned, T_wc, &T_wc);
    } else {
      ++stats_.camera_fallbacks;
      T_wc = predicted;
    }
  }
  camera_poses_[f] = T_wc;
  const Pose T_cw = T_wc.inverse();

  // Static map growth and semantic votes.
  std::map<ClusterId, std::vector<std::size_t>> dynamic_members;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const std::string label = label_of(obs[j].cluster_id);
    if (!is_static_label(label)) {
      dynamic_members[obs[j].cluster_id].push_back(j);
      continue;
    }
    if (assigned[j] >= 0) continue;
    if (map_.FindPoint(obs[j].point_id)) continue;  // known point whose match was lost or rejected
    Eigen::Vector3d p_c;
    try {
      p_c = TriangulateStereo(cam_, obs[j]);
    } catch (const Error&) {
      continue;
    }
    if (!map_.FindCluster(obs[j].cluster_id)) map_.AddCluster(obs[j].cluster_id, label, true);
    map_.AddPoint(obs[j].point_id, T_wc * p_c, obs[j].cluster_id);
    assigned[j] = obs[j].point_id;
  }
  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (assigned[j] < 0) continue;
    if (MapPoint* point = map_.FindPoint(assigned[j])) ++point->class_votes[label_of(obs[j].cluster_id)];
  }

  for (const auto& [id, members] : dynamic_members) {
    const std::string label = label_of(id);
    if (map_.FindCluster(id)) {
      TrackDynamicCluster(id, frame, members, T_cw, assigned);
    } else {
      CreateDynamicCluster(id, label, frame, members, T_wc, assigned);
    }
  }
  for (auto& [id, cluster] : map_.clusters()) {
    if (!cluster.is_static && !cluster.poses.count(f)) ++cluster.frames_untracked;
  }
  for (ClusterId id : map_.DropLostClusters(cfg_.lost_after)) projectors_.erase(id);

  KeyFrame kf;
  kf.frame_index = f;
  kf.timestamp = frame.timestamp;
  kf.pose = T_cw;
  for (std::size_t j = 0; j < obs.size(); ++j) {
    if (assigned[j] < 0) continue;
    const MapPoint* point = map_.FindPoint(assigned[j]);
    if (!point) {  // owner cluster was just dropped
      assigned[j] = -1;
      continue;
    }
    StereoObservation o = obs[j];
    o.point_id = assigned[j];
    o.cluster_id = point->owner_cluster;
    kf.observations.push_back(o);
  }
  map_.PromoteTemporalKeyframe(std::move(kf));
  map_.CullKeyframes(frame.timestamp);

  if (cfg_.ba_every > 0 && f > 0 && f % cfg_.ba_every == 0) RunWindowedBA();
  if (f >= cfg_.road_fit_frame) MaybeFitRoad(static_cast<std::uint64_t>(f));
  prev_assigned_ = std::move(assigned);
}

void Pipeline::TrackDynamicCluster(ClusterId id, const FrameInput& frame, const std::vector<std::size_t>& members,
                                   const Pose& T_cw, std::vector<PointId>& assigned) {
  Cluster& cluster = *map_.FindCluster(id);
  const auto& obs = frame.observations;
  const int f = frame.frame_index;

  std::vector<ObjectMatch> matches;
  std::vector<std::size_t> match_obs;
  std::vector<Eigen::Vector2d> candidates;
  std::vector<std::size_t> candidate_obs;
  for (std::size_t j : members) {
    const MapPoint* point = assigned[j] >= 0 ? map_.FindPoint(assigned[j]) : nullptr;
    if (point && point->owner_cluster == id) {
      matches.push_back({assigned[j], point->position, obs[j].uv()});
      match_obs.push_back(j);
    } else {
      assigned[j] = -1;
      candidates.push_back(obs[j].uv());
      candidate_obs.push_back(j);
    }
  }

  const auto last = std::prev(cluster.poses.end());
  ObjectTrackInput input;
  input.T_wo_prev = last->second;
  input.T_cw = T_cw;
  input.projector = projectors_.at(id);
  input.initial = cluster.twists.at(last->first);
  input.coast_twist = input.initial;

  ObjectTrackResult result;
  try {
    result = TrackObjectTwist(matches, input, cam_, cfg_.robust);
    result = RefineWithMapProjection(result, [&] {
      std::vector<ObjectPoint> points;
      for (PointId pid : cluster.points) points.push_back({pid, map_.FindPoint(pid)->position});
      return points;
    }(), candidates, cfg_.refine_radius_px, input, cam_, cfg_.robust);
  } catch (const Error&) {
    ++stats_.object_failures;
    return;
  }

  for (std::size_t k = 0; k < match_obs.size(); ++k) {
    if (!result.coasted && !result.inliers[k]) assigned[match_obs[k]] = -1;
  }
  // Matches appended by the refinement carry a candidate pixel verbatim.
  for (std::size_t k = match_obs.size(); k < result.matches.size(); ++k) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (candidates[c] == result.matches[k].uv && assigned[candidate_obs[c]] < 0) {
        if (result.inliers[k]) assigned[candidate_obs[c]] = result.matches[k].point_id;
        break;
      }
    }
  }

  cluster.poses[f] = result.pose;
  cluster.twists[f] = result.estimate;
  cluster.frames_untracked = 0;

  // New object points, expressed in the freshly estimated object frame.
  const Pose T_wc = T_cw.inverse();
  const Pose T_ow_new = result.pose.inverse();
  for (std::size_t j : members) {
    if (assigned[j] >= 0 || map_.FindPoint(obs[j].point_id)) continue;
    try {
      const Eigen::Vector3d p_w = T_wc * TriangulateStereo(cam_, obs[j]);
      map_.AddPoint(obs[j].point_id, T_ow_new * p_w, id);
      assigned[j] = obs[j].point_id;
    } catch (const Error&) {
    }
  }
}

void Pipeline::CreateDynamicCluster(ClusterId id, const std::string& label, const FrameInput& frame,
                                    const std::vector<std::size_t>& members, const Pose& T_wc,
                                    std::vector<PointId>& assigned) {
  // A road-borne object waits for the road plane so that its joint exists
  // from its first pose.
  const JointTable::Entry entry = joint_table_.Lookup(label);
  if (entry.parent_class == "road" && !map_.road_plane) return;

  const auto& obs = frame.observations;
  std::vector<std::pair<std::size_t, Eigen::Vector3d>> triangulated;
  for (std::size_t j : members) {
    if (map_.FindPoint(obs[j].point_id)) continue;
    try {
      triangulated.emplace_back(j, T_wc * TriangulateStereo(cam_, obs[j]));
    } catch (const Error&) {
    }
  }
  if (static_cast<int>(triangulated.size()) < cfg_.min_object_points) return;

  // Mislabelled or gross-outlier pixels triangulate far from the body; drop
  // points beyond a MAD-style radius around the component-wise median.
  Eigen::Vector3d median;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> values;
    for (const auto& [j, p] : triangulated) values.push_back(p[k]);
    median[k] = Median(values);
  }
  std::vector<double> dist;
  for (const auto& [j, p] : triangulated) dist.push_back((p - median).norm());
  const double keep_radius = 3.0 * cfg_.robust.mad_scale * Median(dist);
  std::erase_if(triangulated, [&](const auto& entry) { return (entry.second - median).norm() > keep_radius; });
  if (static_cast<int>(triangulated.size()) < cfg_.min_object_points) return;

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& [j, p] : triangulated) centroid += p;
  centroid /= static_cast<double>(triangulated.size());

  Cluster& cluster = map_.AddCluster(id, label, false);
  const Pose T_wo = Pose::FromTranslation(centroid);
  cluster.poses[frame.frame_index] = T_wo;
  cluster.twists[frame.frame_index] = Twist::Zero();

  JointType type = entry.type;
  if (entry.parent_class != "road" || !map_.road_plane) type = JointType::kFree;
  JointSpec joint = map_.road_plane ? JointFromPlane(*map_.road_plane, type, centroid)
                                    : MakeJoint(JointType::kFree, T_wo);
  joint.parent_class = entry.parent_class;
  joint.child_class = label;
  cluster.joint = joint;
  projectors_[id] = ConjugatedProjector(joint);

  std::vector<PointId>& creation = creation_points_[id];
  for (const auto& [j, p] : triangulated) {
    map_.AddPoint(obs[j].point_id, p - centroid, id);
    assigned[j] = obs[j].point_id;
    creation.push_back(obs[j].point_id);
  }
}

void Pipeline::RunWindowedBA() {
  std::vector<int> temporal = map_.TemporalKeyframes();
  if (static_cast<int>(temporal.size()) > cfg_.ba_window) {
    temporal.erase(temporal.begin(), temporal.end() - cfg_.ba_window);
  }
  std::vector<int> spatial = map_.SpatialKeyframes();
  if (static_cast<int>(spatial.size()) > cfg_.ba_max_spatial) {
    spatial.erase(spatial.begin(), spatial.end() - cfg_.ba_max_spatial);
  }
  try {
    BAProblem problem = BuildProblem(map_, cam_, temporal, spatial, cfg_.ba);
    SolveBA(problem, cfg_.ba);
    FoldTwists(problem);
    WriteBack(problem, map_);
    for (const auto& c : problem.cameras) camera_poses_[c.frame_index] = c.T_cw.inverse();
    ++stats_.ba_runs;
  } catch (const Error&) {
    ++stats_.ba_failures;
  }
}

}  // namespace cdslam
