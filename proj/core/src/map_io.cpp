#include <nlohmann/json.hpp>

#include "cdslam/error.hpp"
#include "cdslam/worldmodel.hpp"

namespace cdslam {
namespace {

using nlohmann::json;

constexpr int kMapFormatVersion = 1;

json PoseToJson(const Pose& pose) {
  const Eigen::Matrix<double, 3, 4> m = pose.matrix3x4();
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Pose PoseFromJson(const json& rows) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = rows.at(r).at(c).get<double>();
  }
  return Pose::FromMatrix(m);
}

json VecToJson(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

std::string SerializeMap(const WorldMap& map) {
  json root;
  root["format"] = "cdslam-map";
  root["version"] = kMapFormatVersion;
  root["policy"] = {{"temporal_window_s", map.policy().temporal_window_s},
                    {"covisibility_min_shared", map.policy().covisibility_min_shared},
                    {"redundant_overlap", map.policy().redundant_overlap}};
  if (map.road_plane) root["road_plane"] = VecToJson(map.road_plane->pi);

  json clusters = json::array();
  for (const auto& [id, cluster] : map.clusters()) {
    json c;
    c["id"] = id;
    c["class"] = cluster.class_label;
    c["static"] = cluster.is_static;
    c["points"] = cluster.points;
    c["frames_untracked"] = cluster.frames_untracked;
    json poses = json::array();
    for (const auto& [frame, pose] : cluster.poses) {
      poses.push_back({{"frame", frame},
                       {"pose", PoseToJson(pose)},
                       {"twist", VecToJson(cluster.twists.at(frame).vector())}});
    }
    c["history"] = poses;
    if (cluster.joint) {
      c["joint"] = {{"type", ToString(cluster.joint->type)},
                    {"parent", cluster.joint->parent_class},
                    {"frame", PoseToJson(cluster.joint->frame)}};
    }
    clusters.push_back(c);
  }
  root["clusters"] = clusters;

  json points = json::array();
  for (const auto& [id, point] : map.points()) {
    points.push_back({{"id", id},
                      {"owner", point.owner_cluster},
                      {"position", VecToJson(point.position)},
                      {"votes", point.class_votes}});
  }
  root["points"] = points;

  json keyframes = json::array();
  for (const auto& [index, kf] : map.keyframes()) {
    json obs = json::array();
    for (const auto& o : kf.observations) {
      obs.push_back({o.point_id, o.cluster_id, o.u, o.v, o.disparity});
    }
    keyframes.push_back({{"frame", index},
                         {"timestamp", kf.timestamp},
                         {"temporal", kf.is_temporal},
                         {"spatial", kf.is_spatial},
                         {"pose", PoseToJson(kf.pose)},
                         {"observations", obs}});
  }
  root["keyframes"] = keyframes;
  return root.dump(1) + "\n";
}

WorldMap DeserializeMap(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("map parse failed: ") + e.what());
  }
  if (root.value("format", "") != "cdslam-map" || root.value("version", 0) != kMapFormatVersion) {
    throw Error(ErrorCode::kIo, "unsupported map format");
  }
  try {
    KeyframePolicy policy;
    policy.temporal_window_s = root.at("policy").at("temporal_window_s").get<double>();
    policy.covisibility_min_shared = root.at("policy").at("covisibility_min_shared").get<int>();
    policy.redundant_overlap = root.at("policy").at("redundant_overlap").get<double>();
    WorldMap map(policy);
    if (root.contains("road_plane")) {
      const auto& pi = root["road_plane"];
      map.road_plane = PlaneModel{Eigen::Vector4d(pi[0], pi[1], pi[2], pi[3])};
    }
    for (const auto& c : root.at("clusters")) {
      Cluster& cluster = map.AddCluster(c.at("id").get<ClusterId>(), c.at("class").get<std::string>(),
                                        c.at("static").get<bool>());
      cluster.frames_untracked = c.at("frames_untracked").get<int>();
      for (const auto& h : c.at("history")) {
        const int frame = h.at("frame").get<int>();
        cluster.poses[frame] = PoseFromJson(h.at("pose"));
        Vector6d xi;
        for (int k = 0; k < 6; ++k) xi[k] = h.at("twist").at(k).get<double>();
        cluster.twists[frame] = Twist(xi);
      }
      if (c.contains("joint")) {
        const auto& j = c["joint"];
        JointSpec spec = MakeJoint(ParseJointType(j.at("type").get<std::string>()),
                                   PoseFromJson(j.at("frame")));
        spec.parent_class = j.at("parent").get<std::string>();
        spec.child_class = cluster.class_label;
        cluster.joint = spec;
      }
    }
    for (const auto& p : root.at("points")) {
      const auto& pos = p.at("position");
      MapPoint& point = map.AddPoint(p.at("id").get<PointId>(), Eigen::Vector3d(pos[0], pos[1], pos[2]),
                                     p.at("owner").get<ClusterId>());
      point.class_votes = p.at("votes").get<std::map<std::string, int>>();
    }
    // Restore cluster point order exactly as serialized.
    for (const auto& c : root.at("clusters")) {
      map.FindCluster(c.at("id").get<ClusterId>())->points = c.at("points").get<std::vector<PointId>>();
    }
    for (const auto& k : root.at("keyframes")) {
      KeyFrame kf;
      kf.frame_index = k.at("frame").get<int>();
      kf.timestamp = k.at("timestamp").get<double>();
      kf.pose = PoseFromJson(k.at("pose"));
      for (const auto& o : k.at("observations")) {
        StereoObservation obs;
        obs.point_id = o[0].get<PointId>();
        obs.cluster_id = o[1].get<ClusterId>();
        obs.u = o[2].get<double>();
        obs.v = o[3].get<double>();
        obs.disparity = o[4].get<double>();
        obs.frame_index = kf.frame_index;
        kf.observations.push_back(obs);
      }
      const bool temporal = k.at("temporal").get<bool>();
      const bool spatial = k.at("spatial").get<bool>();
      map.PromoteTemporalKeyframe(std::move(kf));
      KeyFrame* stored = map.FindKeyFrame(k.at("frame").get<int>());
      stored->is_temporal = temporal;
      stored->is_spatial = spatial;
    }
    return map;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed map: ") + e.what());
  }
}

}  // namespace cdslam
