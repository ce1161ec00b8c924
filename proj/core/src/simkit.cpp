#include "cdslam/simkit.hpp"

#include <algorithm>
#include <numbers>
#include <set>
#include <unordered_map>

#include <Eigen/Geometry>

#include "cdslam/error.hpp"

namespace cdslam {
namespace {

std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Eigen::Matrix3d CameraLooksAlongX() {
  // Columns are the camera axes in world coordinates: x right (-y world),
  // y down (-z world), z forward (+x world).
  Eigen::Matrix3d r;
  r << 0.0, 0.0, 1.0,
      -1.0, 0.0, 0.0,
       0.0, -1.0, 0.0;
  return r;
}

Pose CarPose(double x, double y, double yaw) {
  return Pose(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), Eigen::Vector3d(x, y, 0.75));
}

Twist Forward(double v_x, double yaw_rate = 0.0) {
  return Twist(Eigen::Vector3d(v_x, 0.0, 0.0), Eigen::Vector3d(0.0, 0.0, yaw_rate));
}

SceneConfig StreetBase(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.camera_initial = Pose(CameraLooksAlongX(), Eigen::Vector3d(0.0, 0.0, 1.5));
  // Body frame: +z is forward and -y is world up, so a left turn is a
  // negative rotation about the camera y axis.
  cfg.camera_path = {
      {1, 50, Twist(Eigen::Vector3d(0.0, 0.0, 0.3), Eigen::Vector3d::Zero())},
      {51, 1 << 30, Twist(Eigen::Vector3d(0.0, 0.0, 0.3), Eigen::Vector3d(0.0, -0.004, 0.0))},
  };
  cfg.static_clusters = {
      {1, "road", 600, Eigen::Vector3d(37.5, 0.0, 0.0), Eigen::Vector3d(75.0, 16.0, 0.0)},
      {2, "building", 200, Eigen::Vector3d(37.5, 11.0, 4.5), Eigen::Vector3d(75.0, 2.0, 8.0)},
      {3, "building", 200, Eigen::Vector3d(37.5, -11.0, 4.5), Eigen::Vector3d(75.0, 2.0, 8.0)},
  };
  cfg.far_spawn_distance = 40.0;
  return cfg;
}

}  // namespace

void SceneConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfigInvalid, what);
  };
  require(n_frames >= 1, "n_frames must be positive");
  require(frame_rate > 0.0, "frame_rate must be positive");
  require(camera.IsValid(), "camera intrinsics");
  require(pixel_noise_sigma >= 0.0, "pixel_noise_sigma must be non-negative");
  require(outlier_fraction >= 0.0 && outlier_fraction <= 1.0, "outlier_fraction outside [0, 1]");
  require(association_corruption >= 0.0 && association_corruption <= 1.0,
          "association_corruption outside [0, 1]");
  require(far_spawn_distance > 0.0, "far_spawn_distance must be positive");
  require(road_plane.pi.head<3>().norm() > 1e-9, "road plane normal");
  require(camera_initial.IsValid(1e-9), "camera_initial is not a rigid transform");
  std::set<ClusterId> ids;
  for (const auto& c : static_clusters) {
    require(ids.insert(c.id).second, "duplicate cluster id " + std::to_string(c.id));
    require(c.n_points >= 0 && (c.extent.array() >= 0.0).all(), "static cluster " + std::to_string(c.id));
  }
  for (const auto& o : dynamic_objects) {
    require(ids.insert(o.id).second, "duplicate cluster id " + std::to_string(o.id));
    require(o.n_points > 0 || !o.points.empty(), "object " + std::to_string(o.id) + " has no points");
    require(o.initial_pose.IsValid(1e-9), "object " + std::to_string(o.id) + " initial pose");
    for (const auto& s : o.schedule) require(s.first_frame <= s.last_frame, "twist segment frame range");
  }
  for (const auto& s : camera_path) require(s.first_frame <= s.last_frame, "camera segment frame range");
}

std::mt19937_64 Substream(std::uint64_t seed, std::string_view channel, std::uint64_t index) {
  const std::uint64_t h = Fnv1a(channel);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Twist ScheduledTwist(const std::vector<TwistSegment>& schedule, int frame) {
  for (const auto& s : schedule) {
    if (frame >= s.first_frame && frame <= s.last_frame) return s.twist;
  }
  return Twist::Zero();
}

std::vector<Eigen::Vector3d> SampleBoxSurface(const Eigen::Vector3d& bbox, int n, std::mt19937_64& rng) {
  // Faces are picked proportionally to their area.
  const Eigen::Vector3d h = bbox / 2.0;
  const std::array<double, 3> area{bbox.y() * bbox.z(), bbox.x() * bbox.z(), bbox.x() * bbox.y()};
  std::discrete_distribution<int> pick_axis(area.begin(), area.end());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution side(0.5);
  std::vector<Eigen::Vector3d> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int axis = pick_axis(rng);
    Eigen::Vector3d p(unit(rng) * h.x(), unit(rng) * h.y(), unit(rng) * h.z());
    p[axis] = side(rng) ? h[axis] : -h[axis];
    points.push_back(p);
  }
  return points;
}

const GtObject* GroundTruth::FindObject(ClusterId id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

Eigen::Vector3d GroundTruth::WorldPoint(const GtPoint& point, int frame) const {
  if (const GtObject* object = FindObject(point.cluster)) {
    return object->poses[static_cast<std::size_t>(frame)] * point.position;
  }
  return point.position;
}

GroundTruth GenerateScene(const SceneConfig& cfg) {
  cfg.Validate();
  GroundTruth gt;
  gt.frame_rate = cfg.frame_rate;
  const auto n = static_cast<std::size_t>(cfg.n_frames);

  gt.camera_poses.reserve(n);
  gt.camera_poses.push_back(cfg.camera_initial);
  for (int i = 1; i < cfg.n_frames; ++i) {
    gt.camera_poses.push_back(gt.camera_poses.back() * ExpSE3(ScheduledTwist(cfg.camera_path, i)));
  }

  PointId next_id = 0;
  for (const auto& c : cfg.static_clusters) {
    gt.cluster_labels[c.id] = c.class_label;
    auto rng = Substream(cfg.seed, "static_points", static_cast<std::uint64_t>(c.id));
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    for (int k = 0; k < c.n_points; ++k) {
      const Eigen::Vector3d offset(unit(rng) * c.extent.x(), unit(rng) * c.extent.y(), unit(rng) * c.extent.z());
      gt.points.push_back({next_id++, c.id, c.center + offset});
    }
  }

  for (const auto& script : cfg.dynamic_objects) {
    gt.cluster_labels[script.id] = script.class_label;
    GtObject object;
    object.id = script.id;
    object.class_label = script.class_label;
    object.joint = JointFromPlane(cfg.road_plane, script.joint, script.initial_pose.translation());
    object.joint.child_class = script.class_label;
    object.joint.parent_class = "road";
    const TwistProjector proj = ConjugatedProjector(object.joint);
    const Matrix6d ad_wl = Adjoint(object.joint.frame);

    object.poses.reserve(n);
    object.poses.push_back(script.initial_pose);
    object.world_twists.push_back(Twist::Zero());
    object.joint_twists.push_back(Twist::Zero());
    for (int i = 1; i < cfg.n_frames; ++i) {
      const Twist xi_l = ScheduledTwist(script.schedule, i);
      if ((proj.pi_l * xi_l.vector() - xi_l.vector()).norm() > 1e-12) {
        throw Error(ErrorCode::kConfigInvalid,
                    "object " + std::to_string(script.id) + " twist leaves the joint's freedom space");
      }
      const Twist xi_w(Vector6d(ad_wl * xi_l.vector()));
      object.poses.push_back(ExpSE3(xi_w) * object.poses.back());
      object.world_twists.push_back(xi_w);
      object.joint_twists.push_back(xi_l);
    }

    auto rng = Substream(cfg.seed, "object_points", static_cast<std::uint64_t>(script.id));
    const std::vector<Eigen::Vector3d> points =
        script.points.empty() ? SampleBoxSurface(script.bbox, script.n_points, rng) : script.points;
    for (const auto& p : points) gt.points.push_back({next_id++, script.id, p});
    gt.objects.push_back(std::move(object));
  }

  gt.road_planes.assign(n, cfg.road_plane);
  return gt;
}

std::vector<StereoObservation> RenderObservations(const GroundTruth& gt, int frame, const SceneConfig& cfg) {
  const PinholeCamera& cam = cfg.camera;
  const Pose T_cw = gt.camera_poses.at(static_cast<std::size_t>(frame)).inverse();
  const Eigen::Vector3d cam_center = gt.camera_poses[static_cast<std::size_t>(frame)].translation();
  auto noise_rng = Substream(cfg.seed, "noise", static_cast<std::uint64_t>(frame));
  auto outlier_rng = Substream(cfg.seed, "outliers", static_cast<std::uint64_t>(frame));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::unordered_map<ClusterId, bool> spawned;
  for (const auto& o : gt.objects) {
    spawned[o.id] =
        (o.poses[static_cast<std::size_t>(frame)].translation() - cam_center).norm() <= cfg.far_spawn_distance;
  }

  std::vector<StereoObservation> out;
  for (const auto& point : gt.points) {
    auto it = spawned.find(point.cluster);
    if (it != spawned.end() && !it->second) continue;
    const Eigen::Vector3d p_c = T_cw * gt.WorldPoint(point, frame);
    if (p_c.z() <= 0.1) continue;
    const double u = cam.fx * p_c.x() / p_c.z() + cam.cx;
    const double v = cam.fy * p_c.y() / p_c.z() + cam.cy;
    const double d = cam.fx * cam.baseline / p_c.z();
    if (!cam.InImage({u, v}) || d < kMinDisparity || u - d < 0.0) continue;

    StereoObservation obs;
    obs.point_id = point.id;
    obs.cluster_id = point.cluster;
    obs.frame_index = frame;
    const double nu = noise(noise_rng);
    const double nv = noise(noise_rng);
    const double nd = noise(noise_rng);
    obs.u = u;
    obs.v = v;
    obs.disparity = d;
    if (cfg.pixel_noise_sigma > 0.0) {
      obs.u += cfg.pixel_noise_sigma * nu;
      obs.v += cfg.pixel_noise_sigma * nv;
      obs.disparity += cfg.pixel_noise_sigma * nd;
    }
    const double c = coin(outlier_rng);
    const double ou = coin(outlier_rng) * cam.width;
    const double ov = coin(outlier_rng) * cam.height;
    if (c < cfg.outlier_fraction) {
      obs.u = ou;
      obs.v = ov;
    }
    out.push_back(obs);
  }
  return out;
}

std::vector<Match> Associate(std::span<const StereoObservation> prev, std::span<const StereoObservation> curr,
                             const SceneConfig& cfg, int frame) {
  std::unordered_map<PointId, std::size_t> by_id;
  std::map<ClusterId, std::vector<std::size_t>> by_cluster;
  for (std::size_t j = 0; j < curr.size(); ++j) {
    by_id[curr[j].point_id] = j;
    by_cluster[curr[j].cluster_id].push_back(j);
  }
  auto rng = Substream(cfg.seed, "association", static_cast<std::uint64_t>(frame));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<Match> matches;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    auto it = by_id.find(prev[i].point_id);
    if (it == by_id.end()) continue;
    std::size_t j = it->second;
    const double c = coin(rng);
    const double pick = coin(rng);
    if (c < cfg.association_corruption) {
      const auto& same = by_cluster[curr[j].cluster_id];
      if (same.size() > 1) {
        // Any other member of the cluster, uniformly.
        auto k = static_cast<std::size_t>(pick * static_cast<double>(same.size() - 1));
        k = std::min(k, same.size() - 2);
        const std::size_t own = static_cast<std::size_t>(std::find(same.begin(), same.end(), j) - same.begin());
        j = same[k >= own ? k + 1 : k];
      }
    }
    matches.push_back({i, j});
  }
  return matches;
}

SceneConfig DefaultScene(std::uint64_t seed) {
  SceneConfig cfg = StreetBase(seed);
  ObjectScript lead;
  lead.id = 10;
  lead.initial_pose = CarPose(15.0, 0.0, 0.0);
  lead.schedule = {{1, 1 << 30, Forward(0.35)}};

  ObjectScript oncoming;
  oncoming.id = 11;
  oncoming.initial_pose = CarPose(45.0, 3.5, std::numbers::pi);
  oncoming.schedule = {{1, 1 << 30, Forward(-0.1)}};

  ObjectScript turning;
  turning.id = 12;
  turning.initial_pose = CarPose(25.0, -3.5, 0.0);
  turning.schedule = {{1, 40, Forward(0.25)}, {41, 1 << 30, Forward(0.25, 0.01)}};

  cfg.dynamic_objects = {lead, oncoming, turning};
  return cfg;
}

SceneConfig ParkedCarScene(std::uint64_t seed) {
  SceneConfig cfg = StreetBase(seed);
  // Straight drive so the car stays in view for the whole sequence.
  cfg.camera_path = {{1, 1 << 30, Twist(Eigen::Vector3d(0.0, 0.0, 0.3), Eigen::Vector3d::Zero())}};
  ObjectScript parked;
  parked.id = 10;
  parked.initial_pose = CarPose(38.0, -3.5, 0.0);
  cfg.dynamic_objects = {parked};
  return cfg;
}

}  // namespace cdslam
