#include "cdslam/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <numbers>

#include "cdslam/config_io.hpp"
#include "cdslam/error.hpp"
#include "cdslam/trajectory_io.hpp"

namespace cdslam {
namespace {

std::string Num(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

// Ground-truth object frame matching the estimator's convention: identity
// rotation at the centroid of the points the cluster was created from.
Pose GtAnchor(const GroundTruth& gt, const GtObject& object, const std::vector<PointId>& creation, int frame) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  int count = 0;
  for (const auto& p : gt.points) {
    if (std::binary_search(creation.begin(), creation.end(), p.id)) {
      centroid += object.poses[static_cast<std::size_t>(frame)] * p.position;
      ++count;
    }
  }
  if (count == 0) return Pose();
  centroid /= count;
  return object.poses[static_cast<std::size_t>(frame)].inverse() * Pose::FromTranslation(centroid);
}

}  // namespace

double SpeedKmh(const Pose& previous, const Pose& current, double frame_rate) {
  return (current.translation() - previous.translation()).norm() * frame_rate * 3.6;
}

ExperimentOutput RunExperiment(const SceneConfig& scene, const PipelineConfig& pipeline_cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutput out;
  out.gt = GenerateScene(scene);
  const GroundTruth& gt = out.gt;

  Pipeline pipeline(scene.camera, pipeline_cfg, gt.camera_poses.front());
  std::vector<StereoObservation> prev;
  for (int f = 0; f < scene.n_frames; ++f) {
    FrameInput input;
    input.frame_index = f;
    input.timestamp = gt.Timestamp(f);
    input.observations = RenderObservations(gt, f, scene);
    if (f > 0) input.matches = Associate(prev, input.observations, scene, f);
    input.labels = gt.cluster_labels;
    try {
      pipeline.Process(input);
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(f) + ": " + e.what());
    }
    prev = std::move(input.observations);
  }

  ExperimentReport& report = out.report;
  report.seed = scene.seed;
  report.n_frames = scene.n_frames;
  report.constrained = pipeline_cfg.constrained;
  report.stats = pipeline.stats();

  for (const auto& [f, T_wc] : pipeline.camera_poses()) {
    out.camera_est.Append(gt.Timestamp(f), T_wc);
    out.camera_gt.Append(gt.Timestamp(f), gt.camera_poses[static_cast<std::size_t>(f)]);
  }
  report.camera_ate = Ate(out.camera_est, out.camera_gt);
  const RpeResult cam_rpe = Rpe(out.camera_est, out.camera_gt, 1);
  report.camera_rpe_t = cam_rpe.translation;
  report.camera_rpe_r_deg = cam_rpe.rotation_deg;

  const WorldMap& map = pipeline.map();
  const PlaneModel plane = map.road_plane.value_or(scene.road_plane);
  for (const auto& object : gt.objects) {
    const Cluster* cluster = map.FindCluster(object.id);
    if (!cluster || cluster->poses.empty()) continue;
    ObjectReport obj;
    obj.id = object.id;
    obj.class_label = object.class_label;
    obj.joint = cluster->joint ? ToString(cluster->joint->type) : "free";
    obj.frames_tracked = static_cast<int>(cluster->poses.size());

    auto creation = pipeline.creation_points().at(object.id);
    std::sort(creation.begin(), creation.end());
    const int first = cluster->poses.begin()->first;
    const Pose anchor = GtAnchor(gt, object, creation, first);

    Trajectory& est = out.object_est[object.id];
    Trajectory& ref = out.object_gt[object.id];
    for (const auto& [f, pose] : cluster->poses) {
      est.Append(gt.Timestamp(f), pose);
      ref.Append(gt.Timestamp(f), object.poses[static_cast<std::size_t>(f)] * anchor);
    }
    if (est.size() >= 2) {
      obj.ate = Ate(est, ref);
      const RpeResult rpe = Rpe(est, ref, 1);
      obj.rpe_t = rpe.translation;
      obj.rpe_r_deg = rpe.rotation_deg;
    }
    obj.out_of_plane_drift = OutOfPlaneDrift(est, plane);

    const Matrix6d gt_ad_lw = Adjoint(object.joint.frame.inverse());
    const Matrix6d est_ad_lw = cluster->joint ? Adjoint(cluster->joint->frame.inverse()) : Matrix6d::Identity();
    double err_sum = 0.0;
    double speed_sum = 0.0;
    double gt_speed_sum = 0.0;
    int n_twists = 0;
    for (const auto& [f, pose] : cluster->poses) {
      auto prev_pose = cluster->poses.find(f - 1);
      if (prev_pose == cluster->poses.end()) continue;
      const Vector6d xi_w = cluster->twists.at(f).vector();
      const double err =
          (gt_ad_lw * xi_w - object.joint_twists[static_cast<std::size_t>(f)].vector()).norm();
      err_sum += err;
      obj.twist_error_max = std::max(obj.twist_error_max, err);
      speed_sum += SpeedKmh(prev_pose->second, pose, gt.frame_rate);
      gt_speed_sum += SpeedKmh(object.poses[static_cast<std::size_t>(f - 1)] * anchor,
                               object.poses[static_cast<std::size_t>(f)] * anchor, gt.frame_rate);
      out.object_twists_joint[object.id][f] = est_ad_lw * xi_w;
      ++n_twists;
    }
    if (n_twists > 0) {
      obj.twist_error_mean = err_sum / n_twists;
      obj.mean_speed_kmh = speed_sum / n_twists;
      obj.gt_mean_speed_kmh = gt_speed_sum / n_twists;
    }
    report.objects.push_back(obj);
  }
  out.map = map;
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string FormatReport(const ExperimentReport& r) {
  std::string s;
  auto line = [&s](const std::string& key, const std::string& value) { s += key + ": " + value + "\n"; };
  s += "# cdslam experiment report\n";
  line("format_version", "1");
  line("seed", std::to_string(r.seed));
  line("frames", std::to_string(r.n_frames));
  line("constrained", r.constrained ? "true" : "false");
  line("camera_ate_m", Num(r.camera_ate));
  line("camera_rpe_t_m_per_frame", Num(r.camera_rpe_t));
  line("camera_rpe_r_deg_per_frame", Num(r.camera_rpe_r_deg));
  line("ba_runs", std::to_string(r.stats.ba_runs));
  line("ba_failures", std::to_string(r.stats.ba_failures));
  line("camera_fallbacks", std::to_string(r.stats.camera_fallbacks));
  line("objects", std::to_string(r.objects.size()));
  for (const auto& o : r.objects) {
    const std::string p = "object." + std::to_string(o.id) + ".";
    line(p + "class", o.class_label);
    line(p + "joint", o.joint);
    line(p + "frames_tracked", std::to_string(o.frames_tracked));
    line(p + "ate_m", Num(o.ate));
    line(p + "rpe_t_m_per_frame", Num(o.rpe_t));
    line(p + "rpe_r_deg_per_frame", Num(o.rpe_r_deg));
    line(p + "out_of_plane_drift_m", Num(o.out_of_plane_drift));
    line(p + "twist_error_mean", Num(o.twist_error_mean));
    line(p + "twist_error_max", Num(o.twist_error_max));
    line(p + "mean_speed_kmh", Num(o.mean_speed_kmh));
    line(p + "gt_mean_speed_kmh", Num(o.gt_mean_speed_kmh));
  }
  return s;
}

std::string CameraMetricsCsv(const ExperimentOutput& output) {
  std::string s = "frame,timestamp,tx,ty,tz,gt_tx,gt_ty,gt_tz,translation_error_m,rotation_error_deg\n";
  char buffer[512];
  for (std::size_t i = 0; i < output.camera_est.size(); ++i) {
    const Pose& est = output.camera_est[i].pose;
    const Pose& ref = output.camera_gt[i].pose;
    const Pose err = ref.inverse() * est;
    const int frame = static_cast<int>(std::lround(output.camera_est[i].timestamp * output.gt.frame_rate));
    std::snprintf(buffer, sizeof(buffer), "%d,%.6g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6g,%.6g\n", frame,
                  output.camera_est[i].timestamp, est.translation().x(), est.translation().y(),
                  est.translation().z(), ref.translation().x(), ref.translation().y(), ref.translation().z(),
                  (est.translation() - ref.translation()).norm(),
                  RotationAngle(err.rotation()) * 180.0 / std::numbers::pi);
    s += buffer;
  }
  return s;
}

std::string ObjectTwistsCsv(const ExperimentOutput& output, ClusterId id) {
  std::string s = "frame,v_x,v_y,v_z,w_x,w_y,w_z,speed_kmh,gt_v_x,gt_v_y,gt_v_z,gt_w_x,gt_w_y,gt_w_z,gt_speed_kmh\n";
  const GtObject* object = output.gt.FindObject(id);
  auto est_it = output.object_est.find(id);
  auto ref_it = output.object_gt.find(id);
  auto tw_it = output.object_twists_joint.find(id);
  if (!object || est_it == output.object_est.end() || tw_it == output.object_twists_joint.end()) return s;
  const double rate = output.gt.frame_rate;
  std::map<int, std::pair<Pose, Pose>> poses;
  for (std::size_t i = 0; i < est_it->second.size(); ++i) {
    const int f = static_cast<int>(std::lround(est_it->second[i].timestamp * rate));
    poses[f] = {est_it->second[i].pose, ref_it->second[i].pose};
  }
  char buffer[512];
  for (const auto& [f, xi] : tw_it->second) {
    const auto& cur = poses.at(f);
    const auto& prev = poses.at(f - 1);
    const Vector6d g = object->joint_twists[static_cast<std::size_t>(f)].vector();
    std::snprintf(buffer, sizeof(buffer),
                  "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6g\n", f, xi[0], xi[1],
                  xi[2], xi[3], xi[4], xi[5], SpeedKmh(prev.first, cur.first, rate), g[0], g[1], g[2], g[3], g[4],
                  g[5], SpeedKmh(prev.second, cur.second, rate));
    s += buffer;
  }
  return s;
}

void WriteExperimentOutputs(const ExperimentOutput& output, const std::filesystem::path& out_dir, bool write_csv) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string());
  WriteTextFile(out_dir / "report.txt", FormatReport(output.report));
  WriteTextFile(out_dir / "runtime.txt", "runtime_s: " + Num(output.report.runtime_s) + "\n");
  WriteTrajectory(out_dir / "camera_est.txt", output.camera_est, "estimated T_wc");
  WriteTrajectory(out_dir / "camera_gt.txt", output.camera_gt, "ground truth T_wc");
  for (const auto& [id, traj] : output.object_est) {
    WriteTrajectory(out_dir / ("object_" + std::to_string(id) + "_est.txt"), traj, "estimated T_wo");
    WriteTrajectory(out_dir / ("object_" + std::to_string(id) + "_gt.txt"), output.object_gt.at(id),
                    "ground truth T_wo in the estimator's object frame");
  }
  if (write_csv) {
    WriteTextFile(out_dir / "camera_metrics.csv", CameraMetricsCsv(output));
    for (const auto& [id, traj] : output.object_est) {
      WriteTextFile(out_dir / ("object_" + std::to_string(id) + "_twists.csv"), ObjectTwistsCsv(output, id));
    }
  }
}

ExperimentReport RunExperimentFiles(const std::filesystem::path& scene_path,
                                    const std::filesystem::path& pipeline_path,
                                    const std::filesystem::path& out_dir, bool write_csv) {
  const SceneConfig scene = LoadSceneConfig(scene_path);
  const PipelineConfig pipeline = pipeline_path.empty() ? PipelineConfig{} : LoadPipelineConfig(pipeline_path);
  const ExperimentOutput output = RunExperiment(scene, pipeline);
  WriteExperimentOutputs(output, out_dir, write_csv);
  return output.report;
}

}  // namespace cdslam
