#include "cdslam/config_io.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "cdslam/error.hpp"
#include "cdslam/trajectory_io.hpp"

namespace cdslam {
namespace {

using nlohmann::json;

json Parse(const std::string& text) {
  try {
    json root = json::parse(text);
    if (!root.is_object()) throw Error(ErrorCode::kConfigInvalid, "top level must be an object");
    return root;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("bad json: ") + e.what());
  }
}

void CheckKeys(const json& object, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!object.is_object()) throw Error(ErrorCode::kConfigInvalid, where + " must be an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : object.items()) {
    if (!names.count(key)) throw Error(ErrorCode::kConfigInvalid, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void Read(const json& object, const char* key, T& out) {
  if (object.contains(key)) out = object.at(key).get<T>();
}

Eigen::Vector3d Vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

Vector6d Vec6(const json& j) {
  Vector6d v;
  for (int i = 0; i < 6; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json ToJson(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json PoseToJson(const Pose& pose) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rotation.push_back(pose.rotation()(r, c));
  }
  return {{"rotation", rotation}, {"translation", ToJson(pose.translation())}};
}

Pose PoseFromJson(const json& j) {
  CheckKeys(j, {"rotation", "translation"}, "pose");
  Eigen::Matrix3d r;
  for (int k = 0; k < 9; ++k) r(k / 3, k % 3) = j.at("rotation").at(static_cast<std::size_t>(k)).get<double>();
  const Pose pose(r, Vec3(j.at("translation")));
  if (!pose.IsValid(1e-6)) throw Error(ErrorCode::kConfigInvalid, "pose rotation is not orthonormal");
  return pose;
}

json ScheduleToJson(const std::vector<TwistSegment>& schedule) {
  json out = json::array();
  for (const auto& s : schedule) {
    out.push_back({{"first", s.first_frame}, {"last", s.last_frame}, {"twist", ToJson(s.twist.vector())}});
  }
  return out;
}

std::vector<TwistSegment> ScheduleFromJson(const json& j) {
  std::vector<TwistSegment> out;
  for (const auto& s : j) {
    CheckKeys(s, {"first", "last", "twist"}, "twist segment");
    TwistSegment seg;
    Read(s, "first", seg.first_frame);
    Read(s, "last", seg.last_frame);
    seg.twist = Twist(Vec6(s.at("twist")));
    out.push_back(seg);
  }
  return out;
}

}  // namespace

SceneConfig SceneConfigFromJson(const std::string& text) {
  const json root = Parse(text);
  CheckKeys(root,
            {"preset", "seed", "n_frames", "frame_rate", "camera", "camera_initial", "camera_path", "road_plane",
             "static_clusters", "dynamic_objects", "pixel_noise_sigma", "outlier_fraction",
             "association_corruption", "far_spawn_distance"},
            "scene");
  try {
    const std::string preset = root.value("preset", "default");
    std::uint64_t seed = root.value("seed", std::uint64_t{0});
    SceneConfig cfg;
    if (preset == "default") {
      cfg = DefaultScene(seed);
    } else if (preset == "parked") {
      cfg = ParkedCarScene(seed);
    } else if (preset == "empty" || preset == "none") {
      cfg.seed = seed;
    } else {
      throw Error(ErrorCode::kConfigInvalid, "unknown preset '" + preset + "'");
    }
    Read(root, "n_frames", cfg.n_frames);
    Read(root, "frame_rate", cfg.frame_rate);
    Read(root, "pixel_noise_sigma", cfg.pixel_noise_sigma);
    Read(root, "outlier_fraction", cfg.outlier_fraction);
    Read(root, "association_corruption", cfg.association_corruption);
    Read(root, "far_spawn_distance", cfg.far_spawn_distance);
    if (root.contains("camera")) {
      const json& c = root["camera"];
      CheckKeys(c, {"fx", "fy", "cx", "cy", "baseline", "width", "height"}, "camera");
      Read(c, "fx", cfg.camera.fx);
      Read(c, "fy", cfg.camera.fy);
      Read(c, "cx", cfg.camera.cx);
      Read(c, "cy", cfg.camera.cy);
      Read(c, "baseline", cfg.camera.baseline);
      Read(c, "width", cfg.camera.width);
      Read(c, "height", cfg.camera.height);
    }
    if (root.contains("camera_initial")) cfg.camera_initial = PoseFromJson(root["camera_initial"]);
    if (root.contains("camera_path")) cfg.camera_path = ScheduleFromJson(root["camera_path"]);
    if (root.contains("road_plane")) {
      const json& p = root["road_plane"];
      cfg.road_plane.pi = Eigen::Vector4d(p.at(0), p.at(1), p.at(2), p.at(3));
    }
    if (root.contains("static_clusters")) {
      cfg.static_clusters.clear();
      for (const auto& c : root["static_clusters"]) {
        CheckKeys(c, {"id", "class", "points", "center", "extent"}, "static cluster");
        StaticClusterSpec spec;
        spec.id = c.at("id").get<ClusterId>();
        spec.class_label = c.at("class").get<std::string>();
        spec.n_points = c.at("points").get<int>();
        spec.center = Vec3(c.at("center"));
        spec.extent = Vec3(c.at("extent"));
        cfg.static_clusters.push_back(spec);
      }
    }
    if (root.contains("dynamic_objects")) {
      cfg.dynamic_objects.clear();
      for (const auto& o : root["dynamic_objects"]) {
        CheckKeys(o, {"id", "class", "joint", "initial_pose", "schedule", "bbox", "points", "object_points"},
                  "dynamic object");
        ObjectScript script;
        script.id = o.at("id").get<ClusterId>();
        Read(o, "class", script.class_label);
        if (o.contains("joint")) script.joint = ParseJointType(o["joint"].get<std::string>());
        if (o.contains("initial_pose")) script.initial_pose = PoseFromJson(o["initial_pose"]);
        if (o.contains("schedule")) script.schedule = ScheduleFromJson(o["schedule"]);
        if (o.contains("bbox")) script.bbox = Vec3(o["bbox"]);
        Read(o, "points", script.n_points);
        if (o.contains("object_points")) {
          for (const auto& p : o["object_points"]) script.points.push_back(Vec3(p));
        }
        cfg.dynamic_objects.push_back(script);
      }
    }
    cfg.Validate();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("scene: ") + e.what());
  }
}

std::string SceneConfigToJson(const SceneConfig& cfg) {
  json root;
  root["preset"] = "none";
  root["seed"] = cfg.seed;
  root["n_frames"] = cfg.n_frames;
  root["frame_rate"] = cfg.frame_rate;
  root["camera"] = {{"fx", cfg.camera.fx},         {"fy", cfg.camera.fy},       {"cx", cfg.camera.cx},
                    {"cy", cfg.camera.cy},         {"baseline", cfg.camera.baseline},
                    {"width", cfg.camera.width},   {"height", cfg.camera.height}};
  root["camera_initial"] = PoseToJson(cfg.camera_initial);
  root["camera_path"] = ScheduleToJson(cfg.camera_path);
  root["road_plane"] = ToJson(cfg.road_plane.pi);
  root["static_clusters"] = json::array();
  for (const auto& c : cfg.static_clusters) {
    root["static_clusters"].push_back({{"id", c.id},
                                       {"class", c.class_label},
                                       {"points", c.n_points},
                                       {"center", ToJson(c.center)},
                                       {"extent", ToJson(c.extent)}});
  }
  root["dynamic_objects"] = json::array();
  for (const auto& o : cfg.dynamic_objects) {
    json obj = {{"id", o.id},
                {"class", o.class_label},
                {"joint", ToString(o.joint)},
                {"initial_pose", PoseToJson(o.initial_pose)},
                {"schedule", ScheduleToJson(o.schedule)},
                {"bbox", ToJson(o.bbox)},
                {"points", o.n_points}};
    if (!o.points.empty()) {
      obj["object_points"] = json::array();
      for (const auto& p : o.points) obj["object_points"].push_back(ToJson(p));
    }
    root["dynamic_objects"].push_back(obj);
  }
  root["pixel_noise_sigma"] = cfg.pixel_noise_sigma;
  root["outlier_fraction"] = cfg.outlier_fraction;
  root["association_corruption"] = cfg.association_corruption;
  root["far_spawn_distance"] = cfg.far_spawn_distance;
  return root.dump(2) + "\n";
}

SceneConfig LoadSceneConfig(const std::filesystem::path& path) { return SceneConfigFromJson(ReadTextFile(path)); }

PipelineConfig PipelineConfigFromJson(const std::string& text) {
  const json root = Parse(text);
  CheckKeys(root,
            {"constrained", "robust", "ba", "keyframes", "joints", "dynamic_classes", "ba_every", "ba_window",
             "ba_max_spatial", "lost_after", "refine_radius_px", "min_object_points", "min_road_points", "road_fit_frame", "ransac"},
            "pipeline");
  try {
    PipelineConfig cfg;
    Read(root, "constrained", cfg.constrained);
    Read(root, "ba_every", cfg.ba_every);
    Read(root, "ba_window", cfg.ba_window);
    Read(root, "ba_max_spatial", cfg.ba_max_spatial);
    Read(root, "lost_after", cfg.lost_after);
    Read(root, "refine_radius_px", cfg.refine_radius_px);
    Read(root, "min_object_points", cfg.min_object_points);
    Read(root, "min_road_points", cfg.min_road_points);
    Read(root, "road_fit_frame", cfg.road_fit_frame);
    if (root.contains("robust")) {
      const json& r = root["robust"];
      CheckKeys(r,
                {"huber_delta", "mad_scale", "sigma_floor", "max_lm_iters", "lm_lambda_init", "convergence_tol",
                 "robust_rounds", "outlier_threshold"},
                "robust");
      Read(r, "huber_delta", cfg.robust.huber_delta);
      Read(r, "mad_scale", cfg.robust.mad_scale);
      Read(r, "sigma_floor", cfg.robust.sigma_floor);
      Read(r, "max_lm_iters", cfg.robust.max_lm_iters);
      Read(r, "lm_lambda_init", cfg.robust.lm_lambda_init);
      Read(r, "convergence_tol", cfg.robust.convergence_tol);
      Read(r, "robust_rounds", cfg.robust.robust_rounds);
      Read(r, "outlier_threshold", cfg.robust.outlier_threshold);
    }
    if (root.contains("ba")) {
      const json& b = root["ba"];
      CheckKeys(b,
                {"use_schur", "max_iters", "outer_rounds", "lambda_init", "convergence_tol", "huber_delta",
                 "const_huber_delta", "mad_scale", "sigma_floor", "const_weights", "use_dyna", "use_const"},
                "ba");
      Read(b, "use_schur", cfg.ba.use_schur);
      Read(b, "max_iters", cfg.ba.max_iters);
      Read(b, "outer_rounds", cfg.ba.outer_rounds);
      Read(b, "lambda_init", cfg.ba.lambda_init);
      Read(b, "convergence_tol", cfg.ba.convergence_tol);
      Read(b, "huber_delta", cfg.ba.huber_delta);
      Read(b, "const_huber_delta", cfg.ba.const_huber_delta);
      Read(b, "mad_scale", cfg.ba.mad_scale);
      Read(b, "sigma_floor", cfg.ba.sigma_floor);
      if (b.contains("const_weights")) cfg.ba.const_weights = Vec6(b["const_weights"]);
      Read(b, "use_dyna", cfg.ba.use_dyna);
      Read(b, "use_const", cfg.ba.use_const);
    }
    if (root.contains("keyframes")) {
      const json& k = root["keyframes"];
      CheckKeys(k, {"temporal_window_s", "covisibility_min_shared", "redundant_overlap"}, "keyframes");
      Read(k, "temporal_window_s", cfg.keyframes.temporal_window_s);
      Read(k, "covisibility_min_shared", cfg.keyframes.covisibility_min_shared);
      Read(k, "redundant_overlap", cfg.keyframes.redundant_overlap);
    }
    if (root.contains("joints")) {
      cfg.joints = JointTable();
      for (const auto& [child, entry] : root["joints"].items()) {
        CheckKeys(entry, {"parent", "type"}, "joint entry '" + child + "'");
        cfg.joints.Set(child, {entry.value("parent", ""), ParseJointType(entry.at("type").get<std::string>())});
      }
    }
    if (root.contains("dynamic_classes")) {
      cfg.staticity = StaticityTable(root["dynamic_classes"].get<std::set<std::string>>());
    }
    if (root.contains("ransac")) {
      const json& r = root["ransac"];
      CheckKeys(r, {"max_iters", "inlier_tol", "seed"}, "ransac");
      Read(r, "max_iters", cfg.ransac.max_iters);
      Read(r, "inlier_tol", cfg.ransac.inlier_tol);
      Read(r, "seed", cfg.ransac.seed);
    }
    cfg.Validate();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("pipeline: ") + e.what());
  }
}

std::string PipelineConfigToJson(const PipelineConfig& cfg) {
  json root;
  root["constrained"] = cfg.constrained;
  root["robust"] = {{"huber_delta", cfg.robust.huber_delta},       {"mad_scale", cfg.robust.mad_scale},
                    {"sigma_floor", cfg.robust.sigma_floor},       {"max_lm_iters", cfg.robust.max_lm_iters},
                    {"lm_lambda_init", cfg.robust.lm_lambda_init}, {"convergence_tol", cfg.robust.convergence_tol},
                    {"robust_rounds", cfg.robust.robust_rounds},   {"outlier_threshold", cfg.robust.outlier_threshold}};
  root["ba"] = {{"use_schur", cfg.ba.use_schur},
                {"max_iters", cfg.ba.max_iters},
                {"outer_rounds", cfg.ba.outer_rounds},
                {"lambda_init", cfg.ba.lambda_init},
                {"convergence_tol", cfg.ba.convergence_tol},
                {"huber_delta", cfg.ba.huber_delta},
                {"const_huber_delta", cfg.ba.const_huber_delta},
                {"mad_scale", cfg.ba.mad_scale},
                {"sigma_floor", cfg.ba.sigma_floor},
                {"const_weights", ToJson(cfg.ba.const_weights)},
                {"use_dyna", cfg.ba.use_dyna},
                {"use_const", cfg.ba.use_const}};
  root["keyframes"] = {{"temporal_window_s", cfg.keyframes.temporal_window_s},
                       {"covisibility_min_shared", cfg.keyframes.covisibility_min_shared},
                       {"redundant_overlap", cfg.keyframes.redundant_overlap}};
  json joints = json::object();
  for (const auto& [child, entry] : cfg.joints.entries()) {
    joints[child] = {{"parent", entry.parent_class}, {"type", ToString(entry.type)}};
  }
  root["joints"] = joints;
  root["dynamic_classes"] = cfg.staticity.dynamic_classes();
  root["ba_every"] = cfg.ba_every;
  root["ba_window"] = cfg.ba_window;
  root["ba_max_spatial"] = cfg.ba_max_spatial;
  root["lost_after"] = cfg.lost_after;
  root["refine_radius_px"] = cfg.refine_radius_px;
  root["min_object_points"] = cfg.min_object_points;
  root["min_road_points"] = cfg.min_road_points;
  root["road_fit_frame"] = cfg.road_fit_frame;
  root["ransac"] = {{"max_iters", cfg.ransac.max_iters}, {"inlier_tol", cfg.ransac.inlier_tol}, {"seed", cfg.ransac.seed}};
  return root.dump(2) + "\n";
}

PipelineConfig LoadPipelineConfig(const std::filesystem::path& path) {
  return PipelineConfigFromJson(ReadTextFile(path));
}

}  // namespace cdslam
