// Acceptance checks, one per criterion. Usage: cdslam_acceptance [N ...]
// (all criteria when no argument is given). Prints one PASS/FAIL line per
// criterion and exits non-zero if any failed.

#include <array>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cdslam/dynba.hpp"
#include "cdslam/error.hpp"
#include "cdslam/experiment.hpp"
#include "cdslam/joints.hpp"
#include "cdslam/liegroup.hpp"
#include "cdslam/metrics.hpp"
#include "cdslam/simkit.hpp"
#include "cdslam/tracking.hpp"
#include "cdslam/trajectory_io.hpp"
#include "gt_map.hpp"
#include "test_util.hpp"

namespace cdslam {
namespace {

using testing::NumericJacobian;
using testing::RandomPose;
using testing::RandomTwist;
using testing::RandomVector3;
using testing::RelativeError;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string Fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* format, ...) {
  char buffer[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return buffer;
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

constexpr std::array<JointType, 5> kJointTypes = {JointType::kFree, JointType::kFixed, JointType::kPlanar,
                                                  JointType::kRevolute, JointType::kPrismatic};

// 1. exp/log, adjoint and update consistency on random twists.
Outcome LieGroupSuite() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double roundtrip = 0.0, intertwine = 0.0, update = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Twist xi = RandomTwist(rng, 5.0, 3.0);
    const Pose T = RandomPose(rng, 5.0, 3.0);
    roundtrip = std::max(roundtrip, (LogSE3(ExpSE3(xi)).vector() - xi.vector()).norm());
    const Pose lhs = ExpSE3(Twist(Vector6d(Adjoint(T) * xi.vector())));
    const Pose rhs = T * ExpSE3(xi) * T.inverse();
    intertwine = std::max(intertwine, (lhs.matrix() - rhs.matrix()).norm());
    // Left update exp(xi) T equals the right update T exp(Ad_{T^-1} xi).
    const Pose left = ExpSE3(xi) * T;
    const Pose right = T * ExpSE3(Twist(Vector6d(Adjoint(T.inverse()) * xi.vector())));
    update = std::max(update, (left.matrix() - right.matrix()).norm());
  }
  const double t = Seconds(start);
  Outcome o;
  o.pass = roundtrip <= 1e-9 && intertwine <= 1e-9 && update <= 1e-9 && t < 5.0;
  o.detail = Fmt("roundtrip %.3g, adjoint %.3g, left/right %.3g, %.2f s", roundtrip, intertwine, update, t);
  return o;
}

// 2. Projector properties.
Outcome ProjectorSuite() {
  std::mt19937_64 rng(1002);
  double joint_err = 0.0, conj_err = 0.0, containment = 0.0;
  for (JointType type : kJointTypes) {
    const Matrix6d pi = Projector(FreedomBasis(type));
    joint_err = std::max({joint_err, (pi * pi - pi).norm(), (pi - pi.transpose()).norm()});
    for (int i = 0; i < 200; ++i) {
      const Matrix6d p = ConjugatedProjector(MakeJoint(type, RandomPose(rng, 10.0, 3.0))).p_world;
      conj_err = std::max(conj_err, (p * p - p).norm());
    }
  }
  Vector6d diag;
  diag << 1, 1, 0, 0, 0, 1;
  const bool planar_exact = Projector(FreedomBasis(JointType::kPlanar)) == Matrix6d(diag.asDiagonal());

  // Planar motion on random tilted planes keeps plane points on the plane.
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d tilt = RandomVector3(rng, 0.5);
    const PlaneModel plane =
        CanonicalizePlane(Eigen::Vector4d(tilt.x(), tilt.y(), 1.0, 6.0 * tilt.z()).normalized());
    const TwistProjector p = ConjugatedProjector(JointFromPlane(plane, JointType::kPlanar, RandomVector3(rng, 10.0)));
    const Pose motion = ExpSE3(Twist(p.Apply(RandomTwist(rng, 0.4, 0.7).vector())));
    const Eigen::Vector3d X = plane.Project(RandomVector3(rng, 20.0));
    containment = std::max(containment, std::abs(plane.SignedDistance(motion * X)));
  }
  Outcome o;
  o.pass = joint_err <= 1e-10 && conj_err <= 1e-9 && planar_exact && containment <= 1e-8;
  o.detail = Fmt("joint %.3g, conjugated %.3g, planar diag %s, containment %.3g", joint_err, conj_err,
                 planar_exact ? "exact" : "MISMATCH", containment);
  return o;
}

// 3. Analytic Jacobians against central differences.
Outcome JacobianSuite() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1003);
  const PinholeCamera cam;

  // Tracking Jacobian of the projected moved point w.r.t. the twist.
  double tracking = 0.0;
  for (int n = 0; n < 1000;) {
    const Pose T_cw = RandomPose(rng, 2.0, 0.3);
    const Eigen::Vector3d offset = RandomVector3(rng, 3.0);
    const Pose T_wo =
        T_cw.inverse() * Pose(RandomPose(rng, 0.0, 3.0).rotation(), Eigen::Vector3d(offset.x(), offset.y(), 12.0));
    const Matrix6d P = ConjugatedProjector(MakeJoint(kJointTypes[n % 5], RandomPose(rng, 10.0, 3.0))).p_world;
    const Twist xi = RandomTwist(rng, 0.3, 0.3);
    const Eigen::Vector3d X_o = RandomVector3(rng, 1.5);
    Eigen::Matrix<double, 2, 6> J;
    try {
      J = ObjectTwistJacobian(X_o, T_cw, T_wo, P, cam, xi);
    } catch (const Error&) {
      continue;
    }
    const auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return Project(cam, T_cw, ExpSE3(Twist(Vector6d(P * x))) * T_wo * X_o);
    };
    tracking = std::max(tracking, RelativeError(J, NumericJacobian(f, xi.vector()), 1e-3));
    ++n;
  }

  // BA reprojection block with a constrained twist variable.
  double ba = 0.0;
  for (int n = 0; n < 1000;) {
    BAProblem p;
    p.camera = cam;
    const Pose T_cw = RandomPose(rng, 2.0, 0.3);
    const Eigen::Vector3d offset = RandomVector3(rng, 3.0);
    const Pose snapshot =
        T_cw.inverse() * Pose(RandomPose(rng, 0.0, 3.0).rotation(), Eigen::Vector3d(offset.x(), offset.y(), 12.0));
    p.projectors[1] = ConjugatedProjector(MakeJoint(kJointTypes[n % 5], RandomPose(rng, 10.0, 3.0)));
    const int dof = p.projectors[1].dof();
    Eigen::VectorXd coords = Eigen::VectorXd::Zero(dof);
    for (int k = 0; k < dof; ++k) coords(k) = RandomVector3(rng, 0.2).x();
    p.cameras = {{0, T_cw, false}};
    p.object_points = {{0, 1, RandomVector3(rng, 1.5), false}};
    p.twists = {{1, 0, snapshot, coords, false}};
    const DynaBlock b{0, 0, 0, Eigen::Vector3d(600, 200, 580)};
    DynaEval e;
    try {
      e = EvaluateDyna(p, b);
    } catch (const Error&) {
      continue;
    }
    const auto by_camera = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      BAProblem q = p;
      q.cameras[0].T_cw = ExpSE3(Twist(Vector6d(d))) * T_cw;
      return EvaluateDyna(q, b).residual;
    };
    const auto by_point = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      BAProblem q = p;
      q.object_points[0].X_o = x;
      return EvaluateDyna(q, b).residual;
    };
    ba = std::max(ba, RelativeError(e.d_camera, NumericJacobian(by_camera, Vector6d::Zero()), 1e-3));
    ba = std::max(ba, RelativeError(e.d_point, NumericJacobian(by_point, p.object_points[0].X_o), 1e-3));
    if (dof > 0) {
      const auto by_coords = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
        BAProblem q = p;
        q.twists[0].coords = c;
        return EvaluateDyna(q, b).residual;
      };
      ba = std::max(ba, RelativeError(e.d_coords, NumericJacobian(by_coords, coords), 1e-3));
    }
    ++n;
  }

  // Constant-velocity residual (dlog-based).
  double constvel = 0.0;
  for (int n = 0; n < 1000; ++n) {
    BAProblem p;
    p.projectors[1] = ConjugatedProjector(MakeJoint(kJointTypes[n % 5], RandomPose(rng, 10.0, 3.0)));
    const int dof = p.projectors[1].dof();
    const Pose q0 = RandomPose(rng, 10.0, 3.0);
    const Pose q1 = ExpSE3(RandomTwist(rng, 1.0, 0.5)) * q0;
    const Pose q2 = ExpSE3(RandomTwist(rng, 1.0, 0.5)) * q1;
    for (const Pose& q : {q0, q1, q2}) {
      Eigen::VectorXd c(dof);
      for (int k = 0; k < dof; ++k) c(k) = RandomVector3(rng, 0.1).x();
      p.twists.push_back({1, static_cast<int>(p.twists.size()), q, c, false});
    }
    const ConstVelBlock b{1, {0, 1, 2}};
    const ConstVelEval e = EvaluateConstVel(p, b);
    for (int k = 0; k < 3 && dof > 0; ++k) {
      const auto f = [&](const Eigen::VectorXd& c) -> Eigen::VectorXd {
        BAProblem q = p;
        q.twists[k].coords = c;
        return EvaluateConstVel(q, b).residual;
      };
      constvel = std::max(constvel, RelativeError(e.d_coords[k], NumericJacobian(f, p.twists[k].coords), 1.0));
    }
  }
  const double t = Seconds(start);
  Outcome o;
  o.pass = tracking < 1e-4 && ba < 1e-4 && constvel < 1e-3 && t < 30.0;
  o.detail = Fmt("tracking %.3g, ba reprojection %.3g, const-vel %.3g, %.2f s", tracking, ba, constvel, t);
  return o;
}

double MeanObjectAte(const ExperimentReport& r) {
  double sum = 0.0;
  for (const auto& o : r.objects) sum += o.ate;
  return r.objects.empty() ? 0.0 : sum / static_cast<double>(r.objects.size());
}

double MaxDrift(const ExperimentReport& r) {
  double worst = 0.0;
  for (const auto& o : r.objects) worst = std::max(worst, o.out_of_plane_drift);
  return worst;
}

// 4. Noiseless run is exact and BA returns to ground truth from a perturbation.
Outcome NoiselessRecovery() {
  const auto start = std::chrono::steady_clock::now();
  SceneConfig scene = DefaultScene(1004);
  scene.pixel_noise_sigma = 0.0;
  const ExperimentOutput run = RunExperiment(scene, PipelineConfig{});
  double twist_err = 0.0;
  for (const auto& o : run.report.objects) twist_err = std::max(twist_err, o.twist_error_max);

  const GroundTruth& gt = run.gt;
  const WorldMap map = testing::MapFromGroundTruth(scene, gt, 0, 9);
  const auto frames = testing::FrameRange(0, 9);
  BAProblem p = BuildProblem(map, scene.camera, frames, {});
  std::mt19937_64 rng(1005);
  const auto unit = [&] { return RandomVector3(rng, 1.0).normalized(); };
  const double deg = M_PI / 180.0;
  for (auto& c : p.cameras) {
    if (!c.fixed) c.T_cw = ExpSE3(Twist(0.01 * unit(), 0.5 * deg * unit())) * c.T_cw;
  }
  for (auto& s : p.static_points) s.X_w += 0.01 * unit();
  for (auto& o : p.object_points) o.X_o += 0.01 * unit();
  for (auto& t : p.twists) {
    if (t.fixed) continue;
    Eigen::VectorXd d = Eigen::VectorXd::NullaryExpr(t.coords.size(), [&] { return unit().x(); });
    t.coords += 0.05 * d.normalized();
  }
  BAOptions options;
  options.max_iters = 100;
  options.convergence_tol = 1e-14;
  SolveBA(p, options);
  double ba_err = 0.0;
  for (const auto& c : p.cameras) {
    ba_err = std::max(ba_err, (c.T_cw.matrix() - gt.camera_poses[c.frame_index].inverse().matrix()).norm());
  }
  for (std::size_t t = 0; t < p.twists.size(); ++t) {
    const Pose& truth = gt.FindObject(p.twists[t].cluster)->poses[p.twists[t].frame_index];
    ba_err = std::max(ba_err, (p.ObjectPose(static_cast<int>(t)).matrix() - truth.matrix()).norm());
  }
  const double t = Seconds(start);
  Outcome o;
  o.pass = run.report.camera_ate < 1e-6 && twist_err < 1e-6 && ba_err < 1e-6 && !p.twists.empty() && t < 60.0;
  o.detail = Fmt("camera ATE %.3g m, max twist error %.3g, BA recovery %.3g (%zu twist vars), %.1f s",
                 run.report.camera_ate, twist_err, ba_err, p.twists.size(), t);
  return o;
}

// 5. Constrained vs unconstrained object estimates over 20 seeds.
Outcome ConstraintBenefit() {
  const auto start = std::chrono::steady_clock::now();
  PipelineConfig constrained;
  PipelineConfig free_cfg;
  free_cfg.constrained = false;
  int better = 0;
  double worst_constrained_drift = 0.0;
  double least_free_drift = 1e300;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SceneConfig scene = DefaultScene(seed);
    const ExperimentReport a = RunExperiment(scene, constrained).report;
    const ExperimentReport b = RunExperiment(scene, free_cfg).report;
    const double ate_a = MeanObjectAte(a);
    const double ate_b = MeanObjectAte(b);
    better += ate_a <= ate_b ? 1 : 0;
    worst_constrained_drift = std::max(worst_constrained_drift, MaxDrift(a));
    least_free_drift = std::min(least_free_drift, MaxDrift(b));
    std::printf("  seed %2llu: object ATE constrained %.4f m, unconstrained %.4f m; drift %.3g / %.3g m\n",
                static_cast<unsigned long long>(seed), ate_a, ate_b, MaxDrift(a), MaxDrift(b));
    std::fflush(stdout);
  }
  const double t = Seconds(start);
  Outcome o;
  o.pass = better >= 17 && worst_constrained_drift <= 1e-8 && least_free_drift > 1e-3 && t < 600.0;
  o.detail = Fmt("constrained ATE <= unconstrained in %d/20 seeds, constrained drift max %.3g m, unconstrained "
                 "drift min %.3g m, %.0f s",
                 better, worst_constrained_drift, least_free_drift, t);
  return o;
}

// 6. A parked car reads as stationary.
Outcome StaticNulling() {
  double worst = 0.0;
  bool all_tracked = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ExperimentReport r = RunExperiment(ParkedCarScene(seed), PipelineConfig{}).report;
    const ObjectReport* car = nullptr;
    for (const auto& o : r.objects) {
      if (o.id == 10) car = &o;
    }
    if (!car || car->frames_tracked < 10) {
      all_tracked = false;
      continue;
    }
    worst = std::max(worst, car->mean_speed_kmh);
    std::printf("  seed %2llu: mean speed %.3f km/h over %d frames\n", static_cast<unsigned long long>(seed),
                car->mean_speed_kmh, car->frames_tracked);
    std::fflush(stdout);
  }
  Outcome o;
  o.pass = all_tracked && worst < 0.5;
  o.detail = Fmt("worst per-seed mean speed %.3f km/h%s", worst, all_tracked ? "" : ", car not tracked in some seed");
  return o;
}

// 7. Camera tracking against the static map with 30% gross outliers.
Outcome OutlierRobustness() {
  double worst = 0.0;
  int frames = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SceneConfig scene = DefaultScene(seed);
    scene.outlier_fraction = 0.3;
    const GroundTruth gt = GenerateScene(scene);
    double seed_worst = 0.0;
    for (int f = 1; f < scene.n_frames; ++f) {
      std::vector<StaticCorrespondence> corr;
      for (const auto& obs : RenderObservations(gt, f, scene)) {
        if (gt.FindObject(obs.cluster_id)) continue;
        corr.push_back({obs.point_id, gt.points[static_cast<std::size_t>(obs.point_id)].position, obs.uv()});
      }
      const Pose init = gt.camera_poses[f - 1].inverse();
      const TrackResult<Pose> r = TrackCamera(corr, scene.camera, init, RobustConfig{});
      const double err = (r.estimate.inverse().translation() - gt.camera_poses[f].translation()).norm();
      seed_worst = std::max(seed_worst, err);
      ++frames;
    }
    worst = std::max(worst, seed_worst);
    std::printf("  seed %2llu: worst frame translation error %.2f mm\n", static_cast<unsigned long long>(seed),
                seed_worst * 1e3);
    std::fflush(stdout);
  }
  Outcome o;
  o.pass = worst < 5e-3;
  o.detail = Fmt("worst per-frame translation error %.2f mm over %d frames", worst * 1e3, frames);
  return o;
}

double JointTwistVariance(const BAProblem& p, ClusterId cluster) {
  const TwistProjector& proj = p.projectors.at(cluster);
  std::vector<Vector6d> twists;
  int prev = -1;
  for (std::size_t t = 0; t < p.twists.size(); ++t) {
    if (p.twists[t].cluster != cluster) continue;
    if (prev >= 0 && p.twists[t].frame_index == p.twists[prev].frame_index + 1) {
      const Pose rel = p.ObjectPose(static_cast<int>(t)) * p.ObjectPose(prev).inverse();
      twists.push_back(proj.ad_lw * LogSE3(rel).vector());
    }
    prev = static_cast<int>(t);
  }
  if (twists.size() < 2) return 0.0;
  Vector6d mean = Vector6d::Zero();
  for (const auto& x : twists) mean += x;
  mean /= static_cast<double>(twists.size());
  double var = 0.0;
  for (const auto& x : twists) var += (x - mean).squaredNorm();
  return var / static_cast<double>(twists.size());
}

// 8. BA smooths a constant-twist object from a noisy start.
Outcome Smoothing() {
  int smoother = 0;
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneConfig scene = DefaultScene(seed);
    scene.n_frames = 12;
    const GroundTruth gt = GenerateScene(scene);
    const WorldMap map = testing::MapFromGroundTruth(scene, gt, 0, 9);
    const auto frames = testing::FrameRange(0, 9);
    BAProblem p = BuildProblem(map, scene.camera, frames, {});
    std::mt19937_64 rng(2000 + seed);
    std::normal_distribution<double> n(0.0, 0.02);
    for (auto& t : p.twists) {
      if (t.fixed || t.cluster != 10) continue;
      for (Eigen::Index k = 0; k < t.coords.size(); ++k) t.coords(k) += n(rng);
    }
    const double before = JointTwistVariance(p, 10);
    SolveBA(p);
    const double after = JointTwistVariance(p, 10);
    ++runs;
    smoother += after <= before ? 1 : 0;
    std::printf("  seed %2llu: twist variance %.3g -> %.3g\n", static_cast<unsigned long long>(seed), before, after);
  }
  Outcome o;
  o.pass = smoother * 10 >= runs * 9;
  o.detail = Fmt("post-BA variance <= pre-BA in %d/%d seeds", smoother, runs);
  return o;
}

// 9. Schur complement and dense solves agree.
Outcome SolverConsistency() {
  const SceneConfig scene = testing::SmallScene(1009, 0.5);
  const GroundTruth gt = GenerateScene(scene);
  const WorldMap map = testing::MapFromGroundTruth(scene, gt, 0, 9);
  const auto frames = testing::FrameRange(0, 9);
  BAProblem schur = BuildProblem(map, scene.camera, frames, {});
  std::mt19937_64 rng(1010);
  for (auto& c : schur.cameras) {
    if (!c.fixed) c.T_cw = ExpSE3(RandomTwist(rng, 0.01, 0.005)) * c.T_cw;
  }
  for (auto& t : schur.twists) {
    if (t.fixed) continue;
    for (Eigen::Index k = 0; k < t.coords.size(); ++k) t.coords(k) += RandomVector3(rng, 0.01).x();
  }
  BAProblem dense = schur;
  BAOptions dense_options;
  dense_options.use_schur = false;
  SolveBA(schur, BAOptions{});
  SolveBA(dense, dense_options);
  double diff = 0.0;
  for (std::size_t i = 0; i < schur.cameras.size(); ++i) {
    diff = std::max(diff, (schur.cameras[i].T_cw.matrix() - dense.cameras[i].T_cw.matrix()).norm());
  }
  for (std::size_t i = 0; i < schur.twists.size(); ++i) {
    diff = std::max(diff, (schur.twists[i].coords - dense.twists[i].coords).norm());
    diff = std::max(diff, (schur.ObjectPose(static_cast<int>(i)).matrix() - dense.ObjectPose(static_cast<int>(i)).matrix()).norm());
  }
  Outcome o;
  o.pass = diff <= 1e-8 && schur.cameras.size() == 10 && !schur.twists.empty();
  o.detail = Fmt("max pose/twist difference %.3g over %zu keyframes, %zu twist vars", diff, schur.cameras.size(),
                 schur.twists.size());
  return o;
}

Trajectory FromPositions(const std::vector<Eigen::Vector3d>& positions) {
  Trajectory t;
  for (std::size_t i = 0; i < positions.size(); ++i) t.Append(0.1 * static_cast<double>(i), Pose::FromTranslation(positions[i]));
  return t;
}

// 10. Metric invariances, hand cases and golden reproduction.
Outcome MetricsSanity() {
  std::vector<std::string> failures;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  std::mt19937_64 rng(1011);

  // Invariances.
  Trajectory walk;
  Pose pose;
  for (int i = 0; i < 30; ++i) {
    walk.Append(0.1 * i, pose);
    pose = pose * ExpSE3(RandomTwist(rng, 0.5, 0.1));
  }
  Trajectory moved;
  const Pose g = RandomPose(rng, 20.0, 3.0);
  for (const auto& e : walk.entries()) moved.Append(e.timestamp, g * e.pose);
  check(Ate(walk, walk) < 1e-12, "ATE of identical trajectories");
  check(Ate(moved, walk) < 1e-9, "ATE rigid invariance");
  check(Rpe(moved, walk, 1).translation < 1e-9 && Rpe(moved, walk, 1).rotation_deg < 1e-6, "RPE rigid invariance");

  // Hand cases on dyadic numbers, so the documented formulas are exact.
  std::vector<Eigen::Vector3d> line, bent;
  for (int i = 0; i < 5; ++i) {
    line.emplace_back(i, 0, 0);
    bent.emplace_back(i, i == 2 ? 0.5 : 0.0, 0);
  }
  // Intervals (1,2) and (2,3) carry a 0.5 m error: sqrt((0 + 0.25 + 0.25 + 0) / 4).
  const RpeResult rpe = Rpe(FromPositions(bent), FromPositions(line));
  check(rpe.translation == std::sqrt((0.0 + 0.25 + 0.25 + 0.0) / 4.0) && rpe.rotation_deg == 0.0 && rpe.count == 4,
        "RPE hand case");
  std::vector<Eigen::Vector3d> slow, fast;
  for (int i = 0; i < 6; ++i) {
    slow.emplace_back(2.0 * i, 0, 0);
    fast.emplace_back(2.5 * i, 0, 0);
  }
  // 0.5 m error over 2 m travelled per interval.
  check(Rpe(FromPositions(fast), FromPositions(slow)).translation == 0.5, "RPE per-frame hand case");
  check(Rpe(FromPositions(fast), FromPositions(slow), 1, true).translation == 0.25, "RPE per-metre hand case");
  check(Rpe(FromPositions(fast), FromPositions(slow), 2).translation == 1.0, "RPE delta-2 hand case");
  const PlaneModel road{Eigen::Vector4d(0, 0, 1, 0)};
  check(OutOfPlaneDrift(FromPositions({{0, 0, 0.75}, {1, 0, 1.0}, {2, 0, 0.5}}), road) == 0.25, "drift hand case");
  // The SVD alignment inside ATE is exact only up to rounding.
  check(std::abs(Ate(FromPositions({{0, 0, 0}, {3, 0, 0}}), FromPositions({{0, 0, 0}, {2, 0, 0}})) - 0.5) < 1e-12,
        "ATE hand case");

  // Golden report under a pinned seed.
  SceneConfig scene = DefaultScene(7);
  scene.n_frames = 30;
  const std::string first = FormatReport(RunExperiment(scene, PipelineConfig{}).report);
  const std::string second = FormatReport(RunExperiment(scene, PipelineConfig{}).report);
  check(first == second, "report reproducible across runs");
  std::string golden;
  try {
    golden = ReadTextFile(std::filesystem::path(CDSLAM_GOLDEN_DIR) / "report_seed7_30frames.txt");
  } catch (const Error& e) {
    failures.push_back(e.what());
  }
  check(first == golden, "golden report");

  Outcome o;
  o.pass = failures.empty();
  if (o.pass) {
    o.detail = "invariances, hand cases and golden report all hold";
  } else {
    for (const auto& f : failures) o.detail += (o.detail.empty() ? "" : "; ") + f;
  }
  return o;
}

const std::vector<std::function<Outcome()>>& Criteria() {
  static const std::vector<std::function<Outcome()>> all = {
      LieGroupSuite,     ProjectorSuite, JacobianSuite, NoiselessRecovery, ConstraintBenefit,
      StaticNulling,     OutlierRobustness, Smoothing,  SolverConsistency, MetricsSanity};
  return all;
}

}  // namespace
}  // namespace cdslam

int main(int argc, char** argv) {
  const auto& criteria = cdslam::Criteria();
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) which.push_back(n);
  }
  bool ok = true;
  for (int n : which) {
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "no criterion %d\n", n);
      return 2;
    }
    cdslam::Outcome outcome;
    try {
      outcome = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s (%s)\n", n, outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
    std::fflush(stdout);
    ok = ok && outcome.pass;
  }
  return ok ? 0 : 1;
}
