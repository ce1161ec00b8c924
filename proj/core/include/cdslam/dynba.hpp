#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cdslam/joints.hpp"
#include "cdslam/liegroup.hpp"
#include "cdslam/scenegeom.hpp"
#include "cdslam/worldmodel.hpp"

namespace cdslam {

// Reprojection measurements are stereo triples (u, v, u_right): the right
// image coordinate fixes metric scale, so one fixed camera is a full gauge.

/// Inverse variance of the per-frame twist change in the joint frame:
/// 0.02 m/frame and 0.005 rad/frame, about 2 m/s^2 and 0.5 rad/s^2 at 10 Hz.
inline Vector6d DefaultConstWeights() {
  return (Vector6d() << 2500.0, 2500.0, 2500.0, 40000.0, 40000.0, 40000.0).finished();
}

struct CameraVar {
  int frame_index = 0;
  Pose T_cw;
  bool fixed = false;
};

struct StaticPointVar {
  PointId id = -1;
  Eigen::Vector3d X_w = Eigen::Vector3d::Zero();
  bool fixed = false;
};

struct ObjectPointVar {
  PointId id = -1;
  ClusterId cluster = -1;
  Eigen::Vector3d X_o = Eigen::Vector3d::Zero();
  bool fixed = false;
};

/// Object pose at one temporal keyframe: exp(B c) * snapshot, with B the
/// cluster's world basis. The snapshot is a frozen linearization anchor.
struct TwistVar {
  ClusterId cluster = -1;
  int frame_index = 0;
  Pose snapshot;
  Eigen::VectorXd coords;
  bool fixed = false;
};

struct StatBlock {
  int camera = 0;
  int point = 0;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
};

struct DynaBlock {
  int camera = 0;
  int twist = 0;
  int point = 0;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
};

/// Three twist variables of one cluster at consecutive frames.
struct ConstVelBlock {
  ClusterId cluster = -1;
  std::array<int, 3> twists{};
};

struct BAProblem {
  PinholeCamera camera;
  std::vector<CameraVar> cameras;
  std::vector<StaticPointVar> static_points;
  std::vector<ObjectPointVar> object_points;
  std::vector<TwistVar> twists;
  std::map<ClusterId, TwistProjector> projectors;
  std::vector<StatBlock> stat_blocks;
  std::vector<DynaBlock> dyna_blocks;
  std::vector<ConstVelBlock> const_blocks;
  Vector6d weights = DefaultConstWeights();

  Pose ObjectPose(int twist) const;
  /// Every block references an existing variable of the right cluster.
  bool CheckLive(std::string* why = nullptr) const;
};

struct BAOptions {
  bool use_schur = true;
  int max_iters = 30;
  int outer_rounds = 1;
  double lambda_init = 1e-4;
  double convergence_tol = 1e-8;
  double huber_delta = 2.0;        // whitened reprojection units
  double const_huber_delta = 1.0;  // whitened e_const units
  double mad_scale = 1.4826;
  double sigma_floor = 1e-3;
  Vector6d const_weights = DefaultConstWeights();
  bool use_dyna = true;
  bool use_const = true;
};

struct BAReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  double sigma_static = 0.0;
  std::map<ClusterId, double> sigma_dyna;
};

template <int Rows, int Cols>
using Mat = Eigen::Matrix<double, Rows, Cols>;

struct StatEval {
  Eigen::Vector3d residual;  // z - prediction
  Mat<3, 6> d_camera;        // left increment on T_cw
  Mat<3, 3> d_point;
};

struct DynaEval {
  Eigen::Vector3d residual;
  Mat<3, 6> d_camera;
  Mat<3, 3> d_point;
  Eigen::Matrix<double, 3, Eigen::Dynamic> d_coords;  // freedom coordinates
  Mat<3, 6> d_twist;  // w.r.t. a 6-vector twist passed through P
};

struct ConstVelEval {
  Vector6d residual;  // sqrt(W) * joint-frame twist change (before the kernel)
  std::array<Eigen::Matrix<double, 6, Eigen::Dynamic>, 3> d_coords;
};

/// Raw stereo reprojection residual of a world point. Throws kBehindCamera.
StatEval EvaluateStat(const BAProblem& problem, const StatBlock& block);
/// Reprojection of an object point moved by exp(B c) * snapshot. Throws kBehindCamera.
DynaEval EvaluateDyna(const BAProblem& problem, const DynaBlock& block);
/// sqrt(W) Pi_l Ad_lw (log(Q2 Q1^-1) - log(Q1 Q0^-1)). Throws kAngleAtPi.
ConstVelEval EvaluateConstVel(const BAProblem& problem, const ConstVelBlock& block);

/// Stereo projection (u, v, u_right) of a camera-frame point and its Jacobian.
Eigen::Vector3d StereoProject(const PinholeCamera& cam, const Eigen::Vector3d& p_c,
                              Mat<3, 3>* jacobian = nullptr);

/// Cameras for all listed keyframes (oldest fixed), object poses only on
/// temporal keyframes (oldest per cluster fixed), constant-velocity blocks
/// on consecutive frame triples. Dynamic observations in spatial-only
/// keyframes are left out. Throws kEmptyWindow.
BAProblem BuildProblem(const WorldMap& map, const PinholeCamera& cam, std::span<const int> temporal,
                       std::span<const int> spatial, const BAOptions& options = {});

/// Robust LM with either Schur elimination of the points or a dense solve
/// of the same damped system. Throws kSingularReducedSystem, kDiverged.
BAReport SolveBA(BAProblem& problem, const BAOptions& options = {});

/// Moves exp(B c) into the snapshots and zeroes the coordinates.
void FoldTwists(BAProblem& problem);

/// Copies the solution into the map and recomputes the per-frame twists
/// of the touched clusters.
void WriteBack(const BAProblem& problem, WorldMap& map);

/// JSON dump of variables and blocks.
std::string DumpProblem(const BAProblem& problem);

}  // namespace cdslam
