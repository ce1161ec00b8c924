#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cdslam/joints.hpp"
#include "cdslam/liegroup.hpp"
#include "cdslam/robust.hpp"
#include "cdslam/scenegeom.hpp"

namespace cdslam {

template <class Estimate>
struct TrackResult {
  Estimate estimate;
  double initial_cost = 0.0;  // at the start of the final robust round
  double final_cost = 0.0;
  int inlier_count = 0;
  int iterations = 0;
  bool converged = false;
  double sigma = 0.0;  // MAD scale of the final round, pixels
  std::vector<bool> inliers;
};

/// A world-frame point of a static cluster and its pixel in the current frame.
struct StaticCorrespondence {
  PointId point_id = -1;
  Eigen::Vector3d X_w = Eigen::Vector3d::Zero();
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

/// Camera pose T_cw by robust LM on a left-multiplied twist increment.
/// Throws kInsufficientPoints below six correspondences.
TrackResult<Pose> TrackCamera(std::span<const StaticCorrespondence> correspondences,
                              const PinholeCamera& cam, const Pose& T_cw_init,
                              const RobustConfig& cfg);

/// An object-frame map point matched to a pixel in the current frame.
struct ObjectMatch {
  PointId point_id = -1;
  Eigen::Vector3d X_o = Eigen::Vector3d::Zero();
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

struct ObjectTrackInput {
  Pose T_wo_prev;
  Pose T_cw;
  TwistProjector projector;
  Twist initial;                      // world-frame starting guess
  std::optional<Twist> coast_twist;   // used when there are too few matches
};

struct ObjectTrackResult : TrackResult<Twist> {
  Pose pose;  // exp(P xi) * T_wo_prev
  Eigen::VectorXd coords;
  bool coasted = false;
  std::vector<ObjectMatch> matches;
};

constexpr int kMinObjectMatches = 3;

/// World-frame object twist constrained to range(P), optimized in the
/// joint's freedom coordinates. Coasts on `coast_twist` with fewer than
/// three matches, otherwise throws kInsufficientPoints.
ObjectTrackResult TrackObjectTwist(std::span<const ObjectMatch> matches, const ObjectTrackInput& input,
                                   const PinholeCamera& cam, const RobustConfig& cfg);

struct ObjectPoint {
  PointId point_id = -1;
  Eigen::Vector3d X_o = Eigen::Vector3d::Zero();
};

/// Projects the unmatched cluster points with the current estimate, pairs
/// each with the nearest free candidate pixel inside `search_radius_px` and
/// re-solves. Returns `current` unchanged when nothing new is found or the
/// per-inlier cost would get worse.
ObjectTrackResult RefineWithMapProjection(const ObjectTrackResult& current,
                                          std::span<const ObjectPoint> cluster_points,
                                          std::span<const Eigen::Vector2d> candidates,
                                          double search_radius_px, const ObjectTrackInput& input,
                                          const PinholeCamera& cam, const RobustConfig& cfg);

/// d pi(T_cw exp(P xi) T_wo_prev X_o) / d xi, assembled from Kronecker
/// blocks of the vectorized pose chain. Throws kBehindCamera.
Eigen::Matrix<double, 2, 6> ObjectTwistJacobian(const Eigen::Vector3d& X_o, const Pose& T_cw,
                                                const Pose& T_wo_prev, const Matrix6d& P,
                                                const PinholeCamera& cam, const Twist& xi);

/// Least-squares freedom coordinates of a world twist.
Eigen::VectorXd FreedomCoordinates(const TwistProjector& projector, const Vector6d& xi_w);

}  // namespace cdslam
