#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cdslam/liegroup.hpp"

namespace cdslam {

using PointId = std::int64_t;
using ClusterId = std::int64_t;

/// Rectified stereo pinhole camera. Observations live in the left image.
struct PinholeCamera {
  double fx = 720.0;
  double fy = 720.0;
  double cx = 621.0;
  double cy = 187.5;
  double baseline = 0.54;
  int width = 1242;
  int height = 375;

  bool IsValid() const { return fx > 0.0 && fy > 0.0 && baseline > 0.0; }
  bool InImage(const Eigen::Vector2d& uv) const {
    return uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() < width && uv.y() < height;
  }
};

/// Plane pi = (a, b, c, d) with unit 4-norm; points satisfy pi . (p, 1) = 0.
struct PlaneModel {
  Eigen::Vector4d pi = Eigen::Vector4d(0.0, 0.0, 1.0, 0.0);

  Eigen::Vector3d UnitNormal() const { return pi.head<3>().normalized(); }
  /// Signed Euclidean distance along UnitNormal().
  double SignedDistance(const Eigen::Vector3d& p) const {
    return (pi.head<3>().dot(p) + pi(3)) / pi.head<3>().norm();
  }
  Eigen::Vector3d Project(const Eigen::Vector3d& p) const {
    return p - SignedDistance(p) * UnitNormal();
  }
};

struct StereoObservation {
  double u = 0.0;
  double v = 0.0;
  double disparity = 0.0;
  PointId point_id = -1;
  ClusterId cluster_id = -1;
  int frame_index = 0;

  Eigen::Vector2d uv() const { return {u, v}; }
};

constexpr double kMinDepth = 1e-6;
constexpr double kMinDisparity = 0.5;

/// Pinhole projection of a camera-frame point. Throws kBehindCamera.
Eigen::Vector2d ProjectCameraPoint(const PinholeCamera& cam, const Eigen::Vector3d& p_c);

/// Projects a world point through T_cw.
Eigen::Vector2d Project(const PinholeCamera& cam, const Pose& T_cw, const Eigen::Vector3d& X_w);

/// Right-image u coordinate for a camera-frame point.
double ProjectRightU(const PinholeCamera& cam, const Eigen::Vector3d& p_c);

/// d(u, v)/d(p_c).
Eigen::Matrix<double, 2, 3> ProjectionJacobian(const PinholeCamera& cam, const Eigen::Vector3d& p_c);

Eigen::Vector3d BackProject(const PinholeCamera& cam, const Eigen::Vector2d& uv, double depth);

/// Camera-frame point from a rectified stereo observation. Throws
/// kDisparityTooSmall below 0.5 px.
Eigen::Vector3d TriangulateStereo(const PinholeCamera& cam, const StereoObservation& obs);

/// Homogeneous least squares plane through the points (no centering).
/// Throws kDegenerate for fewer than three or collinear points.
PlaneModel FitPlaneSvd(std::span<const Eigen::Vector3d> points);

struct RansacPlaneResult {
  PlaneModel plane;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

struct RansacOptions {
  int max_iters = 200;
  double inlier_tol = 0.05;
  std::uint64_t seed = 0;
};

/// RANSAC over three-point hypotheses, refit with FitPlaneSvd on the best
/// consensus. Throws kNoConsensus when fewer than three inliers are found.
RansacPlaneResult FitPlaneRansac(std::span<const Eigen::Vector3d> points, const RansacOptions& options);

/// Sign convention: normal . z >= 0, falling back to y then x when orthogonal.
PlaneModel CanonicalizePlane(const Eigen::Vector4d& pi);

}  // namespace cdslam
