#include "cdslam/scenegeom.hpp"

#include <random>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "cdslam/error.hpp"

namespace cdslam {

Eigen::Vector2d ProjectCameraPoint(const PinholeCamera& cam, const Eigen::Vector3d& p_c) {
  if (!(p_c.z() > kMinDepth)) {
    throw Error(ErrorCode::kBehindCamera, "point depth " + std::to_string(p_c.z()));
  }
  return {cam.fx * p_c.x() / p_c.z() + cam.cx, cam.fy * p_c.y() / p_c.z() + cam.cy};
}

Eigen::Vector2d Project(const PinholeCamera& cam, const Pose& T_cw, const Eigen::Vector3d& X_w) {
  return ProjectCameraPoint(cam, T_cw * X_w);
}

double ProjectRightU(const PinholeCamera& cam, const Eigen::Vector3d& p_c) {
  if (!(p_c.z() > kMinDepth)) {
    throw Error(ErrorCode::kBehindCamera, "point depth " + std::to_string(p_c.z()));
  }
  return cam.fx * (p_c.x() - cam.baseline) / p_c.z() + cam.cx;
}

Eigen::Matrix<double, 2, 3> ProjectionJacobian(const PinholeCamera& cam, const Eigen::Vector3d& p_c) {
  const double iz = 1.0 / p_c.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * iz, 0.0, -cam.fx * p_c.x() * iz2,
       0.0, cam.fy * iz, -cam.fy * p_c.y() * iz2;
  return j;
}

Eigen::Vector3d BackProject(const PinholeCamera& cam, const Eigen::Vector2d& uv, double depth) {
  return {(uv.x() - cam.cx) * depth / cam.fx, (uv.y() - cam.cy) * depth / cam.fy, depth};
}

Eigen::Vector3d TriangulateStereo(const PinholeCamera& cam, const StereoObservation& obs) {
  if (!(obs.disparity >= kMinDisparity)) {
    throw Error(ErrorCode::kDisparityTooSmall, "disparity " + std::to_string(obs.disparity));
  }
  const double z = cam.fx * cam.baseline / obs.disparity;
  return BackProject(cam, obs.uv(), z);
}

PlaneModel CanonicalizePlane(const Eigen::Vector4d& pi) {
  PlaneModel plane;
  plane.pi = pi.normalized();
  const Eigen::Vector3d n = plane.pi.head<3>();
  double key = n.z();
  if (std::abs(key) <= 1e-12) key = n.y();
  if (std::abs(key) <= 1e-12) key = n.x();
  if (key < 0.0) plane.pi = -plane.pi;
  return plane;
}

PlaneModel FitPlaneSvd(std::span<const Eigen::Vector3d> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 3) {
    throw Error(ErrorCode::kDegenerate, "plane fit needs at least 3 points");
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);

  Eigen::MatrixX3d centered(n, 3);
  Eigen::MatrixX4d data(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d& p = points[static_cast<std::size_t>(i)];
    centered.row(i) = (p - centroid).transpose();
    data.row(i) << p.x(), p.y(), p.z(), 1.0;
  }
  const Eigen::Vector3d spread = Eigen::JacobiSVD<Eigen::MatrixX3d>(centered).singularValues();
  if (spread(1) <= 1e-9 * std::max(1.0, spread(0))) {
    throw Error(ErrorCode::kDegenerate, "points are collinear");
  }

  Eigen::JacobiSVD<Eigen::MatrixX4d> svd(data, Eigen::ComputeFullV);
  return CanonicalizePlane(svd.matrixV().col(3));
}

RansacPlaneResult FitPlaneRansac(std::span<const Eigen::Vector3d> points, const RansacOptions& options) {
  const std::size_t n = points.size();
  if (n < 3) {
    throw Error(ErrorCode::kNoConsensus, "RANSAC needs at least 3 points");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<bool> best_mask;
  int best_count = 0;
  std::vector<bool> mask(n);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    const std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    std::size_t i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;

    Eigen::Vector3d normal = (points[i1] - points[i0]).cross(points[i2] - points[i0]);
    const double len = normal.norm();
    if (len < 1e-12) continue;
    normal /= len;
    const double d = -normal.dot(points[i0]);

    int count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      mask[k] = std::abs(normal.dot(points[k]) + d) <= options.inlier_tol;
      count += mask[k] ? 1 : 0;
    }
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
    }
  }
  if (best_count < 3) {
    throw Error(ErrorCode::kNoConsensus, "best consensus has " + std::to_string(best_count) + " points");
  }

  std::vector<Eigen::Vector3d> inliers;
  inliers.reserve(static_cast<std::size_t>(best_count));
  for (std::size_t k = 0; k < n; ++k) {
    if (best_mask[k]) inliers.push_back(points[k]);
  }
  RansacPlaneResult result;
  result.plane = FitPlaneSvd(inliers);
  result.inliers = std::move(best_mask);
  result.inlier_count = best_count;
  return result;
}

}  // namespace cdslam
