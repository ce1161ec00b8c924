#include "cdslam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "cdslam/error.hpp"

namespace cdslam {

void Trajectory::Append(double timestamp, const Pose& pose) {
  if (!entries_.empty() && !(timestamp > entries_.back().timestamp)) {
    throw Error(ErrorCode::kConfigInvalid, "trajectory timestamps must increase");
  }
  entries_.push_back({timestamp, pose});
}

double DefaultAssociationTolerance(const Trajectory& gt) {
  if (gt.size() < 2) return 0.5;
  std::vector<double> periods;
  for (std::size_t i = 1; i < gt.size(); ++i) periods.push_back(gt[i].timestamp - gt[i - 1].timestamp);
  std::nth_element(periods.begin(), periods.begin() + static_cast<std::ptrdiff_t>(periods.size() / 2), periods.end());
  return 0.5 * periods[periods.size() / 2];
}

std::vector<AssociatedPair> AssociateByTimestamp(const Trajectory& est, const Trajectory& gt, double tol) {
  std::vector<AssociatedPair> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    while (j + 1 < gt.size() && std::abs(gt[j + 1].timestamp - t) <= std::abs(gt[j].timestamp - t)) ++j;
    if (j < gt.size() && std::abs(gt[j].timestamp - t) <= tol) {
      if (pairs.empty() || pairs.back().gt < j) pairs.push_back({i, j});
    }
  }
  return pairs;
}

Pose AlignRigid(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::Matrix3Xd a(3, n);
  Eigen::Matrix3Xd b(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.col(i) = src[static_cast<std::size_t>(i)];
    b.col(i) = dst[static_cast<std::size_t>(i)];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, false);
  return Pose::FromMatrix(t);
}

double Ate(const Trajectory& est, const Trajectory& gt, double tol) {
  if (tol < 0.0) tol = DefaultAssociationTolerance(gt);
  const auto pairs = AssociateByTimestamp(est, gt, tol);
  if (pairs.size() < 2) throw Error(ErrorCode::kNoOverlap, "fewer than two associated poses");
  std::vector<Eigen::Vector3d> src;
  std::vector<Eigen::Vector3d> dst;
  for (const auto& p : pairs) {
    src.push_back(est[p.est].pose.translation());
    dst.push_back(gt[p.gt].pose.translation());
  }
  const Pose align = AlignRigid(src, dst);
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (align * src[i] - dst[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

RpeResult Rpe(const Trajectory& est, const Trajectory& gt, int delta, bool per_meter, double tol) {
  if (delta < 1) throw Error(ErrorCode::kConfigInvalid, "rpe delta must be positive");
  if (tol < 0.0) tol = DefaultAssociationTolerance(gt);
  const auto pairs = AssociateByTimestamp(est, gt, tol);
  if (pairs.size() < static_cast<std::size_t>(delta) + 1) {
    throw Error(ErrorCode::kNoOverlap, "not enough associated poses for the interval");
  }
  const double kRadToDeg = 180.0 / std::numbers::pi;
  RpeResult out;
  double sum_t = 0.0;
  double sum_r = 0.0;
  for (std::size_t k = 0; k + static_cast<std::size_t>(delta) < pairs.size(); ++k) {
    const auto& a = pairs[k];
    const auto& b = pairs[k + static_cast<std::size_t>(delta)];
    const Pose gt_rel = gt[a.gt].pose.inverse() * gt[b.gt].pose;
    const Pose est_rel = est[a.est].pose.inverse() * est[b.est].pose;
    const Pose err = gt_rel.inverse() * est_rel;
    double t = err.translation().norm();
    if (per_meter) {
      const double travelled = gt_rel.translation().norm();
      if (travelled <= 1e-12) continue;
      t /= travelled;
    }
    const double r = RotationAngle(err.rotation()) * kRadToDeg;
    sum_t += t * t;
    sum_r += r * r;
    ++out.count;
  }
  if (out.count == 0) throw Error(ErrorCode::kNoOverlap, "no interval with ground-truth motion");
  out.translation = std::sqrt(sum_t / out.count);
  out.rotation_deg = std::sqrt(sum_r / out.count);
  return out;
}

double OutOfPlaneDrift(const Trajectory& trajectory, const PlaneModel& plane) {
  if (trajectory.empty()) return 0.0;
  const double d0 = plane.SignedDistance(trajectory[0].pose.translation());
  double drift = 0.0;
  for (const auto& e : trajectory.entries()) {
    drift = std::max(drift, std::abs(plane.SignedDistance(e.pose.translation()) - d0));
  }
  return drift;
}

}  // namespace cdslam
