#pragma once

#include <string>
#include <vector>

#include "cdslam/liegroup.hpp"
#include "cdslam/scenegeom.hpp"

namespace cdslam {

struct TrajectoryEntry {
  double timestamp = 0.0;
  Pose pose;
};

/// Timestamped poses with strictly increasing timestamps.
class Trajectory {
 public:
  /// Throws kConfigInvalid when `timestamp` does not increase.
  void Append(double timestamp, const Pose& pose);

  const std::vector<TrajectoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const TrajectoryEntry& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<TrajectoryEntry> entries_;
};

struct AssociatedPair {
  std::size_t est = 0;
  std::size_t gt = 0;
};

/// Nearest ground-truth timestamp within `tol` for each estimate, keeping
/// the pairs monotone in both trajectories.
std::vector<AssociatedPair> AssociateByTimestamp(const Trajectory& est, const Trajectory& gt, double tol);

/// Half of the median ground-truth sampling period.
double DefaultAssociationTolerance(const Trajectory& gt);

/// Rigid transform T minimizing sum |T * src_i - dst_i|^2 (no scale).
Pose AlignRigid(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst);

/// Translation RMSE after rigid alignment of the estimate onto the ground
/// truth. A negative tolerance selects DefaultAssociationTolerance. Throws
/// kNoOverlap below two associated poses.
double Ate(const Trajectory& est, const Trajectory& gt, double tol = -1.0);

struct RpeResult {
  double translation = 0.0;   // m per interval, or m/m in per-meter mode
  double rotation_deg = 0.0;  // degrees per interval
  int count = 0;
};

/// RMSE over i of (gt_i^-1 gt_{i+delta})^-1 (est_i^-1 est_{i+delta}).
/// Per-meter mode divides each translation error by the ground-truth
/// distance travelled over the interval. Throws kNoOverlap.
RpeResult Rpe(const Trajectory& est, const Trajectory& gt, int delta = 1, bool per_meter = false,
              double tol = -1.0);

/// max_i |d(origin_i) - d(origin_0)| for the signed plane distance d.
double OutOfPlaneDrift(const Trajectory& trajectory, const PlaneModel& plane);

}  // namespace cdslam
