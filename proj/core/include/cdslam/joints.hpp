#pragma once

#include <map>
#include <optional>
#include <string>

#include "cdslam/liegroup.hpp"
#include "cdslam/scenegeom.hpp"

namespace cdslam {

enum class JointType { kFree, kFixed, kPlanar, kRevolute, kPrismatic };

int DegreesOfFreedom(JointType type);
std::string ToString(JointType type);
/// Parses "free", "fixed", "planar", "revolute", "prismatic". Throws kConfigInvalid.
JointType ParseJointType(const std::string& name);

/// Canonical joint-frame basis; the joint axis is z.
Matrix6Xd FreedomBasis(JointType type);

/// A_l (A_l^T A_l)^-1 A_l^T. Throws kRankDeficient.
Matrix6d Projector(const Matrix6Xd& basis);

struct JointSpec {
  JointType type = JointType::kFree;
  Pose frame;  // T_{w,l}
  Matrix6Xd basis = Matrix6d::Identity();
  std::string parent_class;
  std::string child_class;
};

JointSpec MakeJoint(JointType type, const Pose& frame, std::string parent_class = {},
                    std::string child_class = {});

/// Joint-frame projector and its world-frame conjugate
/// Ad(T_wl) * pi_l * Ad(T_wl^-1). `world_basis` spans range(p_world) and is
/// the coordinate map used by the constrained estimators.
struct TwistProjector {
  Matrix6d pi_l = Matrix6d::Identity();
  Matrix6d p_world = Matrix6d::Identity();
  Matrix6Xd world_basis = Matrix6d::Identity();
  Matrix6d ad_lw = Matrix6d::Identity();

  int dof() const { return static_cast<int>(world_basis.cols()); }
  Vector6d Apply(const Vector6d& xi) const { return p_world * xi; }
  /// World twist -> joint-frame twist.
  Vector6d ToJointFrame(const Vector6d& xi_w) const { return ad_lw * xi_w; }
};

TwistProjector ConjugatedProjector(const JointSpec& joint);

/// Joint frame on a plane: origin is the anchor projected onto the plane,
/// z is the unit normal, x is Gram-Schmidt of world x (world y if nearly
/// parallel). Throws kDegeneratePlane.
JointSpec JointFromPlane(const PlaneModel& plane, JointType type, const Eigen::Vector3d& anchor);

/// Re-fit hysteresis: true when the joint normal moved more than `threshold_deg`.
bool NormalChangedBeyond(const JointSpec& joint, const PlaneModel& plane, double threshold_deg = 0.5);

/// child_class -> (parent_class, joint type) table.
class JointTable {
 public:
  struct Entry {
    std::string parent_class;
    JointType type = JointType::kFree;
  };

  static JointTable Default();

  void Set(const std::string& child_class, Entry entry) { entries_[child_class] = std::move(entry); }
  /// Unlisted classes map to a Free joint with no parent.
  Entry Lookup(const std::string& child_class) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Every entry forced to Free (ablation of the constraints).
  JointTable Unconstrained() const;

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace cdslam
