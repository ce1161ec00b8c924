#include "cdslam/joints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cdslam/error.hpp"

namespace cdslam {

int DegreesOfFreedom(JointType type) {
  switch (type) {
    case JointType::kFree: return 6;
    case JointType::kFixed: return 0;
    case JointType::kPlanar: return 3;
    case JointType::kRevolute: return 1;
    case JointType::kPrismatic: return 1;
  }
  return 6;
}

std::string ToString(JointType type) {
  switch (type) {
    case JointType::kFree: return "free";
    case JointType::kFixed: return "fixed";
    case JointType::kPlanar: return "planar";
    case JointType::kRevolute: return "revolute";
    case JointType::kPrismatic: return "prismatic";
  }
  return "free";
}

JointType ParseJointType(const std::string& name) {
  if (name == "free") return JointType::kFree;
  if (name == "fixed") return JointType::kFixed;
  if (name == "planar") return JointType::kPlanar;
  if (name == "revolute") return JointType::kRevolute;
  if (name == "prismatic") return JointType::kPrismatic;
  throw Error(ErrorCode::kConfigInvalid, "unknown joint type '" + name + "'");
}

Matrix6Xd FreedomBasis(JointType type) {
  auto columns = [](std::initializer_list<int> axes) {
    Matrix6Xd basis = Matrix6Xd::Zero(6, static_cast<Eigen::Index>(axes.size()));
    Eigen::Index col = 0;
    for (int axis : axes) basis(axis, col++) = 1.0;
    return basis;
  };
  switch (type) {
    case JointType::kFree: return Matrix6d::Identity();
    case JointType::kFixed: return Matrix6Xd(6, 0);
    case JointType::kPlanar: return columns({0, 1, 5});
    case JointType::kRevolute: return columns({5});
    case JointType::kPrismatic: return columns({2});
  }
  return Matrix6d::Identity();
}

Matrix6d Projector(const Matrix6Xd& basis) {
  if (basis.cols() == 0) return Matrix6d::Zero();
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-12) {
    throw Error(ErrorCode::kRankDeficient, "joint basis columns are not independent");
  }
  return basis * gram.ldlt().solve(basis.transpose());
}

JointSpec MakeJoint(JointType type, const Pose& frame, std::string parent_class, std::string child_class) {
  JointSpec joint;
  joint.type = type;
  joint.frame = frame;
  joint.basis = FreedomBasis(type);
  joint.parent_class = std::move(parent_class);
  joint.child_class = std::move(child_class);
  return joint;
}

TwistProjector ConjugatedProjector(const JointSpec& joint) {
  TwistProjector proj;
  const Matrix6d ad_wl = Adjoint(joint.frame);
  proj.ad_lw = Adjoint(joint.frame.inverse());
  proj.pi_l = Projector(joint.basis);
  proj.p_world = ad_wl * proj.pi_l * proj.ad_lw;
  proj.world_basis = ad_wl * joint.basis;
  return proj;
}

JointSpec JointFromPlane(const PlaneModel& plane, JointType type, const Eigen::Vector3d& anchor) {
  const Eigen::Vector3d raw_normal = plane.pi.head<3>();
  if (raw_normal.norm() < 1e-9) {
    throw Error(ErrorCode::kDegeneratePlane, "plane normal vanishes");
  }
  const Eigen::Vector3d z = raw_normal.normalized();
  Eigen::Vector3d x = Eigen::Vector3d::UnitX() - z.x() * z;
  if (x.norm() < 0.1) x = Eigen::Vector3d::UnitY() - z.y() * z;
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);

  Eigen::Matrix3d rotation;
  rotation << x, y, z;
  return MakeJoint(type, Pose(rotation, plane.Project(anchor)));
}

bool NormalChangedBeyond(const JointSpec& joint, const PlaneModel& plane, double threshold_deg) {
  const Eigen::Vector3d current = joint.frame.rotation().col(2);
  const double cos_angle = std::clamp(current.dot(plane.UnitNormal()), -1.0, 1.0);
  return std::acos(cos_angle) > threshold_deg * std::numbers::pi / 180.0;
}

JointTable JointTable::Default() {
  JointTable table;
  table.Set("car", {"road", JointType::kPlanar});
  table.Set("bus", {"road", JointType::kPlanar});
  table.Set("door", {"wall", JointType::kRevolute});
  return table;
}

JointTable::Entry JointTable::Lookup(const std::string& child_class) const {
  const auto it = entries_.find(child_class);
  if (it == entries_.end()) return {};
  return it->second;
}

JointTable JointTable::Unconstrained() const {
  JointTable out = *this;
  for (auto& [name, entry] : out.entries_) entry.type = JointType::kFree;
  return out;
}

}  // namespace cdslam
