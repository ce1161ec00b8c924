#pragma once

// SE(3)/se(3) utilities. Twists are ordered (v, omega): translational part
// first. Time steps are one frame, so a twist is a per-frame displacement.

#include <Eigen/Core>

namespace cdslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix34d = Eigen::Matrix<double, 3, 4>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;
using Matrix12x6d = Eigen::Matrix<double, 12, 6>;
using Matrix6x12d = Eigen::Matrix<double, 6, 12>;
using MatrixX6d = Eigen::Matrix<double, Eigen::Dynamic, 6>;
using Matrix6Xd = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Rigid-body velocity over one frame.
struct Twist {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& v_in, const Eigen::Vector3d& omega_in)
      : v(v_in), omega(omega_in) {}
  explicit Twist(const Vector6d& xi) : v(xi.head<3>()), omega(xi.tail<3>()) {}

  static Twist Zero() { return Twist(); }

  Vector6d vector() const {
    Vector6d xi;
    xi << v, omega;
    return xi;
  }

  bool allFinite() const { return v.allFinite() && omega.allFinite(); }
};

/// Rigid transform stored as a rotation matrix and a translation.
class Pose {
 public:
  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose Identity() { return Pose(); }
  static Pose FromMatrix(const Eigen::Matrix4d& m) {
    return Pose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  }
  static Pose FromTranslation(const Eigen::Vector3d& t) {
    return Pose(Eigen::Matrix3d::Identity(), t);
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const;
  Matrix34d matrix3x4() const;

  /// Column-major vectorization of the top 3x4 block: [vec(R); t].
  Vector12d vec() const;

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const {
    return rotation_ * point + translation_;
  }

  /// Orthonormality and unit determinant within `tol`.
  bool IsValid(double tol = 1e-9) const;

  /// Nearest proper rotation (SVD projection); long composition chains
  /// accumulate round-off otherwise.
  Pose Orthonormalized() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

inline Pose Compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose Inverse(const Pose& a) { return a.inverse(); }

Eigen::Matrix3d Skew(const Eigen::Vector3d& a);

/// 4x4 matrix form of a twist: [[skew(omega), v], [0, 0]].
Eigen::Matrix4d TwistHat(const Twist& xi);

Eigen::Matrix3d ExpSO3(const Eigen::Vector3d& omega);

/// Closed-form exponential map with a Taylor fallback for |omega| < 1e-6.
Pose ExpSE3(const Twist& xi);

/// Principal logarithm. Throws Error(kAngleAtPi) when the rotation angle is
/// numerically at pi, where the axis is ill-conditioned.
Twist LogSE3(const Pose& pose);

/// 6x6 adjoint [[R, skew(t) R], [0, R]], mapping twists expressed in the
/// pose's source frame into its target frame.
Matrix6d Adjoint(const Pose& pose);

/// Derivative of vec(exp(xi)) at xi = 0; rows follow Pose::vec().
const Matrix12x6d& DexpBlock();

/// Derivative of LogSE3 with respect to Pose::vec(). Only directions tangent
/// to SE(3) are meaningful.
Matrix6x12d Dlog(const Pose& pose);

/// Left Jacobian of SE(3): exp(xi + d) ~= exp(J_l(xi) d) exp(xi).
Matrix6d LeftJacobianSE3(const Twist& xi);

/// Geodesic rotation angle in radians, in [0, pi].
double RotationAngle(const Eigen::Matrix3d& rotation);

/// Kronecker product of two dense matrices.
Eigen::MatrixXd Kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace cdslam
