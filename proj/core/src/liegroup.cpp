#include "cdslam/liegroup.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "cdslam/error.hpp"

namespace cdslam {
namespace {

constexpr double kExpTaylorThreshold = 1e-6;
constexpr double kSeriesThreshold = 1e-2;
constexpr double kAngleAtPiTraceTol = 1e-6;

// sin(x)/x, (1 - cos x)/x^2, (x - sin x)/x^3
struct RodriguesCoeffs {
  double a;
  double b;
  double c;
};

RodriguesCoeffs Coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kExpTaylorThreshold) {
    return {1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0};
  }
  const double s = std::sin(theta);
  const double half = std::sin(0.5 * theta);
  return {s / theta, 2.0 * half * half / t2, (theta - s) / (t2 * theta)};
}

// Coefficient of W^2 in the inverse of the SE(3) V matrix.
double InverseVCoeff(double theta) {
  const double t2 = theta * theta;
  if (theta < kSeriesThreshold) {
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  const double half = 0.5 * theta;
  return (1.0 - half * std::cos(half) / std::sin(half)) / t2;
}

// d(InverseVCoeff)/dtheta divided by theta.
double InverseVCoeffSlope(double theta) {
  const double t2 = theta * theta;
  if (theta < kSeriesThreshold) {
    return 1.0 / 360.0 + t2 / 7560.0 + t2 * t2 / 201600.0;
  }
  const double half = 0.5 * theta;
  const double sh = std::sin(half);
  const double cot = std::cos(half) / sh;
  const double g = 1.0 - half * cot;
  const double dg = -0.5 * cot + 0.25 * theta / (sh * sh);
  return (dg / t2 - 2.0 * g / (t2 * theta)) / theta;
}

Eigen::Vector3d Vee(const Eigen::Matrix3d& m) {
  return 0.5 * Eigen::Vector3d(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

void CheckNotAtPi(const Eigen::Matrix3d& rotation) {
  if (rotation.trace() <= -1.0 + kAngleAtPiTraceTol) {
    throw Error(ErrorCode::kAngleAtPi, "rotation angle too close to pi for the principal log");
  }
}

}  // namespace

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Matrix34d Pose::matrix3x4() const {
  Matrix34d m;
  m << rotation_, translation_;
  return m;
}

Vector12d Pose::vec() const {
  Vector12d out;
  out.head<9>() = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(rotation_.data());
  out.tail<3>() = translation_;
  return out;
}

Pose Pose::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return Pose(rt, -rt * translation_);
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

bool Pose::IsValid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).norm();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

Pose Pose::Orthonormalized() const {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return Pose(u * svd.matrixV().transpose(), translation_);
}

Eigen::Matrix3d Skew(const Eigen::Vector3d& a) {
  Eigen::Matrix3d m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

Eigen::Matrix4d TwistHat(const Twist& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = Skew(xi.omega);
  m.topRightCorner<3, 1>() = xi.v;
  return m;
}

Eigen::Matrix3d ExpSO3(const Eigen::Vector3d& omega) {
  const RodriguesCoeffs k = Coefficients(omega.norm());
  const Eigen::Matrix3d w = Skew(omega);
  return Eigen::Matrix3d::Identity() + k.a * w + k.b * w * w;
}

Pose ExpSE3(const Twist& xi) {
  const RodriguesCoeffs k = Coefficients(xi.omega.norm());
  const Eigen::Matrix3d w = Skew(xi.omega);
  const Eigen::Matrix3d w2 = w * w;
  const Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity() + k.a * w + k.b * w2;
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + k.b * w + k.c * w2;
  return Pose(rotation, v * xi.v);
}

Twist LogSE3(const Pose& pose) {
  const Eigen::Matrix3d& r = pose.rotation();
  CheckNotAtPi(r);
  const double c = 0.5 * (r.trace() - 1.0);
  const Eigen::Vector3d s = Vee(r);
  const double n = s.norm();
  const double theta = std::atan2(n, c);
  const double f = n < 1e-8 ? 1.0 / c - n * n / (3.0 * c * c * c) : theta / n;
  const Eigen::Vector3d omega = f * s;
  const Eigen::Matrix3d w = Skew(omega);
  const Eigen::Matrix3d v_inv =
      Eigen::Matrix3d::Identity() - 0.5 * w + InverseVCoeff(theta) * w * w;
  return Twist(v_inv * pose.translation(), omega);
}

Matrix6d Adjoint(const Pose& pose) {
  Matrix6d ad = Matrix6d::Zero();
  const Eigen::Matrix3d& r = pose.rotation();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = Skew(pose.translation()) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

const Matrix12x6d& DexpBlock() {
  static const Matrix12x6d block = [] {
    Matrix12x6d m = Matrix12x6d::Zero();
    for (int j = 0; j < 3; ++j) {
      m.block<3, 3>(3 * j, 3) = -Skew(Eigen::Vector3d::Unit(j));
    }
    m.block<3, 3>(9, 0) = Eigen::Matrix3d::Identity();
    return m;
  }();
  return block;
}

Matrix6x12d Dlog(const Pose& pose) {
  const Eigen::Matrix3d& r = pose.rotation();
  const Eigen::Vector3d& t = pose.translation();
  CheckNotAtPi(r);

  const double c = 0.5 * (r.trace() - 1.0);
  const Eigen::Vector3d s = Vee(r);
  const double n = s.norm();
  const double theta = std::atan2(n, c);

  double f = 0.0;
  double f_n_over_n = 0.0;  // (df/dn) / n
  if (n < 1e-4) {
    const double c3 = c * c * c;
    f = 1.0 / c - n * n / (3.0 * c3) + n * n * n * n / (5.0 * c3 * c * c);
    f_n_over_n = -2.0 / (3.0 * c3) + 4.0 * n * n / (5.0 * c3 * c * c);
  } else {
    f = theta / n;
    f_n_over_n = (c / (n * n + c * c) - theta / n) / (n * n);
  }
  const double f_c = -1.0 / (n * n + c * c);

  // Partials of s and c with respect to vec(R) (column-major).
  Eigen::Matrix<double, 3, 9> ds = Eigen::Matrix<double, 3, 9>::Zero();
  ds(0, 5) = 0.5;
  ds(0, 7) = -0.5;
  ds(1, 6) = 0.5;
  ds(1, 2) = -0.5;
  ds(2, 1) = 0.5;
  ds(2, 3) = -0.5;
  Eigen::Matrix<double, 1, 9> dc = Eigen::Matrix<double, 1, 9>::Zero();
  dc(0, 0) = dc(0, 4) = dc(0, 8) = 0.5;

  const Eigen::Matrix<double, 3, 9> domega =
      f * ds + s * (f_n_over_n * s.transpose() * ds + f_c * dc);

  const Eigen::Vector3d omega = f * s;
  const Eigen::Matrix3d w = Skew(omega);
  const double beta = InverseVCoeff(theta);
  const double beta_slope = InverseVCoeffSlope(theta);
  const Eigen::Matrix3d v_inv = Eigen::Matrix3d::Identity() - 0.5 * w + beta * w * w;

  const double wt = omega.dot(t);
  const Eigen::Matrix3d dv_domega =
      0.5 * Skew(t) +
      beta * (wt * Eigen::Matrix3d::Identity() + omega * t.transpose() - 2.0 * t * omega.transpose()) +
      (w * w * t) * (beta_slope * omega.transpose());

  Matrix6x12d out = Matrix6x12d::Zero();
  out.block<3, 9>(0, 0) = dv_domega * domega;
  out.block<3, 3>(0, 9) = v_inv;
  out.block<3, 9>(3, 0) = domega;
  return out;
}

Matrix6d LeftJacobianSE3(const Twist& xi) {
  const double theta = xi.omega.norm();
  const Eigen::Matrix3d phi = Skew(xi.omega);
  const Eigen::Matrix3d rho = Skew(xi.v);
  const RodriguesCoeffs k = Coefficients(theta);
  const Eigen::Matrix3d phi2 = phi * phi;
  const Eigen::Matrix3d j = Eigen::Matrix3d::Identity() + k.b * phi + k.c * phi2;

  const double t2 = theta * theta;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  if (theta < kSeriesThreshold) {
    c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0;
  } else {
    const double s = std::sin(theta);
    const double co = std::cos(theta);
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * co - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * co) / (2.0 * t2 * t2 * theta);
  }
  const Eigen::Matrix3d pr = phi * rho;
  const Eigen::Matrix3d rp = rho * phi;
  const Eigen::Matrix3d prp = pr * phi;
  const Eigen::Matrix3d q = 0.5 * rho + c1 * (pr + rp + prp) +
                            c2 * (phi2 * rho + rho * phi2 - 3.0 * prp) +
                            c3 * (prp * phi + phi2 * rho * phi);

  Matrix6d out = Matrix6d::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.topRightCorner<3, 3>() = q;
  out.bottomRightCorner<3, 3>() = j;
  return out;
}

double RotationAngle(const Eigen::Matrix3d& rotation) {
  const double c = std::clamp(0.5 * (rotation.trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

Eigen::MatrixXd Kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace cdslam
