#include "multicam/geometry/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace multicam {

namespace {

// Renormalize only when the norm is off by more than a few ulps so that an
// already-unit quaternion (e.g. one read back from disk) stays bit-identical.
Eigen::Quaterniond unit(const Eigen::Quaterniond &q) {
  const double n2 = q.squaredNorm();
  if (std::abs(n2 - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
    return q;
  }
  return q.normalized();
}

}  // namespace

Pose::Pose(const Eigen::Quaterniond &rotation,
           const Eigen::Vector3d &translation)
    : rotation_(unit(rotation)), translation_(translation) {}

Pose::Pose(const Eigen::Matrix3d &rotation, const Eigen::Vector3d &translation)
    : Pose(Eigen::Quaterniond(rotation), translation) {}

Pose Pose::from_matrix(const Eigen::Matrix4d &m) {
  return {Eigen::Matrix3d(m.topLeftCorner<3, 3>()),
          Eigen::Vector3d(m.topRightCorner<3, 1>())};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::inverse() const {
  const Eigen::Quaterniond q_inv = rotation_.conjugate();
  return {q_inv, -(q_inv * translation_)};
}

Pose Pose::operator*(const Pose &rhs) const {
  return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
}

Vector6 Twist::vector() const {
  Vector6 v;
  v << rotation, translation;
  return v;
}

Twist Twist::from_vector(const Vector6 &v) {
  return {v.head<3>(), v.tail<3>()};
}

Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Pose se3_exp(const Twist &xi) {
  const Eigen::Vector3d &w = xi.rotation;
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d W = skew(w);

  double a, b;  // (1 - cos)/theta^2, (theta - sin)/theta^3
  Eigen::Quaterniond q;
  if (theta < 1e-6) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
    q = Eigen::Quaterniond(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
  } else {
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
    q = Eigen::Quaterniond(Eigen::AngleAxisd(theta, w / theta));
  }
  const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() + a * W + b * W * W;
  return {q, V * xi.translation};
}

Twist se3_log(const Pose &pose) {
  Eigen::Quaterniond q = pose.rotation();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double sin_half = q.vec().norm();
  const double theta = 2.0 * std::atan2(sin_half, q.w());

  Eigen::Vector3d w;
  if (sin_half < 1e-12) {
    w = 2.0 * q.vec() / q.w();
  } else {
    w = q.vec() * (theta / sin_half);
  }
  const Eigen::Matrix3d W = skew(w);
  const double theta2 = theta * theta;
  double c;
  if (theta < 1e-6) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    c = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) /
        theta2;
  }
  const Eigen::Matrix3d V_inv = Eigen::Matrix3d::Identity() - 0.5 * W + c * W * W;
  return {w, V_inv * pose.translation()};
}

Matrix6 adjoint(const Pose &pose) {
  const Eigen::Matrix3d R = pose.rotation_matrix();
  Matrix6 ad = Matrix6::Zero();
  ad.topLeftCorner<3, 3>() = R;
  ad.bottomLeftCorner<3, 3>() = skew(pose.translation()) * R;
  ad.bottomRightCorner<3, 3>() = R;
  return ad;
}

double rotation_angle(const Eigen::Quaterniond &q) {
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double rotation_angle(const Eigen::Matrix3d &r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

std::array<double, 7> to_array(const Pose &pose) {
  const auto &q = pose.rotation();
  const auto &t = pose.translation();
  return {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()};
}

Pose pose_from_array(const std::array<double, 7> &v) {
  return {Eigen::Quaterniond(v[0], v[1], v[2], v[3]),
          Eigen::Vector3d(v[4], v[5], v[6])};
}

}  // namespace multicam
