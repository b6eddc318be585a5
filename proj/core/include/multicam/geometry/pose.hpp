#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>

namespace multicam {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Rigid transform in SE(3), stored as a unit quaternion and a translation in
/// meters. `a * b` applies `b` first, then `a`.
class Pose {
 public:
  Pose() = default;
  Pose(const Eigen::Quaterniond &rotation, const Eigen::Vector3d &translation);
  Pose(const Eigen::Matrix3d &rotation, const Eigen::Vector3d &translation);

  static Pose identity() { return {}; }
  static Pose from_matrix(const Eigen::Matrix4d &m);
  static Pose from_translation(const Eigen::Vector3d &t) {
    return {Eigen::Quaterniond::Identity(), t};
  }
  static Pose from_rotation(const Eigen::Quaterniond &q) {
    return {q, Eigen::Vector3d::Zero()};
  }

  const Eigen::Quaterniond &rotation() const { return rotation_; }
  const Eigen::Vector3d &translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const {
    return rotation_.toRotationMatrix();
  }
  Eigen::Matrix4d matrix() const;

  Pose inverse() const;
  Pose operator*(const Pose &rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d &point) const {
    return rotation_ * point + translation_;
  }

 private:
  Eigen::Quaterniond rotation_{Eigen::Quaterniond::Identity()};
  Eigen::Vector3d translation_{Eigen::Vector3d::Zero()};
};

inline Pose compose(const Pose &a, const Pose &b) { return a * b; }

/// Local SE(3) increment. Vector form orders the rotation block first,
/// [wx wy wz vx vy vz], which is also the block order of every 6x6 matrix
/// in this library.
struct Twist {
  Eigen::Vector3d rotation{Eigen::Vector3d::Zero()};
  Eigen::Vector3d translation{Eigen::Vector3d::Zero()};

  Vector6 vector() const;
  static Twist from_vector(const Vector6 &v);
};

Eigen::Matrix3d skew(const Eigen::Vector3d &v);

Pose se3_exp(const Twist &xi);
inline Pose se3_exp(const Vector6 &xi) { return se3_exp(Twist::from_vector(xi)); }
Twist se3_log(const Pose &pose);

/// Adjoint of `pose` such that pose * exp(xi) * pose^-1 == exp(Ad * xi).
Matrix6 adjoint(const Pose &pose);

/// Geodesic rotation angle in radians, cosine clamped to [-1, 1].
double rotation_angle(const Eigen::Quaterniond &q);
double rotation_angle(const Eigen::Matrix3d &r);

/// [qw, qx, qy, qz, tx, ty, tz]
std::array<double, 7> to_array(const Pose &pose);
Pose pose_from_array(const std::array<double, 7> &values);

}  // namespace multicam
