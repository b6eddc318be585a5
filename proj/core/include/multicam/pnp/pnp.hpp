#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "multicam/geometry/pose.hpp"

namespace multicam {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidConfig unless fx, fy > 0 and the principal point lies
  /// inside the image.
  void validate() const;
  Eigen::Vector2d project(const Eigen::Vector3d &point_in_camera) const {
    return {fx * point_in_camera.x() / point_in_camera.z() + cx,
            fy * point_in_camera.y() / point_in_camera.z() + cy};
  }
  bool inside(const Eigen::Vector2d &pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < width &&
           pixel.y() < height;
  }
};

struct Correspondence {
  Eigen::Vector3d point_3d{Eigen::Vector3d::Zero()};  // model frame, meters
  Eigen::Vector2d point_2d{Eigen::Vector2d::Zero()};  // pixels
  double weight = 1.0;                                // [0, 1]
};

inline constexpr std::size_t kPnpMinimalSet = 6;

/// Linear pose from >= 6 correspondences (normalized DLT), rotation projected
/// onto SO(3). Throws DegenerateConfiguration when the design matrix has a
/// null space larger than one.
Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraIntrinsics &K);

/// 0.5 * sum_i w_i * ||project(T X_i) - u_i||^2
double reprojection_cost(const Pose &object_in_camera,
                         std::span<const Correspondence> corrs,
                         const CameraIntrinsics &K);

/// Gradient of reprojection_cost with respect to a left increment
/// exp(delta) * T, rotation block first.
Vector6 reprojection_gradient(const Pose &object_in_camera,
                              std::span<const Correspondence> corrs,
                              const CameraIntrinsics &K);

/// Unweighted pixel RMSE.
double reprojection_rmse(const Pose &object_in_camera,
                         std::span<const Correspondence> corrs,
                         const CameraIntrinsics &K);

/// Damped Gauss-Newton on the reprojection error. The cost never increases;
/// throws NonFiniteResidual when `init` puts a point behind the camera.
Pose pnp_refine(const Pose &init, std::span<const Correspondence> corrs,
                const CameraIntrinsics &K, int iterations = 10);

struct RansacPnpOptions {
  double inlier_px = 5.0;
  int max_iterations = 200;
  std::uint64_t seed = 0;
  int refine_iterations = 10;
};

struct RansacPnpResult {
  Pose pose;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

/// Throws NoConsensus when fewer than six correspondences agree.
RansacPnpResult ransac_pnp(std::span<const Correspondence> corrs,
                           const CameraIntrinsics &K,
                           const RansacPnpOptions &options = {});

}  // namespace multicam
