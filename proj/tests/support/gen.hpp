#pragma once

// Hand-rolled generators for property tests. Every generator draws from a
// caller-owned engine so a failing case can be replayed from its seed.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "multicam/geometry/object_model.hpp"
#include "multicam/geometry/pose.hpp"

namespace multicam::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gauss(Rng &rng, double sigma = 1.0) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

inline Eigen::Vector3d vec3(Rng &rng, double half_extent = 1.0) {
  return {uniform(rng, -half_extent, half_extent), uniform(rng, -half_extent, half_extent),
          uniform(rng, -half_extent, half_extent)};
}

inline Eigen::Vector3d unit_vec(Rng &rng) {
  Eigen::Vector3d v;
  do v = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

// Uniform on SO(3) (Shoemake).
inline Eigen::Quaterniond rotation(Rng &rng) {
  const double u1 = uniform(rng, 0, 1), u2 = uniform(rng, 0, 2 * std::numbers::pi),
               u3 = uniform(rng, 0, 2 * std::numbers::pi);
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  return Eigen::Quaterniond(a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3)).normalized();
}

// Rotation by an angle strictly below `max_angle` about a random axis.
inline Eigen::Quaterniond small_rotation(Rng &rng, double max_angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, 0, max_angle), unit_vec(rng)));
}

inline Pose pose(Rng &rng, double half_extent = 1.0) { return Pose(rotation(rng), vec3(rng, half_extent)); }

inline Pose perturb(const Pose &p, Rng &rng, double sigma_t, double max_angle) {
  return Pose(small_rotation(rng, max_angle) * p.rotation(),
              p.translation() + Eigen::Vector3d(gauss(rng, sigma_t), gauss(rng, sigma_t), gauss(rng, sigma_t)));
}

inline Twist twist(Rng &rng, double max_angle, double half_extent) {
  Twist t;
  t.rotation = unit_vec(rng) * uniform(rng, 0, max_angle);
  t.translation = vec3(rng, half_extent);
  return t;
}

inline PointCloud cloud(Rng &rng, std::size_t n, double half_extent = 0.05) {
  PointCloud pts(n);
  for (auto &p : pts) p = vec3(rng, half_extent);
  return pts;
}

// Random cloud made exactly invariant under `order` rotations about z by
// replicating every sample over the orbit.
inline ObjectModel cyclic_model(Rng &rng, int order, std::size_t base_points = 24, int category = 1) {
  const auto syms = cyclic_symmetries(Eigen::Vector3d::UnitZ(), order);
  PointCloud base = cloud(rng, base_points), pts;
  for (const auto &s : syms)
    for (const auto &p : base) pts.push_back(s * p);
  return make_object_model(category, pts, syms);
}

// Object-in-camera pose in front of a camera looking down +z.
inline Pose pose_in_front(Rng &rng, double depth_lo = 0.4, double depth_hi = 1.0) {
  return Pose(rotation(rng), Eigen::Vector3d(uniform(rng, -0.15, 0.15), uniform(rng, -0.1, 0.1),
                                             uniform(rng, depth_lo, depth_hi)));
}

}  // namespace multicam::testing
