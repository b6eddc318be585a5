#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "multicam/geometry/object_model.hpp"
#include "multicam/geometry/pose.hpp"

namespace multicam {

/// Matched surface / model points of one object seen by one camera.
struct ObservationSet {
  std::string camera_id;
  int instance_id = 0;
  PointCloud surface_points;  // X, camera frame
  PointCloud model_points;    // P, model frame
  bool inlier = true;         // r_ij
};

/// Throws InvalidArgument unless |X| == |P| >= 3.
void validate(const ObservationSet &obs);

struct BaProblem {
  std::map<std::string, Pose> cameras;  // camera in world
  std::map<int, Pose> objects;          // object in world
  std::set<std::string> fixed_cameras;  // gauge, normally the HMD
  std::vector<ObservationSet> observations;
};

struct BaOptions {
  int max_iterations = 30;
  double tolerance = 1e-6;      // relative energy change
  double huber_delta = 0.02;    // meters
  double initial_lambda = 1e-3;
  double max_lambda = 1e10;
};

/// Huber-robustified point energy: sum over observations and points of
/// rho(|T_WC X - T_WO P|), rho(r) = r^2 / 2 below delta, linear above.
/// Throws UnanchoredCamera for a camera without pose.
double energy(std::span<const ObservationSet> observations,
              const std::map<std::string, Pose> &cameras,
              const std::map<int, Pose> &objects, double huber_delta = 0.02);

/// Gradient and Gauss-Newton Hessian of one observation's energy with respect
/// to a right (object-local) increment T_WO * exp(theta).
struct ObjectTerm {
  Vector6 g = Vector6::Zero();
  Matrix6 H = Matrix6::Zero();
  double energy = 0.0;
};

ObjectTerm object_term(const ObservationSet &obs, const Pose &camera_in_world,
                       const Pose &object_in_world, double huber_delta);

/// Maps a world-frame left camera increment exp(theta) * T_WC onto the
/// object-local increment that changes the residuals identically:
/// J = -Ad(T_WO^-1). Moving the camera is moving the object the other way.
Matrix6 camera_jacobian(const Pose &object_in_world);

struct CameraSystem {
  Vector6 g = Vector6::Zero();
  Matrix6 H = Matrix6::Zero();
  double energy = 0.0;
  std::size_t terms = 0;
};

/// g_cam = sum_i r_ij J_i^T g_i and H_cam = sum_i r_ij J_i^T H_i J_i over the
/// observations of `camera_id`.
CameraSystem camera_system(const std::string &camera_id,
                           std::span<const ObservationSet> observations,
                           const std::map<std::string, Pose> &cameras,
                           const std::map<int, Pose> &objects,
                           double huber_delta);

/// Damped solve theta = -(H + lambda I)^-1 g. Throws SingularHessian if the
/// damped system is not positive definite.
Vector6 damped_step(const Matrix6 &H, const Vector6 &g, double lambda);

/// One Gauss-Newton step on a single camera (objects frozen), returned as a
/// world-frame left twist.
Vector6 camera_only_step(const std::string &camera_id,
                         std::span<const ObservationSet> observations,
                         const std::map<std::string, Pose> &cameras,
                         const std::map<int, Pose> &objects,
                         double huber_delta, double lambda = 0.0);

/// One Gauss-Newton step on a single object (cameras frozen), returned as a
/// world-frame left twist Ad(T_WO) * theta_local so it is comparable with
/// camera_only_step().
Vector6 object_only_step(int instance_id,
                         std::span<const ObservationSet> observations,
                         const std::map<std::string, Pose> &cameras,
                         const std::map<int, Pose> &objects,
                         double huber_delta, double lambda = 0.0);

struct BaTraceRow {
  int iteration = 0;
  double energy = 0.0;
  double lambda = 0.0;         // largest camera damping after the iteration
  double max_step_norm = 0.0;  // over accepted steps
};

struct BaResult {
  std::map<std::string, Pose> cameras;
  std::map<int, Pose> objects;
  std::vector<BaTraceRow> trace;  // row 0 is the initial state
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Alternating object / camera Gauss-Newton. Only inlier observations of
/// objects seen by at least two cameras couple into camera updates; every
/// other object is refined against its camera alone and moves with it.
/// Fixed cameras are returned bit-identical.
BaResult bundle_adjust(const BaProblem &problem, const BaOptions &options = {});

/// CSV with columns iter,energy,lambda,max_step_norm.
std::string trace_to_csv(std::span<const BaTraceRow> trace);

}  // namespace multicam
