#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "multicam/evalio/dataset.hpp"
#include "multicam/geometry/object_model.hpp"
#include "multicam/pnp/pnp.hpp"
#include "multicam/sim/primitives.hpp"

namespace multicam {

struct ObjectPlacement {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, meters
  double yaw = 0.0;                                    // about world z, radians
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // m/s; non-zero marks it dynamic
};

struct ObjectSpec {
  std::string name;
  int category_id = 0;
  Shape shape = Shape::kBox;
  std::vector<double> dims;
  int symmetry_order = 1;
  std::vector<ObjectPlacement> placements;  // count = placements.size()
};

struct StaticCameraSpec {
  std::string id;
  Pose pose_in_world;
};

struct Waypoint {
  double t = 0.0;  // seconds
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d target = Eigen::Vector3d::UnitY();  // look-at point
};

/// HMD path: piecewise slerp/lerp between timed look-at waypoints, held
/// constant outside their time range.
struct TrajectorySpec {
  std::string hmd_id = "hmd";
  std::vector<Waypoint> waypoints;
};

struct NoiseSpec {
  double sigma_trans = 0.0;   // meters, per axis
  double sigma_rot = 0.0;     // radians, |N(0, s)| about a uniform axis
  double outlier_rate = 0.0;  // [0, 1]
  double outlier_min = 0.10;  // meters
  double outlier_max = 0.50;
  double dropout = 0.0;       // [0, 1]
  double depth_noise = 0.0;   // meters, along the viewing ray of surface samples
  double keypoint_noise_px = 0.0;
};

struct DriftSpec {
  double sigma_trans = 0.0;  // meters / sqrt(s)
  double sigma_rot = 0.0;    // radians / sqrt(s)
};

enum class DistancePreset { kNear, kFar };

struct SceneConfig {
  std::vector<ObjectSpec> objects;
  std::vector<StaticCameraSpec> static_cameras;
  TrajectorySpec trajectory;
  CameraIntrinsics intrinsics{900.0, 900.0, 640.0, 360.0, 1280, 720};
  double max_range = 2.0;  // meters
  double min_depth = 0.05;
  NoiseSpec noise;
  DriftSpec drift;
  bool emit_keypoints = false;
  double frame_rate = 30.0;
  double duration = 10.0;
  std::uint64_t seed = 0;
  std::size_t model_points = kDefaultPrimitivePoints;
  std::size_t surface_samples = 48;  // per detection, front-facing half only; 0 disables
};

/// Throws InvalidConfig for negative sigmas, rates outside [0, 1], an empty
/// rig, no objects or a non-positive frame rate / duration.
void validate(const SceneConfig &config);

nlohmann::json scene_config_to_json(const SceneConfig &config);
SceneConfig scene_config_from_json(const nlohmann::json &doc);

/// Noise levels of the default noisy preset: 10 mm, 2 degrees, 5% outliers.
NoiseSpec default_noise();

/// Nine surrogate parts on a 3x3 grid, two static cameras aimed at the left
/// and right halves of the table, and an HMD that starts looking away and
/// then sweeps the table twice. Near puts cameras ~0.40 m from their
/// targets, far ~0.9 m.
SceneConfig default_scene(DistancePreset preset = DistancePreset::kNear,
                          NoiseSpec noise = default_noise(), DriftSpec drift = {},
                          std::uint64_t seed = 0);

ModelRegistry build_models(const SceneConfig &config);

/// Camera pose in world looking from `position` at `target` (z forward,
/// y down, world z up).
Pose look_at(const Eigen::Vector3d &position, const Eigen::Vector3d &target,
             const Eigen::Vector3d &up = Eigen::Vector3d::UnitZ());

/// HMD pose at time t.
Pose trajectory_pose(const TrajectorySpec &trajectory, double t);

/// drift(t_{k+1}) = drift(t_k) * exp(xi), xi ~ N(0, dt * Sigma); output
/// SLAM poses are drift(t) * true(t), with drift(t_0) = identity.
std::vector<Pose> drift_model(std::span<const Pose> true_poses,
                              std::span<const double> timestamps,
                              const DriftSpec &drift, std::uint64_t seed);

struct SimDataset {
  std::vector<FrameRecord> records;
  GroundTruth ground_truth;
  ModelRegistry models;
};

SimDataset generate(const SceneConfig &config);

}  // namespace multicam
