#pragma once

#include <cstdint>

#include "multicam/ba/bundle_adjustment.hpp"
#include "multicam/scenegraph/scene_graph.hpp"

namespace multicam {

struct ObservationOptions {
  std::size_t points_per_object = 64;  // FPS subset of the model points
  double depth_noise = 0.0;            // meters, along the viewing ray; synthesized points only
  std::uint64_t seed = 0;
};

/// Synthesizes surface points for one detection: model points pushed through
/// the detected pose, optionally jittered in depth.
ObservationSet make_observation(const std::string &camera_id, int instance_id,
                                const Pose &object_in_camera,
                                std::span<const Eigen::Vector3d> model_points,
                                double depth_noise = 0.0, std::uint64_t seed = 0);

/// Bundle adjustment problem for the graph's current frame: every anchored
/// camera with an observation and every observed object node. Detections that
/// carry surface samples use them; the rest get synthesized points. HMDs and
/// cameras the current keyframe did not re-anchor are fixed.
BaProblem build_problem(const SceneGraph &graph, const ObservationOptions &options = {});

}  // namespace multicam
