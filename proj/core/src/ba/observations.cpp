#include "multicam/ba/observations.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "multicam/common/error.hpp"

namespace multicam {

ObservationSet make_observation(const std::string &camera_id, int instance_id,
                                const Pose &object_in_camera,
                                std::span<const Eigen::Vector3d> model_points,
                                double depth_noise, std::uint64_t seed) {
  if (depth_noise < 0) throw Error(ErrorCode::kInvalidArgument, "negative depth noise");
  ObservationSet obs;
  obs.camera_id = camera_id;
  obs.instance_id = instance_id;
  obs.model_points.assign(model_points.begin(), model_points.end());
  obs.surface_points.reserve(model_points.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (const auto &p : model_points) {
    Eigen::Vector3d x = object_in_camera * p;
    if (depth_noise > 0) {
      const double d = x.norm();
      if (d > 0) x *= (d + depth_noise * n01(rng)) / d;
    }
    obs.surface_points.push_back(x);
  }
  return obs;
}

BaProblem build_problem(const SceneGraph &graph, const ObservationOptions &options) {
  BaProblem problem;
  std::map<int, PointCloud> subset;  // per category
  auto points_for = [&](int category) -> const PointCloud & {
    auto it = subset.find(category);
    if (it != subset.end()) return it->second;
    const ObjectModel &m = graph.models().at(category);
    const std::size_t k = std::min(options.points_per_object, m.points.size());
    return subset.emplace(category, fps_keypoints(m.points, std::max<std::size_t>(k, 1))).first->second;
  };
  std::set<std::string> updated;
  if (graph.last_frame_was_keyframe() && !graph.keyframes().empty())
    updated.insert(graph.keyframes().back().updated_cameras.begin(),
                   graph.keyframes().back().updated_cameras.end());
  std::uint64_t stream = 0;
  for (const auto &fo : graph.frame_observations()) {
    const CameraNode &cam = graph.cameras().at(fo.camera_id);
    if (!cam.pose_in_world) continue;
    const ObjectNode *node = graph.find_object(fo.instance_id);
    if (!node) continue;
    problem.cameras[fo.camera_id] = *cam.pose_in_world;
    if (cam.kind == CameraKind::kHmd || !updated.count(fo.camera_id))
      problem.fixed_cameras.insert(fo.camera_id);
    problem.objects[fo.instance_id] = node->pose_in_world;
    const std::uint64_t seed = options.seed * 0x9E3779B97F4A7C15ULL + stream++;
    ObservationSet obs;
    if (fo.surface.size() >= 3) {
      obs.camera_id = fo.camera_id;
      obs.instance_id = fo.instance_id;
      for (const auto &s : fo.surface) {
        obs.model_points.push_back(s.model);
        obs.surface_points.push_back(s.camera);
      }
    } else {
      obs = make_observation(fo.camera_id, fo.instance_id, fo.object_in_camera,
                             points_for(node->category_id), options.depth_noise, seed);
    }
    obs.inlier = fo.inlier;
    problem.observations.push_back(std::move(obs));
  }
  return problem;
}

}  // namespace multicam
