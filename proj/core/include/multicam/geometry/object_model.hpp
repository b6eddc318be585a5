#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "multicam/geometry/pose.hpp"

namespace multicam {

using PointCloud = std::vector<Eigen::Vector3d>;

inline constexpr std::size_t kDefaultKeypointCount = 8;

/// Known rigid object: model-frame surface points (meters) plus the finite set
/// of self-symmetries. `symmetries.front()` is always the identity.
struct ObjectModel {
  int category_id = 0;
  std::string name;
  PointCloud points;
  double diameter = 0.0;
  PointCloud keypoints;
  std::vector<Pose> symmetries{Pose::identity()};

  bool is_symmetric() const { return symmetries.size() > 1; }
};

/// Validates the inputs and fills in diameter and FPS keypoints. Throws
/// InvalidModel on an empty point set.
ObjectModel make_object_model(int category_id, PointCloud points,
                              std::vector<Pose> symmetries = {},
                              std::string name = {});

/// Greedy farthest point sampling. The first pick is the point farthest from
/// the centroid; ties resolve to the lowest index.
std::vector<std::size_t> fps_indices(std::span<const Eigen::Vector3d> points,
                                     std::size_t k);
PointCloud fps_keypoints(std::span<const Eigen::Vector3d> points,
                         std::size_t k);

/// Maximum pairwise distance.
double model_diameter(std::span<const Eigen::Vector3d> points);

/// `order` rotations about `axis` (identity first), spaced 2*pi/order.
std::vector<Pose> cyclic_symmetries(const Eigen::Vector3d &axis, int order);

/// Picks the symmetric equivalent of an object-in-camera pose whose rotation
/// is closest to `canonical`. Mirrors how a keypoint detector commits to one
/// branch of a symmetric object.
Pose resolve_symmetry(const Pose &object_in_camera, const ObjectModel &model,
                      const Eigen::Quaterniond &canonical =
                          Eigen::Quaterniond::Identity());

ObjectModel object_model_from_json(const nlohmann::json &doc);
nlohmann::json object_model_to_json(const ObjectModel &model);

class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::vector<ObjectModel> models);

  void add(ObjectModel model);
  bool contains(int category_id) const { return models_.count(category_id) > 0; }
  const ObjectModel &at(int category_id) const;
  std::size_t size() const { return models_.size(); }
  std::vector<int> categories() const;

  auto begin() const { return models_.begin(); }
  auto end() const { return models_.end(); }

 private:
  std::map<int, ObjectModel> models_;
};

/// Accepts either a single model document or an array of them.
ModelRegistry load_models(const std::filesystem::path &path);
void save_models(const std::filesystem::path &path,
                 const ModelRegistry &registry);

}  // namespace multicam
