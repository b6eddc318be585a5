#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "multicam/geometry/object_model.hpp"
#include "multicam/geometry/pose.hpp"

namespace multicam {

/// Depth-sensor sample on the object surface with its model correspondence.
/// `model` lives in the branch of the detection pose.
struct SurfaceSample {
  Eigen::Vector3d model;
  Eigen::Vector3d camera;
};

/// One object-pose candidate reported by one camera at one timestamp.
struct Detection {
  std::string camera_id;
  double timestamp = 0.0;
  int category_id = 0;
  std::optional<int> instance_hint;
  Pose pose;  // object in camera frame
  double confidence = 1.0;
  // Moving objects never vote on camera poses.
  bool dynamic = false;
  std::vector<Eigen::Vector2d> keypoints_2d;
  std::vector<SurfaceSample> surface;
};

/// Throws InvalidArgument for confidence outside [0, 1] or an object behind
/// the camera.
void validate(const Detection &detection);

struct MatchingOptions {
  double inlier_threshold = 0.05;  // meters
  std::size_t min_inliers = 3;
};

struct PairMatch {
  std::size_t index_a = 0;  // into the caller's list for camera a
  std::size_t index_b = 0;
  double distance = 0.0;    // symmetric distance under the hypothesis
  Pose symmetry;            // S* taking b's object frame onto a's
};

/// Relative pose of camera b expressed in camera a, with the matches that
/// support it.
struct CameraPairHypothesis {
  std::string camera_a;
  std::string camera_b;
  Pose relative_pose;
  std::vector<PairMatch> inliers;
  // Category-unique pairs that the gate rejected; the objects are the same
  // but at least one detection is wrong.
  std::vector<PairMatch> outliers;
  double score = 0.0;  // mean inlier symmetric distance
};

/// cam_a_T_cam_b = cam_a_T_obj * S * (cam_b_T_obj)^-1 for an explicit S.
Pose hypothesis_from_pair(const Detection &a, const Detection &b,
                          const Pose &symmetry);

/// Same, with S chosen as the minimizer of symmetric_distance(a.pose, b.pose).
/// Throws CategoryMismatch when the detections disagree on category.
Pose hypothesis_from_pair(const Detection &a, const Detection &b,
                          const ObjectModel &model);

/// Object-pair RANSAC between two cameras. Every category-matched pair (and
/// every symmetry of its model) generates a hypothesis; the hypothesis with
/// the most gated inliers wins, ties going to the lowest mean distance.
/// Returns nullopt below `min_inliers`.
std::optional<CameraPairHypothesis> match_cameras(
    std::span<const Detection> dets_a, std::span<const Detection> dets_b,
    const ModelRegistry &models, const MatchingOptions &options = {});

/// Unordered camera pairs, each once, lexicographically normalized.
std::vector<std::pair<std::string, std::string>> unique_pairs(
    std::span<const std::string> camera_ids);

}  // namespace multicam
