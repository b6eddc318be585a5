#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "multicam/geometry/object_model.hpp"
#include "multicam/geometry/pose.hpp"
#include "multicam/matching/matching.hpp"

namespace multicam {

enum class CameraKind { kHmd, kStatic };
enum class PoseSource { kSlam, kEstimated, kUnknown };

std::string_view to_string(CameraKind kind);
std::string_view to_string(PoseSource source);
CameraKind camera_kind_from_string(std::string_view s);
PoseSource pose_source_from_string(std::string_view s);

struct CameraNode {
  std::string camera_id;
  CameraKind kind = CameraKind::kStatic;
  std::optional<Pose> pose_in_world;
  double pose_timestamp = 0.0;
  PoseSource pose_source = PoseSource::kUnknown;
};

struct ObjectNode {
  int instance_id = 0;
  int category_id = 0;
  Pose pose_in_world;
  double last_observed = 0.0;
  std::string source_camera;
  std::map<std::string, bool> outlier_flags;
};

/// r_pq for the most recent frame, keyed by (instance id, camera id). Pairs
/// that are absent read as 0.
class VisibilityRelation {
 public:
  int at(int instance_id, const std::string &camera_id) const;
  void set(int instance_id, const std::string &camera_id, int value);
  void clear() { r_.clear(); }
  const std::map<std::pair<int, std::string>, int> &entries() const { return r_; }

 private:
  std::map<std::pair<int, std::string>, int> r_;
};

/// Detections of one camera at one instant. HMD observations carry the SLAM
/// pose of the HMD in the world.
struct CameraObservation {
  std::string camera_id;
  CameraKind kind = CameraKind::kStatic;
  double timestamp = 0.0;
  std::optional<Pose> slam_pose;
  std::vector<Detection> detections;
};

struct Frame {
  double timestamp = 0.0;
  std::vector<CameraObservation> cameras;
};

/// Hypothesis that was used to place `child` from the already placed `parent`.
struct AnchorEdge {
  std::string parent;
  std::string child;
  Pose parent_T_child;
};

struct Keyframe {
  double timestamp = 0.0;
  std::map<std::string, std::vector<Detection>> detections;
  std::vector<CameraPairHypothesis> hypotheses;  // accepted this frame
  std::vector<AnchorEdge> anchor_edges;
  std::vector<std::string> updated_cameras;
  double matching_error = 0.0;  // mean score of the accepted hypotheses
};

struct DetectionRef {
  std::string camera_id;
  std::size_t index = 0;

  auto operator<=>(const DetectionRef &) const = default;
};

struct AggregatedMember {
  DetectionRef ref;
  // Detection re-expressed in the symmetry branch of the chosen pose.
  Pose object_in_camera;
  double distance = 0.0;  // symmetric distance to the chosen world pose
  bool outlier = false;
};

struct AggregatedObject {
  int category_id = 0;
  Pose pose_in_world;
  DetectionRef source;
  std::vector<AggregatedMember> members;
  bool dynamic = false;

  bool multi_view() const;  // >= 2 distinct non-outlier cameras
};

struct AggregationOptions {
  double inlier_threshold = 0.05;
  double instance_gate = 0.10;
};

/// Fuses the detections of all anchored cameras into one object set. Matched
/// detections are merged; every other detection is gated into a cluster or
/// kept as its own object. The pose of a cluster comes from the member with
/// the lowest matching distance (then highest confidence); members farther
/// than the inlier threshold from it are flagged outliers.
std::vector<AggregatedObject> aggregate_scene(
    const std::map<std::string, std::vector<Detection>> &detections,
    const std::map<std::string, Pose> &camera_world_poses,
    const std::map<std::string, CameraKind> &camera_kinds,
    std::span<const CameraPairHypothesis> hypotheses,
    const ModelRegistry &models, const AggregationOptions &options = {});

struct SceneGraphConfig {
  MatchingOptions matching;
  double keyframe_threshold = 0.05;  // meters
  double instance_gate = 0.10;       // meters
  double align_window = 0.033;       // seconds
};

struct IngestResult {
  bool keyframe = false;
  std::vector<std::string> updated_cameras;
  double matching_ms = 0.0;
  double aggregation_ms = 0.0;
};

/// One object observation of the current frame, in the object's node branch.
struct FrameObservation {
  int instance_id = 0;
  std::string camera_id;
  Pose object_in_camera;
  bool inlier = true;  // r_pq
  std::vector<SurfaceSample> surface;  // model side mapped into the node branch
};

struct GraphSnapshot;

/// Spatiotemporal scene graph anchored to the HMD. Not thread-safe for
/// writes; ingest_frame must be serialized by the caller.
class SceneGraph {
 public:
  explicit SceneGraph(ModelRegistry models, SceneGraphConfig config = {});

  /// Throws NoAnchoredCamera (graph unchanged) when no camera of the frame
  /// has a known world pose, and InvalidArgument for misaligned timestamps.
  IngestResult ingest_frame(const Frame &frame);

  /// Latest pose at or before `t`; HMD poses are the SLAM input.
  std::optional<Pose> world_pose_of(const std::string &camera_id, double t) const;

  /// Overwrites current camera and object poses, e.g. after bundle adjustment.
  void apply_refinement(const std::map<std::string, Pose> &camera_poses,
                        const std::map<int, Pose> &object_poses);

  GraphSnapshot snapshot() const;

  const std::map<std::string, CameraNode> &cameras() const { return cameras_; }
  const std::vector<ObjectNode> &objects() const { return objects_; }
  const ObjectNode *find_object(int instance_id) const;
  const VisibilityRelation &visibility() const { return visibility_; }
  const std::vector<Keyframe> &keyframes() const { return keyframes_; }
  const std::vector<FrameObservation> &frame_observations() const {
    return frame_observations_;
  }
  bool last_frame_was_keyframe() const { return last_keyframe_; }
  double current_time() const { return current_time_; }
  const ModelRegistry &models() const { return models_; }
  const SceneGraphConfig &config() const { return config_; }

 private:
  void record_pose(const std::string &camera_id, double t, const Pose &pose);

  ModelRegistry models_;
  SceneGraphConfig config_;
  std::map<std::string, CameraNode> cameras_;
  std::map<std::string, std::vector<std::pair<double, Pose>>> pose_history_;
  std::vector<ObjectNode> objects_;
  VisibilityRelation visibility_;
  std::vector<Keyframe> keyframes_;
  std::vector<FrameObservation> frame_observations_;
  std::vector<std::string> last_updated_;
  double last_matching_error_ = 0.0;
  bool last_keyframe_ = false;
  double current_time_ = 0.0;
  int next_instance_id_ = 0;
};

struct StageTimings {
  double ingest_ms = 0.0;
  double matching_ms = 0.0;
  double aggregation_ms = 0.0;
  double ba_ms = 0.0;
};

struct VisibilityEdge {
  int instance_id = 0;
  std::string camera_id;
  int r = 0;
};

/// Serializable, immutable view of the graph after one frame.
struct GraphSnapshot {
  double timestamp = 0.0;
  bool keyframe = false;
  bool hmd_keyframe = false;  // an accepted hypothesis involves the HMD
  double matching_error = 0.0;
  std::vector<CameraNode> cameras;
  std::vector<ObjectNode> objects;
  std::vector<VisibilityEdge> edges;
  std::vector<std::string> updated_cameras;
  StageTimings timings;
};

}  // namespace multicam
