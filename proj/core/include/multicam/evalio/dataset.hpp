#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multicam/matching/matching.hpp"
#include "multicam/scenegraph/scene_graph.hpp"

namespace multicam {

inline constexpr int kDatasetSchemaVersion = 1;

/// One camera's detections at one timestamp; one JSON line on disk.
struct FrameRecord {
  double timestamp = 0.0;
  std::string camera_id;
  CameraKind kind = CameraKind::kStatic;
  std::optional<Pose> slam_pose;  // HMD only
  std::vector<Detection> detections;

  bool operator==(const FrameRecord &other) const;
};

nlohmann::json record_to_json(const FrameRecord &record);
/// Throws ParseError or SchemaVersionMismatch.
FrameRecord record_from_json(const nlohmann::json &doc);

/// JSON-lines. Load errors name the 1-based line number.
void save_dataset(const std::filesystem::path &path, std::span<const FrameRecord> records);
std::vector<FrameRecord> load_dataset(const std::filesystem::path &path);

/// Groups records (sorted by time) into frames: a record joins the current
/// frame when it is within `align_window` of the frame's first record and
/// its camera is not yet present.
std::vector<Frame> group_frames(std::span<const FrameRecord> records, double align_window);

struct GtObject {
  int instance_id = 0;
  int category_id = 0;
  Pose pose_in_world;
};

struct GroundTruthFrame {
  double timestamp = 0.0;
  Pose hmd;   // true HMD pose
  Pose slam;  // drifted SLAM output
  std::map<std::string, Pose> cameras;  // static cameras
  std::vector<GtObject> objects;
  std::map<std::string, std::vector<int>> visible;  // camera -> instance ids
};

struct GroundTruth {
  std::string hmd_id = "hmd";
  std::vector<GroundTruthFrame> frames;

  /// Frame whose timestamp is within `tolerance` of t, if any.
  const GroundTruthFrame *at(double t, double tolerance = 1e-6) const;
};

void save_ground_truth(const std::filesystem::path &path, const GroundTruth &gt);
GroundTruth load_ground_truth(const std::filesystem::path &path);

/// Reads a JSON-lines file, calling `fn(doc, line_number)` per non-empty line.
void read_json_lines(const std::filesystem::path &path,
                     const std::function<void(const nlohmann::json &, std::size_t)> &fn);

}  // namespace multicam
