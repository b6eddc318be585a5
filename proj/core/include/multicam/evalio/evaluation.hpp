#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multicam/evalio/dataset.hpp"
#include "multicam/geometry/object_model.hpp"
#include "multicam/scenegraph/scene_graph.hpp"

namespace multicam {

struct CameraErrorRow {
  std::string camera_id;
  std::size_t samples = 0;
  double translation_mm = 0.0;
  double rotation_deg = 0.0;
};

struct ObjectErrorRow {
  std::string name;
  int category_id = 0;
  bool symmetric = false;
  std::size_t samples = 0;
  double auc = 0.0;  // ADD-AUC, or ADD-S-AUC for symmetric objects
  double translation_mm = 0.0;
  std::optional<double> rotation_deg;  // asymmetric objects only
};

struct DriftSample {
  double t = 0.0;
  double raw = 0.0;        // meters, SLAM vs truth since the start
  double corrected = 0.0;  // meters, since the last HMD keyframe
  bool keyframe = false;
  bool hmd_keyframe = false;  // reset point of the corrected series
};

struct RuntimeRow {
  std::string stage;
  std::size_t samples = 0;
  double mean_ms = 0.0;
};

struct EvaluationReport {
  std::string method = "multicam";
  std::size_t frame_count = 0;
  std::size_t keyframe_count = 0;
  bool no_keyframes = false;
  std::vector<CameraErrorRow> cameras;
  std::optional<CameraErrorRow> camera_mean;  // over all keyframe samples
  std::vector<ObjectErrorRow> objects;
  std::optional<ObjectErrorRow> object_mean;
  std::vector<DriftSample> drift;
  std::vector<RuntimeRow> runtime;
};

struct EvalOptions {
  std::string method = "multicam";
  double auc_threshold = 0.10;
  // ADD-S is quadratic in the point count; metrics use this many FPS points.
  std::size_t max_model_points = 128;
  bool objects_at_keyframes_only = false;
};

/// Camera errors at keyframes for the cameras updated there, object errors
/// for every object observed in a frame (matched to ground truth by
/// category and nearest position), and the drift series. With no keyframe
/// the camera section stays empty and `no_keyframes` is set.
EvaluationReport evaluate_run(std::span<const GraphSnapshot> snapshots, const GroundTruth &gt,
                              const ModelRegistry &models, const EvalOptions &options = {});

/// Drift of the SLAM stream relative to the latest keyframe:
/// |R_s(k)^T (p_s(t) - p_s(k)) - R_g(k)^T (p_g(t) - p_g(k))|.
double relative_drift(const Pose &slam_t, const Pose &slam_k, const Pose &true_t, const Pose &true_k);

nlohmann::json report_to_json(const EvaluationReport &report);
EvaluationReport report_from_json(const nlohmann::json &doc);

}  // namespace multicam
