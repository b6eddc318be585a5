#pragma once

#include <optional>
#include <span>
#include <vector>

#include "multicam/ba/bundle_adjustment.hpp"
#include "multicam/ba/observations.hpp"
#include "multicam/scenegraph/scene_graph.hpp"

namespace multicam {

struct EstimatorConfig {
  SceneGraphConfig graph;
  bool ba_enabled = true;
  BaOptions ba;
  ObservationOptions observations;
};

struct FrameOutput {
  GraphSnapshot snapshot;
  std::optional<BaResult> ba;  // set on keyframes when BA is enabled
  bool dropped = false;        // frame had no anchored camera
};

/// Scene graph plus optional keyframe bundle adjustment, with per-stage
/// wall-clock timings recorded in each snapshot.
class Estimator {
 public:
  Estimator(ModelRegistry models, EstimatorConfig config = {});

  /// Frames without an anchored camera are reported as dropped, not thrown.
  FrameOutput process(const Frame &frame);

  /// Snapshots of every processed (non-dropped) frame.
  std::vector<GraphSnapshot> run(std::span<const Frame> frames);

  const SceneGraph &graph() const { return graph_; }
  const EstimatorConfig &config() const { return config_; }
  const std::vector<BaResult> &ba_results() const { return ba_results_; }
  std::size_t dropped_frames() const { return dropped_; }

 private:
  SceneGraph graph_;
  EstimatorConfig config_;
  std::vector<BaResult> ba_results_;
  std::size_t frame_index_ = 0;
  std::size_t dropped_ = 0;
};

}  // namespace multicam
