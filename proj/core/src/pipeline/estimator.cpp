#include "multicam/pipeline/estimator.hpp"

#include <chrono>

#include "multicam/common/error.hpp"

namespace multicam {

namespace {
using Clock = std::chrono::steady_clock;
double ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}
}  // namespace

Estimator::Estimator(ModelRegistry models, EstimatorConfig config)
    : graph_(std::move(models), config.graph), config_(config) {}

FrameOutput Estimator::process(const Frame &frame) {
  FrameOutput out;
  const auto t0 = Clock::now();
  IngestResult ingest;
  try {
    ingest = graph_.ingest_frame(frame);
  } catch (const Error &e) {
    if (e.code() != ErrorCode::kNoAnchoredCamera) throw;
    ++dropped_;
    ++frame_index_;
    out.dropped = true;
    return out;
  }
  const auto t1 = Clock::now();
  double ba_ms = 0.0;
  if (ingest.keyframe && config_.ba_enabled) {
    ObservationOptions obs = config_.observations;
    obs.seed = config_.observations.seed * 1000003ULL + frame_index_;
    const BaProblem problem = build_problem(graph_, obs);
    BaResult res = bundle_adjust(problem, config_.ba);
    std::map<std::string, Pose> cams;
    for (const auto &[id, p] : res.cameras)
      if (!problem.fixed_cameras.count(id)) cams[id] = p;
    graph_.apply_refinement(cams, res.objects);
    ba_ms = ms(t1, Clock::now());
    ba_results_.push_back(res);
    out.ba = std::move(res);
  }
  out.snapshot = graph_.snapshot();
  out.snapshot.timings.ingest_ms = ms(t0, t1);
  out.snapshot.timings.matching_ms = ingest.matching_ms;
  out.snapshot.timings.aggregation_ms = ingest.aggregation_ms;
  out.snapshot.timings.ba_ms = ba_ms;
  ++frame_index_;
  return out;
}

std::vector<GraphSnapshot> Estimator::run(std::span<const Frame> frames) {
  std::vector<GraphSnapshot> out;
  out.reserve(frames.size());
  for (const auto &f : frames) {
    FrameOutput fo = process(f);
    if (!fo.dropped) out.push_back(std::move(fo.snapshot));
  }
  return out;
}

}  // namespace multicam
