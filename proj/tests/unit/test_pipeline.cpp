#include <gtest/gtest.h>

#include "multicam/evalio/evaluation.hpp"
#include "multicam/pipeline/estimator.hpp"
#include "multicam/scenegraph/snapshot_json.hpp"
#include "multicam/sim/simulator.hpp"

namespace mc = multicam;

namespace {

struct Data {
  mc::SimDataset ds;
  std::vector<mc::Frame> frames;
};

Data make(std::uint64_t seed, mc::NoiseSpec noise, double duration = 5.0) {
  auto cfg = mc::default_scene(mc::DistancePreset::kNear, noise, {0.003, 0.001}, seed);
  cfg.duration = duration;
  Data d{mc::generate(cfg), {}};
  d.frames = mc::group_frames(d.ds.records, 0.033);
  return d;
}

nlohmann::json without_timings(mc::GraphSnapshot s) {
  s.timings = {};
  return mc::snapshot_to_json(s);
}

}  // namespace

TEST(Estimator, DroppedFramesAreCountedNotThrown) {
  auto d = make(1, {});
  // Strip the HMD from the first frames: nothing is anchored yet.
  for (int k = 0; k < 5; ++k)
    std::erase_if(d.frames[k].cameras, [](const mc::CameraObservation &o) { return o.kind == mc::CameraKind::kHmd; });
  mc::Estimator est(d.ds.models);
  std::size_t dropped = 0;
  for (int k = 0; k < 5; ++k) dropped += est.process(d.frames[k]).dropped;
  EXPECT_EQ(dropped, 5u);
  EXPECT_EQ(est.dropped_frames(), 5u);
  EXPECT_FALSE(est.process(d.frames[5]).dropped);
}

TEST(Estimator, BundleAdjustmentOnlyAtKeyframes) {
  const auto d = make(2, mc::default_noise());
  mc::Estimator est(d.ds.models);
  std::size_t keyframes = 0;
  for (const auto &f : d.frames) {
    const auto out = est.process(f);
    EXPECT_EQ(out.ba.has_value(), out.snapshot.keyframe);
    keyframes += out.snapshot.keyframe;
    if (!out.ba) continue;
    const auto &tr = out.ba->trace;
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i].energy, tr[i - 1].energy * (1 + 1e-12));
    EXPECT_GE(out.snapshot.timings.ba_ms, 0.0);
  }
  EXPECT_GT(keyframes, 0u);
  EXPECT_EQ(est.ba_results().size(), keyframes);
}

TEST(Estimator, HmdPoseIsSlamInput) {
  const auto d = make(3, mc::default_noise());
  mc::Estimator est(d.ds.models);
  for (const auto &f : d.frames) {
    const auto out = est.process(f);
    if (out.dropped) continue;
    for (const auto &c : out.snapshot.cameras)
      if (c.kind == mc::CameraKind::kHmd)
        EXPECT_EQ(mc::to_array(*c.pose_in_world), mc::to_array(d.ds.ground_truth.at(f.timestamp)->slam));
  }
}

TEST(Estimator, DeterministicUpToTimings) {
  const auto d = make(4, mc::default_noise(), 4.0);
  mc::Estimator a(d.ds.models), b(d.ds.models);
  const auto sa = a.run(d.frames), sb = b.run(d.frames);
  ASSERT_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(without_timings(sa[i]), without_timings(sb[i]));
}

TEST(Estimator, BaDisabled) {
  const auto d = make(5, mc::default_noise(), 4.0);
  mc::EstimatorConfig cfg;
  cfg.ba_enabled = false;
  mc::Estimator est(d.ds.models, cfg);
  for (const auto &f : d.frames) {
    const auto out = est.process(f);
    EXPECT_FALSE(out.ba.has_value());
    EXPECT_EQ(out.snapshot.timings.ba_ms, 0.0);
  }
  EXPECT_TRUE(est.ba_results().empty());
}
