#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "multicam/common/error.hpp"
#include "multicam/sim/simulator.hpp"
#include "support/gen.hpp"

namespace mc = multicam;
namespace gen = multicam::testing;
using Eigen::Vector3d;

namespace {

mc::SceneConfig quiet_scene(std::uint64_t seed = 1, double duration = 2.0) {
  auto c = mc::default_scene(mc::DistancePreset::kNear, mc::NoiseSpec{}, {}, seed);
  c.duration = duration;
  return c;
}

mc::Pose world_camera(const mc::GroundTruthFrame &f, const std::string &id, const std::string &hmd) {
  return id == hmd ? f.hmd : f.cameras.at(id);
}

const mc::GtObject &gt_object(const mc::GroundTruthFrame &f, int instance) {
  for (const auto &o : f.objects)
    if (o.instance_id == instance) return o;
  throw std::runtime_error("missing instance");
}

// Same rotation up to a symmetry of the model.
bool same_up_to_symmetry(const mc::Pose &a, const mc::Pose &b, const mc::ObjectModel &m, double tol) {
  for (const auto &s : m.symmetries)
    if ((a.matrix() - (b * s).matrix()).norm() < tol) return true;
  return false;
}

}  // namespace

TEST(Primitives, UnitCubeDiameter) {
  const std::vector<double> dims{1, 1, 1};
  const auto m = mc::primitive_model(mc::Shape::kBox, dims, 1);
  EXPECT_NEAR(m.diameter, std::sqrt(3.0), 1e-9);
  EXPECT_EQ(m.points.size(), mc::kDefaultPrimitivePoints);
}

TEST(Primitives, SymmetriesMapCloudOntoItself) {
  const std::vector<double> cyl{0.02, 0.1}, tube{0.03, 0.02, 0.08}, box{0.04, 0.06, 0.02};
  for (const auto &[shape, dims, order] : {std::tuple{mc::Shape::kCylinder, cyl, 16}, std::tuple{mc::Shape::kTube, tube, 8},
                                           std::tuple{mc::Shape::kBox, box, 2}}) {
    const auto m = mc::primitive_model(shape, dims, order);
    ASSERT_EQ(m.symmetries.size(), static_cast<std::size_t>(order));
    for (const auto &s : m.symmetries)
      for (const auto &p : m.points) {
        double best = 1e9;
        for (const auto &q : m.points) best = std::min(best, (s * p - q).norm());
        EXPECT_LT(best, 1e-9);
      }
  }
}

TEST(Primitives, LBracketIsAsymmetric) {
  const std::vector<double> dims{0.05, 0.08, 0.02, 0.005};
  const auto m = mc::primitive_model(mc::Shape::kLBracket, dims, 1);
  EXPECT_FALSE(m.is_symmetric());
  EXPECT_EQ(m.symmetries.size(), 1u);
}

TEST(Primitives, InvalidDims) {
  for (const auto &[shape, dims, order] :
       {std::tuple{mc::Shape::kBox, std::vector<double>{0.1, -0.1, 0.1}, 1},
        std::tuple{mc::Shape::kBox, std::vector<double>{0.1, 0.1, 0.1}, 3},
        std::tuple{mc::Shape::kTube, std::vector<double>{0.02, 0.03, 0.1}, 4},
        std::tuple{mc::Shape::kLBracket, std::vector<double>{0.05, 0.05, 0.02, 0.005}, 1},
        std::tuple{mc::Shape::kCylinder, std::vector<double>{0.02}, 4}}) {
    try {
      mc::primitive_model(shape, dims, order);
      ADD_FAILURE() << mc::to_string(shape);
    } catch (const mc::Error &e) {
      EXPECT_EQ(e.code(), mc::ErrorCode::kInvalidConfig);
    }
  }
  EXPECT_THROW(mc::shape_from_string("sphere"), mc::Error);
  EXPECT_EQ(mc::shape_from_string("cylinder"), mc::Shape::kCylinder);
}

TEST(Drift, ZeroSpecIsIdentity) {
  gen::Rng rng(1);
  std::vector<mc::Pose> truth;
  std::vector<double> t;
  for (int k = 0; k < 50; ++k) {
    truth.push_back(gen::pose(rng));
    t.push_back(0.1 * k);
  }
  const auto slam = mc::drift_model(truth, t, {}, 7);
  for (std::size_t k = 0; k < truth.size(); ++k) EXPECT_EQ(mc::to_array(slam[k]), mc::to_array(truth[k]));
}

TEST(Drift, StartsAtTruth) {
  gen::Rng rng(2);
  const std::vector<mc::Pose> truth{gen::pose(rng), gen::pose(rng)};
  const std::vector<double> t{3.0, 4.0};
  const auto slam = mc::drift_model(truth, t, {0.01, 0.01}, 3);
  EXPECT_EQ(mc::to_array(slam[0]), mc::to_array(truth[0]));
  EXPECT_NE(mc::to_array(slam[1]), mc::to_array(truth[1]));
}

TEST(Drift, TranslationGrowsWithSqrtTime) {
  // Per-axis random walk: E|drift(T)| = sigma sqrt(T) * 2 sqrt(2 / pi).
  const double sigma = 0.001, rate = 10.0;
  std::vector<double> t;
  for (int k = 0; k <= 600; ++k) t.push_back(k / rate);
  const std::vector<mc::Pose> truth(t.size(), mc::Pose::identity());
  double sum15 = 0.0, sum60 = 0.0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto slam = mc::drift_model(truth, t, {sigma, 0.0}, static_cast<std::uint64_t>(s));
    sum15 += slam[150].translation().norm();
    sum60 += slam[600].translation().norm();
  }
  const double k = 2.0 * std::sqrt(2.0 / M_PI);
  EXPECT_NEAR(sum60 / seeds, k * sigma * std::sqrt(60.0), 0.15 * k * sigma * std::sqrt(60.0));
  EXPECT_NEAR(sum15 / seeds, k * sigma * std::sqrt(15.0), 0.15 * k * sigma * std::sqrt(15.0));
}

TEST(Drift, BadInput) {
  const std::vector<mc::Pose> truth(2);
  EXPECT_THROW(mc::drift_model(truth, std::vector<double>{0.0}, {}, 0), mc::Error);
  EXPECT_THROW(mc::drift_model(truth, std::vector<double>{1.0, 0.0}, {0.01, 0}, 0), mc::Error);
  EXPECT_THROW(mc::drift_model(truth, std::vector<double>{0.0, 1.0}, {-0.01, 0}, 0), mc::Error);
}

TEST(Generate, ZeroNoiseDetectionsAreExact) {
  const auto cfg = quiet_scene();
  const auto ds = mc::generate(cfg);
  std::size_t n = 0;
  for (const auto &rec : ds.records) {
    const auto *f = ds.ground_truth.at(rec.timestamp);
    ASSERT_NE(f, nullptr);
    const mc::Pose wc = world_camera(*f, rec.camera_id, ds.ground_truth.hmd_id);
    if (rec.kind == mc::CameraKind::kHmd) EXPECT_EQ(mc::to_array(*rec.slam_pose), mc::to_array(f->hmd));
    for (const auto &d : rec.detections) {
      const auto &o = gt_object(*f, *d.instance_hint);
      EXPECT_TRUE(same_up_to_symmetry(d.pose, wc.inverse() * o.pose_in_world, ds.models.at(d.category_id), 1e-9));
      // Surface samples: model side mapped through the detection hits the camera side.
      ASSERT_FALSE(d.surface.empty());
      for (const auto &s : d.surface) EXPECT_LT((d.pose * s.model - s.camera).norm(), 1e-9);
      ++n;
    }
  }
  EXPECT_GT(n, 100u);
}

TEST(Generate, SurfaceSamplesFollowTruthUnderDetectionNoise) {
  auto cfg = quiet_scene(3);
  cfg.noise.sigma_trans = 0.01;
  cfg.noise.sigma_rot = 0.05;
  const auto ds = mc::generate(cfg);
  for (const auto &rec : ds.records) {
    const auto *f = ds.ground_truth.at(rec.timestamp);
    const mc::Pose wc = world_camera(*f, rec.camera_id, ds.ground_truth.hmd_id);
    for (const auto &d : rec.detections) {
      const mc::Pose truth = wc.inverse() * gt_object(*f, *d.instance_hint).pose_in_world;
      const auto &m = ds.models.at(d.category_id);
      ASSERT_LE(d.surface.size(), cfg.surface_samples);
      bool some = false;
      for (const auto &S : m.symmetries) {
        bool all = true;
        for (const auto &s : d.surface) all = all && ((truth * S) * s.model - s.camera).norm() < 1e-9;
        some = some || all;
      }
      EXPECT_TRUE(some);
      // Front-facing: points lie on the camera side of the object centre.
      for (const auto &s : d.surface) EXPECT_LT((s.camera - truth.translation()).dot(s.camera), 1e-12 + 0.5 * m.diameter * s.camera.norm());
    }
  }
}

TEST(Generate, TranslationNoiseStatistics) {
  auto cfg = quiet_scene(5, 10.0);
  cfg.noise.sigma_trans = 0.005;
  cfg.surface_samples = 0;
  const auto ds = mc::generate(cfg);
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto &rec : ds.records) {
    const auto *f = ds.ground_truth.at(rec.timestamp);
    const mc::Pose wc = world_camera(*f, rec.camera_id, ds.ground_truth.hmd_id);
    for (const auto &d : rec.detections) {
      const Vector3d e = d.pose.translation() - (wc.inverse() * gt_object(*f, *d.instance_hint).pose_in_world).translation();
      ss += e.squaredNorm();
      n += 3;
    }
  }
  ASSERT_GE(n, 10000u);
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 0.005, 0.05 * 0.005);
}

TEST(Generate, OutliersExceedGate) {
  auto cfg = quiet_scene(6);
  cfg.noise.outlier_rate = 1.0;
  const auto ds = mc::generate(cfg);
  for (const auto &rec : ds.records) {
    const auto *f = ds.ground_truth.at(rec.timestamp);
    const mc::Pose wc = world_camera(*f, rec.camera_id, ds.ground_truth.hmd_id);
    for (const auto &d : rec.detections) {
      const double off =
          (d.pose.translation() - (wc.inverse() * gt_object(*f, *d.instance_hint).pose_in_world).translation()).norm();
      EXPECT_GE(off, 0.1 - 1e-12);
      EXPECT_LE(off, 0.5 + 1e-12);
    }
  }
}

TEST(Generate, VisibilityMatchesFrustum) {
  const auto cfg = quiet_scene(7, 4.0);
  const auto ds = mc::generate(cfg);
  const auto &K = cfg.intrinsics;
  std::size_t culled = 0;
  for (const auto &rec : ds.records) {
    const auto *f = ds.ground_truth.at(rec.timestamp);
    const mc::Pose wc = world_camera(*f, rec.camera_id, ds.ground_truth.hmd_id);
    std::set<int> expect, got;
    for (const auto &o : f->objects) {
      const Vector3d c = wc.inverse() * o.pose_in_world.translation();
      const Eigen::Vector2d px(K.fx * c.x() / c.z() + K.cx, K.fy * c.y() / c.z() + K.cy);
      if (c.z() > cfg.min_depth && c.norm() <= cfg.max_range && px.x() >= 0 && px.x() < K.width && px.y() >= 0 &&
          px.y() < K.height)
        expect.insert(o.instance_id);
      else
        ++culled;
    }
    for (const auto &d : rec.detections) got.insert(*d.instance_hint);
    EXPECT_EQ(got, expect) << rec.camera_id << " t=" << rec.timestamp;
    const auto &vis = f->visible.at(rec.camera_id);
    EXPECT_EQ(std::set<int>(vis.begin(), vis.end()), expect);
  }
  EXPECT_GT(culled, 0u);  // the HMD starts looking away
}

TEST(Generate, DropoutRemovesDetectionsNotVisibility) {
  auto cfg = quiet_scene(8);
  cfg.noise.dropout = 1.0;
  const auto ds = mc::generate(cfg);
  std::size_t visible = 0;
  for (const auto &rec : ds.records) EXPECT_TRUE(rec.detections.empty());
  for (const auto &f : ds.ground_truth.frames)
    for (const auto &[c, v] : f.visible) visible += v.size();
  EXPECT_GT(visible, 0u);
}

TEST(Generate, SeedDeterminism) {
  auto cfg = mc::default_scene(mc::DistancePreset::kFar, mc::default_noise(), {0.002, 0.001}, 11);
  cfg.duration = 1.0;
  const auto a = mc::generate(cfg), b = mc::generate(cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_TRUE(a.records[i] == b.records[i]);
  cfg.seed = 12;
  const auto c = mc::generate(cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) differs = differs || !(a.records[i] == c.records[i]);
  EXPECT_TRUE(differs);
}

TEST(Generate, DepthNoiseLeavesPoseDrawsAligned) {
  auto cfg = quiet_scene(9);
  cfg.noise.sigma_trans = 0.01;
  auto noisy = cfg;
  noisy.noise.depth_noise = 0.003;
  const auto a = mc::generate(cfg), b = mc::generate(noisy);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i)
    for (std::size_t j = 0; j < a.records[i].detections.size(); ++j)
      EXPECT_EQ(mc::to_array(a.records[i].detections[j].pose), mc::to_array(b.records[i].detections[j].pose));
}

TEST(Generate, DynamicObjectsMoveAndAreFlagged) {
  auto cfg = quiet_scene(10);
  cfg.objects[0].placements[0].velocity = Vector3d(0.05, 0, 0);
  const auto ds = mc::generate(cfg);
  const auto &f0 = ds.ground_truth.frames.front(), &f1 = ds.ground_truth.frames.back();
  EXPECT_GT((f1.objects[0].pose_in_world.translation() - f0.objects[0].pose_in_world.translation()).norm(), 0.05);
  bool seen = false;
  for (const auto &rec : ds.records)
    for (const auto &d : rec.detections)
      if (d.category_id == cfg.objects[0].category_id) {
        EXPECT_TRUE(d.dynamic);
        seen = true;
      } else {
        EXPECT_FALSE(d.dynamic);
      }
  EXPECT_TRUE(seen);
}

TEST(SceneConfig, JsonRoundTrip) {
  auto cfg = mc::default_scene(mc::DistancePreset::kFar, mc::default_noise(), {0.001, 0.0005}, 42);
  cfg.objects[1].placements[0].velocity = Vector3d(0.01, 0.02, 0);
  cfg.emit_keypoints = true;
  cfg.surface_samples = 12;
  const auto j = mc::scene_config_to_json(cfg);
  EXPECT_EQ(mc::scene_config_to_json(mc::scene_config_from_json(j)), j);
}

TEST(SceneConfig, Validation) {
  const auto good = quiet_scene();
  EXPECT_NO_THROW(mc::validate(good));
  std::vector<mc::SceneConfig> bad(6, good);
  bad[0].noise.sigma_trans = -1;
  bad[1].noise.outlier_rate = 1.5;
  bad[2].static_cameras.clear();
  bad[2].trajectory.waypoints.clear();
  bad[3].objects.clear();
  bad[4].frame_rate = 0;
  bad[5].drift.sigma_rot = -0.1;
  for (std::size_t i = 0; i < bad.size(); ++i) {
    try {
      mc::validate(bad[i]);
      ADD_FAILURE() << i;
    } catch (const mc::Error &e) {
      EXPECT_EQ(e.code(), mc::ErrorCode::kInvalidConfig) << i;
    }
  }
}

TEST(SceneConfig, DistancePresets) {
  // Cameras aim at table halves, so test the median object distance.
  for (const auto &[preset, lo, hi] :
       {std::tuple{mc::DistancePreset::kNear, 0.0, 0.5}, std::tuple{mc::DistancePreset::kFar, 0.75, 1.0}}) {
    auto cfg = mc::default_scene(preset, {});
    cfg.duration = 1.0;
    const auto ds = mc::generate(cfg);
    const auto &f = ds.ground_truth.frames.front();
    for (const auto &[id, wc] : f.cameras) {
      std::vector<double> d;
      for (int inst : f.visible.at(id)) d.push_back((wc.inverse() * gt_object(f, inst).pose_in_world.translation()).norm());
      ASSERT_FALSE(d.empty());
      std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
      EXPECT_GE(d[d.size() / 2], lo) << id;
      EXPECT_LE(d[d.size() / 2], hi) << id;
    }
  }
}
