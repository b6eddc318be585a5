#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "multicam/ba/bundle_adjustment.hpp"
#include "multicam/ba/observations.hpp"
#include "multicam/common/error.hpp"
#include "support/gen.hpp"
#include "support/scene.hpp"

namespace mc = multicam;
namespace gen = multicam::testing;
using Eigen::Vector3d;

namespace {

double huber(double r, double delta) { return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta); }

// Direct per-point summation.
double brute_energy(const std::vector<mc::ObservationSet> &obs, const std::map<std::string, mc::Pose> &cams,
                    const std::map<int, mc::Pose> &objs, double delta) {
  double e = 0.0;
  for (const auto &o : obs)
    for (std::size_t k = 0; k < o.model_points.size(); ++k)
      e += huber((cams.at(o.camera_id) * o.surface_points[k] - objs.at(o.instance_id) * o.model_points[k]).norm(),
                 delta);
  return e;
}

mc::ObservationSet observe(const std::string &cam, int inst, const mc::Pose &wc, const mc::Pose &wo,
                           const mc::PointCloud &model) {
  return mc::make_observation(cam, inst, wc.inverse() * wo, model);
}

// Cameras around the origin, objects near it, exact observations.
struct Rig {
  std::map<std::string, mc::Pose> cameras;
  std::map<int, mc::Pose> objects;
  std::vector<mc::ObservationSet> obs;
  mc::PointCloud model;
};

Rig make_rig(gen::Rng &rng, int n_cams, int n_objs) {
  std::vector<std::string> ids{"hmd"};
  for (int c = 1; c < n_cams; ++c) ids.push_back("C" + std::to_string(c));
  const auto s = gen::table_scene(rng, n_objs, ids);
  Rig r;
  r.cameras = s.cameras;
  r.model = gen::cloud(rng, 16, 0.04);
  for (const auto &o : s.objects) r.objects[o.instance] = o.pose;
  for (const auto &[id, wc] : r.cameras)
    for (const auto &[inst, wo] : r.objects) r.obs.push_back(observe(id, inst, wc, wo, r.model));
  return r;
}

double cam_err(const std::map<std::string, mc::Pose> &a, const std::map<std::string, mc::Pose> &b) {
  double e = 0.0;
  for (const auto &[id, p] : a) e += (p.translation() - b.at(id).translation()).norm();
  return e / static_cast<double>(a.size());
}

}  // namespace

TEST(Energy, ZeroAtTruth) {
  gen::Rng rng(1);
  const Rig r = make_rig(rng, 3, 4);
  EXPECT_LT(mc::energy(r.obs, r.cameras, r.objects), 1e-24);
}

TEST(Energy, TranslatedCameraQuadraticRegime) {
  gen::Rng rng(2);
  Rig r = make_rig(rng, 1, 1);
  const Vector3d d(0.003, -0.004, 0.0);  // 5 mm < delta
  r.cameras["hmd"] = mc::Pose(r.cameras["hmd"].rotation(), r.cameras["hmd"].translation() + d);
  const double n = static_cast<double>(r.model.size());
  EXPECT_NEAR(mc::energy(r.obs, r.cameras, r.objects), n * d.squaredNorm() / 2, 1e-15);
}

TEST(Energy, MatchesBruteForce) {
  gen::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Rig r = make_rig(rng, 3, 4);
    for (auto &[id, p] : r.cameras) p = gen::perturb(p, rng, 0.02, 0.1);
    for (auto &[id, p] : r.objects) p = gen::perturb(p, rng, 0.02, 0.1);
    const double delta = gen::uniform(rng, 0.005, 0.05);
    EXPECT_NEAR(mc::energy(r.obs, r.cameras, r.objects, delta), brute_energy(r.obs, r.cameras, r.objects, delta),
                1e-12);
  }
}

TEST(Energy, UnanchoredCameraThrows) {
  gen::Rng rng(4);
  Rig r = make_rig(rng, 2, 1);
  r.cameras.erase("C1");
  try {
    mc::energy(r.obs, r.cameras, r.objects);
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kUnanchoredCamera);
  }
}

TEST(Observation, ValidateSizes) {
  mc::ObservationSet o;
  o.surface_points = {Vector3d::Zero(), Vector3d::Ones(), Vector3d::UnitX()};
  o.model_points = o.surface_points;
  EXPECT_NO_THROW(mc::validate(o));
  o.model_points.pop_back();
  EXPECT_THROW(mc::validate(o), mc::Error);
  o.surface_points.pop_back();
  EXPECT_THROW(mc::validate(o), mc::Error);
}

TEST(GaussNewton, ZeroResidualZeroStep) {
  gen::Rng rng(5);
  const Rig r = make_rig(rng, 3, 4);
  EXPECT_LT(mc::camera_only_step("C1", r.obs, r.cameras, r.objects, 0.02).norm(), 1e-12);
  EXPECT_LT(mc::object_only_step(0, r.obs, r.cameras, r.objects, 0.02).norm(), 1e-12);
}

TEST(GaussNewton, OneStepTranslationConvergence) {
  gen::Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Rig r = make_rig(rng, 1, 1);
    const mc::Pose truth = r.cameras["hmd"];
    const Vector3d d = 0.01 * gen::unit_vec(rng);
    r.cameras["hmd"] = mc::Pose(truth.rotation(), truth.translation() + d);
    const auto sys = mc::camera_system("hmd", r.obs, r.cameras, r.objects, 0.02);
    const double n = static_cast<double>(r.model.size());
    EXPECT_LT((sys.g.tail<3>() - n * d).norm(), 1e-12);
    EXPECT_LT((sys.H.bottomRightCorner<3, 3>() - n * Eigen::Matrix3d::Identity()).norm(), 1e-9);
    const mc::Vector6 step = mc::camera_only_step("hmd", r.obs, r.cameras, r.objects, 0.02);
    const mc::Pose after = mc::se3_exp(step) * r.cameras["hmd"];
    EXPECT_LT((after.translation() - truth.translation()).norm(), 1e-9);
    EXPECT_LT(mc::rotation_angle(after.rotation().conjugate() * truth.rotation()), 1e-9);
  }
}

TEST(GaussNewton, CameraStepIsNegatedObjectStep) {
  gen::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Rig r = make_rig(rng, 1, 1);
    r.cameras["hmd"] = gen::perturb(r.cameras["hmd"], rng, 0.005, 0.02);
    const mc::Vector6 cam = mc::camera_only_step("hmd", r.obs, r.cameras, r.objects, 0.02);
    const mc::Vector6 obj = mc::object_only_step(0, r.obs, r.cameras, r.objects, 0.02);
    EXPECT_LT((cam.tail<3>() + obj.tail<3>()).norm(), 1e-9);
    EXPECT_LT((cam + obj).norm(), 1e-9);
  }
}

TEST(GaussNewton, CameraGradientMatchesFiniteDifferences) {
  gen::Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Rig r = make_rig(rng, 2, 3);
    for (auto &[id, p] : r.cameras) p = gen::perturb(p, rng, 0.01, 0.05);
    for (auto &[id, p] : r.objects) p = gen::perturb(p, rng, 0.01, 0.05);
    for (auto &o : r.obs) o.inlier = gen::uniform(rng, 0, 1) < 0.8;
    std::vector<mc::ObservationSet> used;
    for (const auto &o : r.obs)
      if (o.inlier) used.push_back(o);
    const double delta = 0.02;
    const auto sys = mc::camera_system("C1", r.obs, r.cameras, r.objects, delta);
    mc::Vector6 fd;
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      mc::Vector6 e = mc::Vector6::Zero();
      e[k] = h;
      auto cp = r.cameras, cm = r.cameras;
      cp["C1"] = mc::se3_exp(e) * cp["C1"];
      cm["C1"] = mc::se3_exp(mc::Vector6(-e)) * cm["C1"];
      std::vector<mc::ObservationSet> mine;
      for (const auto &o : used)
        if (o.camera_id == "C1") mine.push_back(o);
      fd[k] = (mc::energy(mine, cp, r.objects, delta) - mc::energy(mine, cm, r.objects, delta)) / (2 * h);
    }
    EXPECT_LT((sys.g - fd).norm(), 1e-5 * std::max(1.0, fd.norm())) << trial;
  }
}

TEST(GaussNewton, CameraHessianMatchesNumericSmallResiduals) {
  gen::Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Rig r = make_rig(rng, 2, 3);
    r.cameras["C1"] = gen::perturb(r.cameras["C1"], rng, 1e-5, 1e-5);
    const double delta = 0.02;
    const auto sys = mc::camera_system("C1", r.obs, r.cameras, r.objects, delta);
    std::vector<mc::ObservationSet> mine;
    for (const auto &o : r.obs)
      if (o.camera_id == "C1") mine.push_back(o);
    auto E = [&](const mc::Vector6 &t) {
      auto c = r.cameras;
      c["C1"] = mc::se3_exp(t) * c["C1"];
      return mc::energy(mine, c, r.objects, delta);
    };
    const double h = 1e-4;
    mc::Matrix6 H;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        mc::Vector6 a = mc::Vector6::Zero(), b = mc::Vector6::Zero();
        a[i] = h;
        b[j] = h;
        H(i, j) = (E(a + b) - E(a - b) - E(b - a) + E(-a - b)) / (4 * h * h);
      }
    EXPECT_LT((sys.H - H).norm(), 1e-3 * H.norm()) << trial;
    EXPECT_LT((sys.H - sys.H.transpose()).norm(), 1e-12 * sys.H.norm());
  }
}

TEST(GaussNewton, SingularHessian) {
  const mc::Matrix6 H = mc::Matrix6::Zero();
  try {
    mc::damped_step(H, mc::Vector6::Ones(), 0.0);
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kSingularHessian);
  }
  EXPECT_NO_THROW(mc::damped_step(H, mc::Vector6::Ones(), 1.0));

  // Every model point in one spot: rotation about it is unobservable.
  gen::Rng rng(10);
  Rig r = make_rig(rng, 2, 1);
  const mc::PointCloud blob(4, Vector3d(0.01, 0.02, 0.0));
  r.obs.clear();
  for (const auto &[id, wc] : r.cameras) r.obs.push_back(observe(id, 0, wc, r.objects[0], blob));
  r.cameras["C1"] = gen::perturb(r.cameras["C1"], rng, 0.01, 0.02);
  mc::BaProblem p{r.cameras, r.objects, {"hmd"}, r.obs};
  mc::BaOptions opt;
  opt.initial_lambda = 0.0;
  opt.max_lambda = 1e-12;
  try {
    mc::bundle_adjust(p, opt);
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kSingularHessian);
  }
}

TEST(BundleAdjust, ExactDetectionsUnchanged) {
  gen::Rng rng(11);
  const Rig r = make_rig(rng, 3, 5);
  const auto res = mc::bundle_adjust({r.cameras, r.objects, {"hmd"}, r.obs});
  EXPECT_LE(res.iterations, 1);
  EXPECT_TRUE(res.converged);
  for (const auto &[id, p] : r.cameras)
    EXPECT_LT((res.cameras.at(id).matrix() - p.matrix()).norm(), 1e-9);
  for (const auto &[id, p] : r.objects)
    EXPECT_LT((res.objects.at(id).matrix() - p.matrix()).norm(), 1e-9);
}

TEST(BundleAdjustProperty, TraceNonIncreasingAndGaugeFixed) {
  gen::Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Rig r = make_rig(rng, 3, 5);
    const auto truth = r.cameras;
    for (auto &[id, p] : r.cameras)
      if (id != "hmd") p = gen::perturb(p, rng, 0.02, 0.05);
    for (auto &[id, p] : r.objects) p = gen::perturb(p, rng, 0.01, 0.05);
    for (auto &o : r.obs)
      for (auto &x : o.surface_points) x += Vector3d(gen::gauss(rng, 0.002), gen::gauss(rng, 0.002), gen::gauss(rng, 0.002));
    const auto res = mc::bundle_adjust({r.cameras, r.objects, {"hmd"}, r.obs});
    ASSERT_GE(res.trace.size(), 2u);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      EXPECT_LE(res.trace[i].energy, res.trace[i - 1].energy * (1 + 1e-12));
    EXPECT_LT(res.final_energy, res.initial_energy);
    EXPECT_EQ(mc::to_array(res.cameras.at("hmd")), mc::to_array(r.cameras.at("hmd")));
    EXPECT_LT(cam_err(res.cameras, truth), cam_err(r.cameras, truth));
  }
}

TEST(BundleAdjustProperty, OutlierObservationNeverMovesCameras) {
  gen::Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    Rig r = make_rig(rng, 3, 4);
    for (auto &[id, p] : r.cameras)
      if (id != "hmd") p = gen::perturb(p, rng, 0.01, 0.03);
    mc::BaProblem clean{r.cameras, r.objects, {"hmd"}, r.obs};
    mc::BaProblem dirty = clean;
    // A far-off observation of object 0 by C1, flagged as outlier.
    mc::ObservationSet bad = observe("C1", 0, r.cameras["C1"], gen::perturb(r.objects[0], rng, 0.1, 0.5), r.model);
    bad.inlier = false;
    dirty.observations.push_back(bad);
    const auto a = mc::bundle_adjust(clean), b = mc::bundle_adjust(dirty);
    for (const auto &[id, p] : a.cameras) EXPECT_EQ(mc::to_array(p), mc::to_array(b.cameras.at(id))) << id;
    for (const auto &[id, p] : a.objects) EXPECT_EQ(mc::to_array(p), mc::to_array(b.objects.at(id))) << id;
  }
}

TEST(BundleAdjustProperty, Deterministic) {
  gen::Rng rng(14);
  Rig r = make_rig(rng, 4, 6);
  for (auto &[id, p] : r.cameras)
    if (id != "hmd") p = gen::perturb(p, rng, 0.02, 0.05);
  const mc::BaProblem p{r.cameras, r.objects, {"hmd"}, r.obs};
  const auto a = mc::bundle_adjust(p), b = mc::bundle_adjust(p);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].energy, b.trace[i].energy);
  for (const auto &[id, q] : a.cameras) EXPECT_EQ(mc::to_array(q), mc::to_array(b.cameras.at(id)));
}

TEST(BundleAdjust, SingleViewObjectMovesOnlyItself) {
  gen::Rng rng(15);
  Rig r = make_rig(rng, 2, 3);
  // Object 2 seen only by C1, with its start pose off.
  std::erase_if(r.obs, [](const mc::ObservationSet &o) { return o.instance_id == 2 && o.camera_id == "hmd"; });
  const mc::Pose truth2 = r.objects[2];
  r.objects[2] = gen::perturb(truth2, rng, 0.01, 0.05);
  const auto res = mc::bundle_adjust({r.cameras, r.objects, {"hmd"}, r.obs});
  EXPECT_LT((res.cameras.at("C1").matrix() - r.cameras.at("C1").matrix()).norm(), 1e-12);
  EXPECT_LT((res.objects.at(2).translation() - truth2.translation()).norm(), 1e-6);
}

TEST(BundleAdjust, NoisyDetectionsImproveCameras) {
  // Three cameras, detections off by 10 mm / 2 deg, depth samples from the
  // true surface with 2 mm noise.
  gen::Rng rng(16);
  int improved = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    Rig r = make_rig(rng, 3, 6);
    const auto truth = r.cameras;
    for (auto &o : r.obs)
      for (auto &x : o.surface_points) x *= 1.0 + gen::gauss(rng, 0.002) / x.norm();
    // Initial estimates from one noisy detection per pair, as anchoring would.
    auto detect = [&](const std::string &c, int i) {
      const mc::Pose d = r.cameras.at(c).inverse() * r.objects.at(i);
      return mc::Pose(gen::small_rotation(rng, 2.0 * M_PI / 180) * d.rotation(),
                      d.translation() + Vector3d(gen::gauss(rng, 0.01), gen::gauss(rng, 0.01), gen::gauss(rng, 0.01)));
    };
    std::map<int, mc::Pose> objs;
    for (const auto &[i, wo] : r.objects) objs[i] = r.cameras.at("hmd") * detect("hmd", i);
    std::map<std::string, mc::Pose> cams{{"hmd", r.cameras.at("hmd")}};
    for (const char *c : {"C1", "C2"}) cams[c] = objs[0] * detect(c, 0).inverse();
    const auto res = mc::bundle_adjust({cams, objs, {"hmd"}, r.obs});
    improved += cam_err(res.cameras, truth) < cam_err(cams, truth);
  }
  EXPECT_GE(improved, trials - 1);
}

TEST(BundleAdjust, TraceCsv) {
  const std::vector<mc::BaTraceRow> rows{{0, 2.0, 1e-3, 0.0}, {1, 1.0, 1e-4, 0.5}};
  const std::string csv = mc::trace_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,energy,lambda,max_step_norm");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(BundleAdjust, InvalidOptions) {
  gen::Rng rng(17);
  const Rig r = make_rig(rng, 2, 1);
  mc::BaOptions opt;
  opt.huber_delta = 0.0;
  try {
    mc::bundle_adjust({r.cameras, r.objects, {"hmd"}, r.obs}, opt);
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kInvalidConfig);
  }
}
