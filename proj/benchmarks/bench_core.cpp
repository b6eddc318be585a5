#include <random>

#include <benchmark/benchmark.h>

#include "multicam/ba/bundle_adjustment.hpp"
#include "multicam/ba/observations.hpp"
#include "multicam/geometry/metrics.hpp"
#include "multicam/matching/matching.hpp"
#include "multicam/sim/primitives.hpp"

namespace mc = multicam;

namespace {

std::mt19937_64 rng(7);

mc::Pose random_pose(double half) {
  std::uniform_real_distribution<double> u(-half, half);
  Eigen::Quaterniond q(u(rng) + 1.5, u(rng), u(rng), u(rng));
  return mc::Pose(q.normalized(), Eigen::Vector3d(u(rng), u(rng), u(rng)));
}

void BM_SymmetricDistance(benchmark::State &state) {
  const auto m = mc::primitive_model(mc::Shape::kBox, std::vector<double>{0.05, 0.05, 0.03},
                                     static_cast<int>(state.range(0)), 1, 128);
  const mc::Pose a = random_pose(0.3), b = random_pose(0.3);
  for (auto _ : state) benchmark::DoNotOptimize(mc::symmetric_distance(a, b, m));
}
BENCHMARK(BM_SymmetricDistance)->Arg(1)->Arg(2)->Arg(4);

// Two cameras seeing the same objects, identical up to a rigid offset.
void BM_MatchCameras(benchmark::State &state) {
  const int n = static_cast<int>(state.range(0));
  mc::ModelRegistry models;
  std::vector<mc::Detection> a, b;
  const mc::Pose a_T_b = random_pose(0.3);
  for (int c = 1; c <= n; ++c) {
    models.add(mc::primitive_model(mc::Shape::kLBracket, std::vector<double>{0.03 + 0.004 * c, 0.06, 0.02, 0.006}, 1,
                                   c, 96));
    mc::Detection d;
    d.category_id = c;
    d.pose = mc::Pose(random_pose(0.5).rotation(), Eigen::Vector3d(0.1 * (c % 3), 0.1 * (c / 3), 0.6));
    a.push_back(d);
    d.pose = a_T_b.inverse() * d.pose;
    b.push_back(d);
  }
  for (auto _ : state) benchmark::DoNotOptimize(mc::match_cameras(a, b, models));
}
BENCHMARK(BM_MatchCameras)->Arg(3)->Arg(9)->Unit(benchmark::kMicrosecond);

void BM_BundleAdjust(benchmark::State &state) {
  const int n_cams = static_cast<int>(state.range(0)), n_objs = 9;
  const auto model = mc::primitive_model(mc::Shape::kBox, std::vector<double>{0.05, 0.04, 0.03}, 1, 1, 64).points;
  mc::BaProblem truth;
  for (int o = 0; o < n_objs; ++o) truth.objects[o] = random_pose(0.2);
  for (int c = 0; c < n_cams; ++c) {
    const std::string id = c == 0 ? "hmd" : "C" + std::to_string(c);
    const mc::Pose cam = mc::Pose(random_pose(0.1).rotation(), Eigen::Vector3d(0.0, 0.0, -0.6)).inverse();
    truth.cameras[id] = cam;
    for (const auto &[o, wo] : truth.objects)
      truth.observations.push_back(mc::make_observation(id, o, cam.inverse() * wo, model, 0.002, c * 31 + o));
  }
  truth.fixed_cameras = {"hmd"};
  mc::BaProblem start = truth;
  for (auto &[id, p] : start.cameras)
    if (id != "hmd") p = mc::Pose(p.rotation(), p.translation() + Eigen::Vector3d(0.01, -0.01, 0.005));
  for (auto _ : state) benchmark::DoNotOptimize(mc::bundle_adjust(start));
}
BENCHMARK(BM_BundleAdjust)->Arg(2)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
