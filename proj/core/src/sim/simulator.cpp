#include "multicam/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <nlohmann/json.hpp>
#include <random>

#include "multicam/common/error.hpp"
#include "multicam/geometry/pose_json.hpp"

namespace multicam {

using Eigen::Vector3d;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

Vector3d random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vector3d v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

Eigen::Quaterniond random_rotation(std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

double resting_height(const ObjectSpec &spec) {
  switch (spec.shape) {
    case Shape::kBox: return spec.dims.at(2) / 2;
    case Shape::kCylinder: return spec.dims.at(1) / 2;
    case Shape::kTube: return spec.dims.at(2) / 2;
    case Shape::kLBracket: return spec.dims.at(3) / 2;
  }
  return 0.0;
}

void require(bool ok, const std::string &what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
}

}  // namespace

void validate(const SceneConfig &c) {
  auto nonneg = [](double v) { return v >= 0 && std::isfinite(v); };
  require(!c.objects.empty(), "scene has no objects");
  require(!c.static_cameras.empty() || !c.trajectory.waypoints.empty(), "camera rig is empty");
  require(!c.trajectory.waypoints.empty(), "HMD trajectory needs at least one waypoint");
  require(nonneg(c.noise.sigma_trans) && nonneg(c.noise.sigma_rot) && nonneg(c.noise.depth_noise) &&
              nonneg(c.noise.keypoint_noise_px),
          "noise sigmas must be >= 0");
  require(c.noise.outlier_rate >= 0 && c.noise.outlier_rate <= 1, "outlier rate must be in [0, 1]");
  require(c.noise.dropout >= 0 && c.noise.dropout <= 1, "dropout must be in [0, 1]");
  require(c.noise.outlier_min > 0 && c.noise.outlier_max >= c.noise.outlier_min, "bad outlier magnitude range");
  require(nonneg(c.drift.sigma_trans) && nonneg(c.drift.sigma_rot), "drift sigmas must be >= 0");
  require(c.frame_rate > 0 && std::isfinite(c.frame_rate), "frame rate must be positive");
  require(c.duration > 0 && std::isfinite(c.duration), "duration must be positive");
  require(c.max_range > 0 && c.min_depth >= 0, "bad visibility range");
  try {
    c.intrinsics.validate();
  } catch (const Error &e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  std::vector<std::string> ids{c.trajectory.hmd_id};
  for (const auto &s : c.static_cameras) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "camera ids must be unique");
  std::vector<int> cats;
  for (const auto &o : c.objects) cats.push_back(o.category_id);
  std::sort(cats.begin(), cats.end());
  require(std::adjacent_find(cats.begin(), cats.end()) == cats.end(), "category ids must be unique");
  for (std::size_t i = 1; i < c.trajectory.waypoints.size(); ++i)
    require(c.trajectory.waypoints[i].t >= c.trajectory.waypoints[i - 1].t, "waypoint times must be sorted");
}

NoiseSpec default_noise() {
  NoiseSpec n;
  n.sigma_trans = 0.010;
  n.sigma_rot = 2.0 * kPi / 180.0;
  n.outlier_rate = 0.05;
  n.depth_noise = 0.002;
  return n;
}

SceneConfig default_scene(DistancePreset preset, NoiseSpec noise, DriftSpec drift, std::uint64_t seed) {
  SceneConfig c;
  c.noise = noise;
  c.drift = drift;
  c.seed = seed;
  const double d = preset == DistancePreset::kNear ? 0.40 : 0.90;

  struct Part {
    const char *name;
    Shape shape;
    std::vector<double> dims;
    int order;
  };
  const std::vector<Part> parts = {
      {"aiming_arm", Shape::kLBracket, {0.16, 0.10, 0.03, 0.02}, 1},
      {"bar", Shape::kBox, {0.12, 0.03, 0.02}, 2},
      {"gear", Shape::kTube, {0.03, 0.01, 0.02}, 16},
      {"insertion_handle", Shape::kLBracket, {0.14, 0.08, 0.035, 0.03}, 1},
      {"nail", Shape::kLBracket, {0.18, 0.04, 0.015, 0.015}, 1},
      {"roller", Shape::kTube, {0.012, 0.006, 0.04}, 16},
      {"screw", Shape::kCylinder, {0.004, 0.05}, 16},
      {"spacer", Shape::kLBracket, {0.06, 0.035, 0.02, 0.015}, 1},
      {"stick", Shape::kCylinder, {0.006, 0.16}, 16},
  };
  // Layout jitter comes from its own stream so noise settings never move objects.
  auto rng = stream(seed, 0x1A70u);
  std::uniform_real_distribution<double> yaw(0.0, 2 * kPi), jitter(-0.015, 0.015);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    ObjectSpec spec;
    spec.name = parts[i].name;
    spec.category_id = static_cast<int>(i) + 1;
    spec.shape = parts[i].shape;
    spec.dims = parts[i].dims;
    spec.symmetry_order = parts[i].order;
    ObjectPlacement p;
    const double gx = -0.2 + 0.2 * static_cast<double>(i % 3);
    const double gy = -0.12 + 0.12 * static_cast<double>(i / 3);
    p.position = Vector3d(gx + jitter(rng), gy + jitter(rng), resting_height(spec));
    p.yaw = yaw(rng);
    spec.placements.push_back(p);
    c.objects.push_back(std::move(spec));
  }

  const Vector3d left_target(-0.12, 0.0, 0.0), right_target(0.12, 0.0, 0.0);
  c.static_cameras.push_back({"C1", look_at(left_target + d * Vector3d(-0.5, -0.8, 0.9).normalized(), left_target)});
  c.static_cameras.push_back({"C2", look_at(right_target + d * Vector3d(0.5, -0.8, 0.9).normalized(), right_target)});

  const Vector3d dir = Vector3d(0.0, -0.8, 0.9).normalized();
  auto at = [&](double sway) -> Vector3d { return Vector3d(sway, 0.0, 0.0) + d * dir; };
  const Vector3d away(0.0, -1.0, 0.2);
  const Vector3d l(-0.25, 0.0, 0.0), r(0.25, 0.0, 0.0);
  c.trajectory.waypoints = {
      {0.0, at(-0.03), at(-0.03) + away}, {1.0, at(-0.03), at(-0.03) + away},
      {2.2, at(-0.02), l},                {4.0, at(0.02), r},
      {5.0, at(0.03), at(0.03) + away},   {6.0, at(0.03), at(0.03) + away},
      {7.2, at(0.02), r},                 {8.8, at(-0.02), l},
      {9.6, at(-0.03), at(-0.03) + away},
  };
  return c;
}

ModelRegistry build_models(const SceneConfig &config) {
  ModelRegistry reg;
  for (const auto &o : config.objects)
    reg.add(primitive_model(o.shape, o.dims, o.symmetry_order, o.category_id, config.model_points, o.name));
  return reg;
}

Pose look_at(const Vector3d &position, const Vector3d &target, const Vector3d &up) {
  const Vector3d z = target - position;
  if (z.norm() < 1e-12) throw Error(ErrorCode::kInvalidArgument, "look_at target equals position");
  const Vector3d zc = z.normalized();
  Vector3d xc = zc.cross(up);
  if (xc.norm() < 1e-9) throw Error(ErrorCode::kInvalidArgument, "look_at direction parallel to up");
  xc.normalize();
  const Vector3d yc = zc.cross(xc);
  Eigen::Matrix3d R;
  R.col(0) = xc;
  R.col(1) = yc;
  R.col(2) = zc;
  return Pose(Eigen::Quaterniond(R).normalized(), position);
}

Pose trajectory_pose(const TrajectorySpec &tr, double t) {
  const auto &w = tr.waypoints;
  if (w.empty()) throw Error(ErrorCode::kInvalidConfig, "empty trajectory");
  if (t <= w.front().t || w.size() == 1) return look_at(w.front().position, w.front().target);
  if (t >= w.back().t) return look_at(w.back().position, w.back().target);
  std::size_t i = 1;
  while (w[i].t < t) ++i;
  const Waypoint &a = w[i - 1], &b = w[i];
  const double s = b.t > a.t ? (t - a.t) / (b.t - a.t) : 1.0;
  const Pose pa = look_at(a.position, a.target), pb = look_at(b.position, b.target);
  return Pose(pa.rotation().slerp(s, pb.rotation()), (1 - s) * a.position + s * b.position);
}

std::vector<Pose> drift_model(std::span<const Pose> true_poses, std::span<const double> timestamps,
                              const DriftSpec &drift, std::uint64_t seed) {
  if (true_poses.size() != timestamps.size())
    throw Error(ErrorCode::kInvalidArgument, "pose and timestamp streams differ in length");
  if (!(drift.sigma_trans >= 0) || !(drift.sigma_rot >= 0))
    throw Error(ErrorCode::kInvalidConfig, "drift sigmas must be >= 0");
  std::vector<Pose> out;
  out.reserve(true_poses.size());
  auto rng = stream(seed, 0xD41F7u);
  std::normal_distribution<double> n01(0.0, 1.0);
  Pose D;
  for (std::size_t k = 0; k < true_poses.size(); ++k) {
    if (k > 0) {
      const double dt = timestamps[k] - timestamps[k - 1];
      if (dt < 0) throw Error(ErrorCode::kInvalidArgument, "timestamps must be non-decreasing");
      const double sr = drift.sigma_rot * std::sqrt(dt), st = drift.sigma_trans * std::sqrt(dt);
      Vector6 xi;
      for (int j = 0; j < 3; ++j) xi[j] = sr * n01(rng);
      for (int j = 3; j < 6; ++j) xi[j] = st * n01(rng);
      if (sr > 0 || st > 0) D = D * se3_exp(xi);
    }
    out.push_back(D * true_poses[k]);
  }
  return out;
}

SimDataset generate(const SceneConfig &config) {
  validate(config);
  SimDataset ds;
  ds.models = build_models(config);
  ds.ground_truth.hmd_id = config.trajectory.hmd_id;

  const auto n_frames = static_cast<std::size_t>(std::llround(config.duration * config.frame_rate));
  std::vector<double> times(n_frames);
  std::vector<Pose> hmd_true(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    times[k] = static_cast<double>(k) / config.frame_rate;
    hmd_true[k] = trajectory_pose(config.trajectory, times[k]);
  }
  const std::vector<Pose> slam = drift_model(hmd_true, times, config.drift, config.seed);

  struct Instance {
    int id;
    const ObjectSpec *spec;
    const ObjectPlacement *place;
  };
  std::vector<Instance> instances;
  for (const auto &o : config.objects)
    for (const auto &p : o.placements) instances.push_back({static_cast<int>(instances.size()), &o, &p});

  struct Cam {
    std::string id;
    CameraKind kind;
  };
  std::vector<Cam> cams{{config.trajectory.hmd_id, CameraKind::kHmd}};
  for (const auto &s : config.static_cameras) cams.push_back({s.id, CameraKind::kStatic});

  const auto &K = config.intrinsics;
  const NoiseSpec &nz = config.noise;

  // Candidate surface points per category in FPS order, with the model centroid.
  struct SurfaceCandidates {
    PointCloud points;
    Vector3d centroid;
  };
  std::map<int, SurfaceCandidates> surf;
  if (config.surface_samples > 0) {
    for (const auto &[cat, m] : ds.models) {
      SurfaceCandidates sc;
      sc.points = fps_keypoints(m.points, std::min(m.points.size(), 3 * config.surface_samples));
      sc.centroid = Vector3d::Zero();
      for (const auto &p : m.points) sc.centroid += p;
      sc.centroid /= static_cast<double>(m.points.size());
      surf.emplace(cat, std::move(sc));
    }
  }
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = times[k];
    GroundTruthFrame gf;
    gf.timestamp = t;
    gf.hmd = hmd_true[k];
    gf.slam = slam[k];
    for (const auto &s : config.static_cameras) gf.cameras[s.id] = s.pose_in_world;
    for (const auto &inst : instances) {
      const Vector3d pos = inst.place->position + inst.place->velocity * t;
      const Eigen::Quaterniond q(Eigen::AngleAxisd(inst.place->yaw, Vector3d::UnitZ()));
      gf.objects.push_back({inst.id, inst.spec->category_id, Pose(q, pos)});
    }

    for (std::size_t ci = 0; ci < cams.size(); ++ci) {
      const Cam &cam = cams[ci];
      const Pose world_T_cam = ci == 0 ? hmd_true[k] : config.static_cameras[ci - 1].pose_in_world;
      const Pose cam_T_world = world_T_cam.inverse();
      auto rng = stream(config.seed, k + 1, ci + 1);
      auto depth_rng = stream(config.seed, (1ULL << 40) + k, ci + 1);
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      std::normal_distribution<double> n01(0.0, 1.0);

      FrameRecord rec;
      rec.timestamp = t;
      rec.camera_id = cam.id;
      rec.kind = cam.kind;
      if (cam.kind == CameraKind::kHmd) rec.slam_pose = slam[k];
      auto &vis = gf.visible[cam.id];
      for (std::size_t oi = 0; oi < instances.size(); ++oi) {
        const auto &inst = instances[oi];
        const Pose truth = cam_T_world * gf.objects[oi].pose_in_world;
        const Vector3d c = truth.translation();
        const bool in_view = c.z() > config.min_depth && c.norm() <= config.max_range && K.inside(K.project(c));
        // Fixed draw count per object keeps streams aligned across settings.
        const double u_drop = u01(rng), u_out = u01(rng), conf = 0.6 + 0.4 * u01(rng);
        Vector3d dt(n01(rng), n01(rng), n01(rng));
        const Vector3d axis = random_unit(rng);
        const double ang = std::abs(n01(rng));
        const Vector3d out_dir = random_unit(rng);
        const double out_mag = nz.outlier_min + (nz.outlier_max - nz.outlier_min) * u01(rng);
        const Eigen::Quaterniond out_rot = random_rotation(rng);
        if (!in_view) continue;
        vis.push_back(inst.id);
        if (u_drop < nz.dropout) continue;

        Pose det;
        if (u_out < nz.outlier_rate) {
          Vector3d off = out_dir * out_mag;
          if (c.z() + off.z() <= config.min_depth) off.z() = -off.z();
          det = Pose(out_rot, c + off);
        } else {
          const Eigen::Quaterniond dq(Eigen::AngleAxisd(ang * nz.sigma_rot, axis));
          det = Pose(dq * truth.rotation(), c + nz.sigma_trans * dt);
        }
        const ObjectModel &model = ds.models.at(inst.spec->category_id);
        Detection d;
        d.camera_id = cam.id;
        d.timestamp = t;
        d.category_id = inst.spec->category_id;
        d.instance_hint = inst.id;
        d.pose = resolve_symmetry(det, model);
        if (config.surface_samples > 0) {
          // The sensor sees the true surface; correspondences follow the
          // detection branch: d.pose = det * S, so model points map by S^-1.
          const Pose s_inv = d.pose.inverse() * det;
          const auto &sc = surf.at(inst.spec->category_id);
          for (const auto &p : sc.points) {
            if (d.surface.size() >= config.surface_samples) break;
            Vector3d x = truth * p;
            if ((truth.rotation() * (p - sc.centroid)).dot(x) >= 0) continue;
            if (nz.depth_noise > 0) x *= 1.0 + nz.depth_noise * n01(depth_rng) / x.norm();
            d.surface.push_back({s_inv * p, x});
          }
        }
        d.confidence = conf;
        d.dynamic = inst.place->velocity.squaredNorm() > 0;
        if (config.emit_keypoints) {
          for (const auto &kp : model.keypoints) {
            const Vector3d pc = d.pose * kp;
            if (pc.z() <= 0) continue;
            Eigen::Vector2d px = K.project(pc);
            px += nz.keypoint_noise_px * Eigen::Vector2d(n01(rng), n01(rng));
            d.keypoints_2d.push_back(px);
          }
        }
        rec.detections.push_back(std::move(d));
      }
      ds.records.push_back(std::move(rec));
    }
    ds.ground_truth.frames.push_back(std::move(gf));
  }
  return ds;
}

// ---- config JSON ---------------------------------------------------------

namespace {

json vec3(const Vector3d &v) { return json::array({v.x(), v.y(), v.z()}); }
Vector3d vec3(const json &j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kInvalidConfig, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

json scene_config_to_json(const SceneConfig &c) {
  json objs = json::array();
  for (const auto &o : c.objects) {
    json places = json::array();
    for (const auto &p : o.placements) {
      json jp = {{"position", vec3(p.position)}, {"yaw", p.yaw}};
      if (p.velocity.squaredNorm() > 0) jp["velocity"] = vec3(p.velocity);
      places.push_back(std::move(jp));
    }
    objs.push_back({{"name", o.name}, {"category_id", o.category_id}, {"shape", to_string(o.shape)},
                    {"dims", o.dims}, {"symmetry_order", o.symmetry_order}, {"placements", places}});
  }
  json statics = json::array();
  for (const auto &s : c.static_cameras) statics.push_back({{"id", s.id}, {"pose", pose_to_json(s.pose_in_world)}});
  json wps = json::array();
  for (const auto &w : c.trajectory.waypoints)
    wps.push_back({{"t", w.t}, {"position", vec3(w.position)}, {"target", vec3(w.target)}});
  const auto &K = c.intrinsics;
  return {
      {"seed", c.seed},
      {"frame_rate", c.frame_rate},
      {"duration", c.duration},
      {"model_points", c.model_points},
      {"surface_samples", c.surface_samples},
      {"intrinsics", {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}}},
      {"max_range", c.max_range},
      {"min_depth", c.min_depth},
      {"objects", objs},
      {"static_cameras", statics},
      {"hmd", {{"id", c.trajectory.hmd_id}, {"waypoints", wps}}},
      {"noise",
       {{"sigma_trans", c.noise.sigma_trans}, {"sigma_rot", c.noise.sigma_rot},
        {"outlier_rate", c.noise.outlier_rate}, {"outlier_min", c.noise.outlier_min},
        {"outlier_max", c.noise.outlier_max}, {"dropout", c.noise.dropout},
        {"depth_noise", c.noise.depth_noise}, {"keypoint_noise_px", c.noise.keypoint_noise_px}}},
      {"drift", {{"sigma_trans", c.drift.sigma_trans}, {"sigma_rot", c.drift.sigma_rot}}},
      {"emit_keypoints", c.emit_keypoints},
  };
}

SceneConfig scene_config_from_json(const json &doc) {
  try {
    SceneConfig c;
    c.seed = doc.value("seed", c.seed);
    c.frame_rate = doc.value("frame_rate", c.frame_rate);
    c.duration = doc.value("duration", c.duration);
    c.model_points = doc.value("model_points", c.model_points);
    c.surface_samples = doc.value("surface_samples", c.surface_samples);
    if (doc.contains("intrinsics")) {
      const auto &k = doc.at("intrinsics");
      c.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                      k.at("cy").get<double>(), k.at("width").get<int>(), k.at("height").get<int>()};
    }
    c.max_range = doc.value("max_range", c.max_range);
    c.min_depth = doc.value("min_depth", c.min_depth);
    for (const auto &jo : doc.at("objects")) {
      ObjectSpec o;
      o.name = jo.value("name", std::string{});
      o.category_id = jo.at("category_id").get<int>();
      o.shape = shape_from_string(jo.at("shape").get<std::string>());
      o.dims = jo.at("dims").get<std::vector<double>>();
      o.symmetry_order = jo.value("symmetry_order", 1);
      for (const auto &jp : jo.at("placements")) {
        ObjectPlacement p;
        p.position = vec3(jp.at("position"));
        p.yaw = jp.value("yaw", 0.0);
        if (jp.contains("velocity")) p.velocity = vec3(jp.at("velocity"));
        o.placements.push_back(p);
      }
      c.objects.push_back(std::move(o));
    }
    for (const auto &js : doc.at("static_cameras"))
      c.static_cameras.push_back({js.at("id").get<std::string>(), pose_from_json(js.at("pose"))});
    const auto &jh = doc.at("hmd");
    c.trajectory.hmd_id = jh.value("id", c.trajectory.hmd_id);
    for (const auto &jw : jh.at("waypoints"))
      c.trajectory.waypoints.push_back({jw.at("t").get<double>(), vec3(jw.at("position")), vec3(jw.at("target"))});
    if (doc.contains("noise")) {
      const auto &n = doc.at("noise");
      c.noise.sigma_trans = n.value("sigma_trans", 0.0);
      c.noise.sigma_rot = n.value("sigma_rot", 0.0);
      c.noise.outlier_rate = n.value("outlier_rate", 0.0);
      c.noise.outlier_min = n.value("outlier_min", c.noise.outlier_min);
      c.noise.outlier_max = n.value("outlier_max", c.noise.outlier_max);
      c.noise.dropout = n.value("dropout", 0.0);
      c.noise.depth_noise = n.value("depth_noise", 0.0);
      c.noise.keypoint_noise_px = n.value("keypoint_noise_px", 0.0);
    }
    if (doc.contains("drift")) {
      c.drift.sigma_trans = doc.at("drift").value("sigma_trans", 0.0);
      c.drift.sigma_rot = doc.at("drift").value("sigma_rot", 0.0);
    }
    c.emit_keypoints = doc.value("emit_keypoints", false);
    validate(c);
    return c;
  } catch (const Error &) {
    throw;
  } catch (const std::exception &e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("scene config: ") + e.what());
  }
}

}  // namespace multicam
