#include "multicam/evalio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "multicam/common/error.hpp"
#include "multicam/geometry/metrics.hpp"

namespace multicam {

using nlohmann::json;

double relative_drift(const Pose &slam_t, const Pose &slam_k, const Pose &true_t, const Pose &true_k) {
  const Eigen::Vector3d ds =
      slam_k.rotation().conjugate() * (slam_t.translation() - slam_k.translation());
  const Eigen::Vector3d dg =
      true_k.rotation().conjugate() * (true_t.translation() - true_k.translation());
  return (ds - dg).norm();
}

namespace {

struct Acc {
  std::size_t n = 0;
  double trans = 0.0, rot = 0.0;
  std::size_t n_rot = 0;
  std::vector<double> errors;
};

}  // namespace

EvaluationReport evaluate_run(std::span<const GraphSnapshot> snapshots, const GroundTruth &gt,
                              const ModelRegistry &models, const EvalOptions &opt) {
  EvaluationReport rep;
  rep.method = opt.method;
  rep.frame_count = snapshots.size();

  // Reduced models for the point metrics.
  std::map<int, ObjectModel> small;
  for (const auto &[cat, m] : models) {
    ObjectModel s = m;
    if (s.points.size() > opt.max_model_points) {
      // Keep the subset closed under the symmetries, or ADD-S between
      // equivalent branches would not vanish.
      const std::size_t n_sym = m.symmetries.size();
      const PointCloud seeds = fps_keypoints(m.points, std::max<std::size_t>(1, opt.max_model_points / n_sym));
      s.points.clear();
      for (const auto &S : m.symmetries)
        for (const auto &p : seeds) s.points.push_back(S * p);
    }
    small.emplace(cat, std::move(s));
  }

  std::map<std::string, Acc> cam_acc;
  Acc cam_all;
  std::map<int, Acc> obj_acc;
  std::map<std::string, Acc> stage;

  const GroundTruthFrame *last_key = nullptr;
  const GroundTruthFrame *first = nullptr;
  for (const auto &s : snapshots) {
    const GroundTruthFrame *g = gt.at(s.timestamp);
    if (!g) throw Error(ErrorCode::kInvalidArgument, "no ground truth at t=" + std::to_string(s.timestamp));
    if (!first) first = g;

    stage["ingest"].n++, stage["ingest"].trans += s.timings.ingest_ms;
    stage["matching"].n++, stage["matching"].trans += s.timings.matching_ms;
    stage["aggregation"].n++, stage["aggregation"].trans += s.timings.aggregation_ms;
    if (s.keyframe) {
      stage["ba"].n++, stage["ba"].trans += s.timings.ba_ms;
      ++rep.keyframe_count;
      if (s.hmd_keyframe) last_key = g;
      for (const auto &id : s.updated_cameras) {
        auto it = std::find_if(s.cameras.begin(), s.cameras.end(),
                               [&](const CameraNode &c) { return c.camera_id == id; });
        auto gt_it = g->cameras.find(id);
        if (it == s.cameras.end() || !it->pose_in_world || gt_it == g->cameras.end()) continue;
        const CameraPoseError e = camera_pose_error(*it->pose_in_world, gt_it->second);
        for (Acc *a : {&cam_acc[id], &cam_all}) {
          a->n++;
          a->n_rot++;
          a->trans += e.translation_mm;
          a->rot += e.rotation_deg;
        }
      }
    }

    DriftSample d;
    d.t = s.timestamp;
    d.keyframe = s.keyframe;
    d.hmd_keyframe = s.hmd_keyframe;
    d.raw = relative_drift(g->slam, first->slam, g->hmd, first->hmd);
    d.corrected = last_key ? relative_drift(g->slam, last_key->slam, g->hmd, last_key->hmd) : d.raw;
    rep.drift.push_back(d);

    if (opt.objects_at_keyframes_only && !s.keyframe) continue;
    // Greedy category-wise assignment of observed nodes to GT objects.
    struct Cand {
      double d;
      std::size_t est, truth;
    };
    std::vector<const ObjectNode *> est;
    for (const auto &o : s.objects)
      if (o.last_observed == s.timestamp) est.push_back(&o);
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < est.size(); ++i)
      for (std::size_t j = 0; j < g->objects.size(); ++j)
        if (g->objects[j].category_id == est[i]->category_id)
          cands.push_back({(est[i]->pose_in_world.translation() - g->objects[j].pose_in_world.translation()).norm(), i, j});
    std::sort(cands.begin(), cands.end(), [](const Cand &a, const Cand &b) {
      if (a.d != b.d) return a.d < b.d;
      if (a.est != b.est) return a.est < b.est;
      return a.truth < b.truth;
    });
    std::vector<bool> used_e(est.size()), used_t(g->objects.size());
    for (const auto &c : cands) {
      if (used_e[c.est] || used_t[c.truth]) continue;
      used_e[c.est] = used_t[c.truth] = true;
      const auto it = small.find(est[c.est]->category_id);
      if (it == small.end()) continue;
      const ObjectModel &m = it->second;
      const Pose &pe = est[c.est]->pose_in_world;
      const Pose &pg = g->objects[c.truth].pose_in_world;
      Acc &a = obj_acc[m.category_id];
      a.n++;
      a.errors.push_back(m.is_symmetric() ? add_s(pe, pg, m) : add(pe, pg, m));
      a.trans += 1000.0 * c.d;
      if (!m.is_symmetric()) {
        a.n_rot++;
        a.rot += rotation_angle(pg.rotation().conjugate() * pe.rotation()) * 180.0 / std::numbers::pi;
      }
    }
  }

  rep.no_keyframes = rep.keyframe_count == 0;
  for (const auto &[id, a] : cam_acc)
    rep.cameras.push_back({id, a.n, a.trans / a.n, a.rot / a.n});
  if (cam_all.n > 0)
    rep.camera_mean = CameraErrorRow{"mean", cam_all.n, cam_all.trans / cam_all.n, cam_all.rot / cam_all.n};

  Acc all;
  for (const auto &[cat, a] : obj_acc) {
    const ObjectModel &m = models.at(cat);
    ObjectErrorRow row;
    row.name = m.name.empty() ? "category_" + std::to_string(cat) : m.name;
    row.category_id = cat;
    row.symmetric = m.is_symmetric();
    row.samples = a.n;
    row.auc = add_auc(a.errors, opt.auc_threshold);
    row.translation_mm = a.trans / a.n;
    if (a.n_rot > 0) row.rotation_deg = a.rot / a.n_rot;
    rep.objects.push_back(row);
    all.n += a.n;
    all.trans += a.trans;
    all.n_rot += a.n_rot;
    all.rot += a.rot;
    all.errors.insert(all.errors.end(), a.errors.begin(), a.errors.end());
  }
  if (all.n > 0) {
    ObjectErrorRow mean;
    mean.name = "mean";
    mean.samples = all.n;
    mean.auc = add_auc(all.errors, opt.auc_threshold);
    mean.translation_mm = all.trans / all.n;
    if (all.n_rot > 0) mean.rotation_deg = all.rot / all.n_rot;
    rep.object_mean = mean;
  }
  for (const char *name : {"ingest", "matching", "aggregation", "ba"}) {
    const Acc &a = stage[name];
    if (a.n > 0) rep.runtime.push_back({name, a.n, a.trans / a.n});
  }
  return rep;
}

json report_to_json(const EvaluationReport &r) {
  auto cam = [](const CameraErrorRow &c) {
    return json{{"camera", c.camera_id}, {"samples", c.samples}, {"e_trans_mm", c.translation_mm}, {"e_rot_deg", c.rotation_deg}};
  };
  auto obj = [](const ObjectErrorRow &o) {
    json j = {{"name", o.name}, {"cat", o.category_id}, {"symmetric", o.symmetric}, {"samples", o.samples},
              {"auc", o.auc}, {"e_trans_mm", o.translation_mm}};
    j["e_rot_deg"] = o.rotation_deg ? json(*o.rotation_deg) : json(nullptr);
    return j;
  };
  json cams = json::array(), objs = json::array(), drift = json::array(), rt = json::array();
  for (const auto &c : r.cameras) cams.push_back(cam(c));
  for (const auto &o : r.objects) objs.push_back(obj(o));
  for (const auto &d : r.drift) drift.push_back({{"t", d.t}, {"raw", d.raw}, {"corrected", d.corrected}, {"keyframe", d.keyframe}, {"hmd_keyframe", d.hmd_keyframe}});
  for (const auto &x : r.runtime) rt.push_back({{"stage", x.stage}, {"samples", x.samples}, {"mean_ms", x.mean_ms}});
  return {{"v", 1},
          {"method", r.method},
          {"frames", r.frame_count},
          {"keyframes", r.keyframe_count},
          {"no_keyframes", r.no_keyframes},
          {"cameras", cams},
          {"camera_mean", r.camera_mean ? cam(*r.camera_mean) : json(nullptr)},
          {"objects", objs},
          {"object_mean", r.object_mean ? obj(*r.object_mean) : json(nullptr)},
          {"drift", drift},
          {"runtime", rt}};
}

EvaluationReport report_from_json(const json &doc) {
  try {
    if (doc.at("v") != 1) throw Error(ErrorCode::kSchemaVersionMismatch, "report version " + doc.at("v").dump());
    EvaluationReport r;
    auto cam = [](const json &j) {
      return CameraErrorRow{j.at("camera").get<std::string>(), j.at("samples").get<std::size_t>(),
                            j.at("e_trans_mm").get<double>(), j.at("e_rot_deg").get<double>()};
    };
    auto obj = [](const json &j) {
      ObjectErrorRow o;
      o.name = j.at("name").get<std::string>();
      o.category_id = j.value("cat", 0);
      o.symmetric = j.value("symmetric", false);
      o.samples = j.at("samples").get<std::size_t>();
      o.auc = j.at("auc").get<double>();
      o.translation_mm = j.at("e_trans_mm").get<double>();
      if (!j.at("e_rot_deg").is_null()) o.rotation_deg = j.at("e_rot_deg").get<double>();
      return o;
    };
    r.method = doc.at("method").get<std::string>();
    r.frame_count = doc.at("frames").get<std::size_t>();
    r.keyframe_count = doc.at("keyframes").get<std::size_t>();
    r.no_keyframes = doc.at("no_keyframes").get<bool>();
    for (const auto &j : doc.at("cameras")) r.cameras.push_back(cam(j));
    if (!doc.at("camera_mean").is_null()) r.camera_mean = cam(doc.at("camera_mean"));
    for (const auto &j : doc.at("objects")) r.objects.push_back(obj(j));
    if (!doc.at("object_mean").is_null()) r.object_mean = obj(doc.at("object_mean"));
    for (const auto &j : doc.at("drift"))
      r.drift.push_back({j.at("t").get<double>(), j.at("raw").get<double>(), j.at("corrected").get<double>(),
                         j.at("keyframe").get<bool>(), j.value("hmd_keyframe", false)});
    for (const auto &j : doc.at("runtime"))
      r.runtime.push_back({j.at("stage").get<std::string>(), j.at("samples").get<std::size_t>(), j.at("mean_ms").get<double>()});
    return r;
  } catch (const Error &) {
    throw;
  } catch (const std::exception &e) {
    throw Error(ErrorCode::kParseError, std::string("report: ") + e.what());
  }
}

}  // namespace multicam
