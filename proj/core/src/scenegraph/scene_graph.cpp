#include "multicam/scenegraph/scene_graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

#include "multicam/common/error.hpp"
#include "multicam/geometry/metrics.hpp"

namespace multicam {

std::string_view to_string(CameraKind kind) {
  return kind == CameraKind::kHmd ? "hmd" : "static";
}

std::string_view to_string(PoseSource source) {
  switch (source) {
    case PoseSource::kSlam: return "slam";
    case PoseSource::kEstimated: return "estimated";
    case PoseSource::kUnknown: break;
  }
  return "unknown";
}

CameraKind camera_kind_from_string(std::string_view s) {
  if (s == "hmd") return CameraKind::kHmd;
  if (s == "static") return CameraKind::kStatic;
  throw Error(ErrorCode::kInvalidArgument, "unknown camera kind '" + std::string(s) + "'");
}

PoseSource pose_source_from_string(std::string_view s) {
  if (s == "slam") return PoseSource::kSlam;
  if (s == "estimated") return PoseSource::kEstimated;
  if (s == "unknown") return PoseSource::kUnknown;
  throw Error(ErrorCode::kInvalidArgument, "unknown pose source '" + std::string(s) + "'");
}

int VisibilityRelation::at(int instance_id, const std::string &camera_id) const {
  auto it = r_.find({instance_id, camera_id});
  return it == r_.end() ? 0 : it->second;
}

void VisibilityRelation::set(int instance_id, const std::string &camera_id, int value) {
  r_[{instance_id, camera_id}] = value ? 1 : 0;
}

bool AggregatedObject::multi_view() const {
  std::set<std::string> cams;
  for (const auto &m : members)
    if (!m.outlier) cams.insert(m.ref.camera_id);
  return cams.size() >= 2;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

}  // namespace

std::vector<AggregatedObject> aggregate_scene(
    const std::map<std::string, std::vector<Detection>> &detections,
    const std::map<std::string, Pose> &camera_world_poses,
    const std::map<std::string, CameraKind> &camera_kinds,
    std::span<const CameraPairHypothesis> hypotheses,
    const ModelRegistry &models, const AggregationOptions &options) {
  // Flat list of placeable detections, ordered by (camera, index).
  std::vector<DetectionRef> refs;
  std::vector<Pose> world;
  std::map<DetectionRef, std::size_t> slot;
  for (const auto &[cam, dets] : detections) {
    auto pose_it = camera_world_poses.find(cam);
    if (pose_it == camera_world_poses.end()) continue;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      slot[{cam, i}] = refs.size();
      refs.push_back({cam, i});
      world.push_back(pose_it->second * dets[i].pose);
    }
  }
  if (refs.empty()) return {};
  auto det = [&](std::size_t k) -> const Detection & {
    return detections.at(refs[k].camera_id)[refs[k].index];
  };

  // Best inlier distance each detection achieved in matching.
  std::vector<double> match_error(refs.size(), std::numeric_limits<double>::infinity());
  UnionFind uf(refs.size());
  std::vector<std::set<std::string>> cams_of(refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) cams_of[k].insert(refs[k].camera_id);

  auto unite = [&](std::size_t x, std::size_t y) {
    x = uf.find(x);
    y = uf.find(y);
    if (x == y) return;
    // Never merge two detections of the same camera into one object.
    for (const auto &c : cams_of[y])
      if (cams_of[x].count(c)) return;
    if (y < x) std::swap(x, y);
    uf.parent[y] = x;
    cams_of[x].insert(cams_of[y].begin(), cams_of[y].end());
  };

  for (const auto &h : hypotheses) {
    if (!camera_world_poses.count(h.camera_a) || !camera_world_poses.count(h.camera_b)) continue;
    auto link = [&](const PairMatch &m, bool inlier) {
      auto ia = slot.find({h.camera_a, m.index_a});
      auto ib = slot.find({h.camera_b, m.index_b});
      if (ia == slot.end() || ib == slot.end()) return;
      if (inlier) {
        match_error[ia->second] = std::min(match_error[ia->second], m.distance);
        match_error[ib->second] = std::min(match_error[ib->second], m.distance);
      }
      unite(ia->second, ib->second);
    };
    for (const auto &m : h.inliers) link(m, true);
    for (const auto &m : h.outliers) link(m, false);
  }

  auto kind_rank = [&](std::size_t k) {
    auto it = camera_kinds.find(refs[k].camera_id);
    return (it != camera_kinds.end() && it->second == CameraKind::kHmd) ? 0 : 1;
  };
  // Pose source order: lowest matching error, highest confidence, HMD
  // before statics, then camera id and detection index.
  auto better = [&](std::size_t x, std::size_t y) {
    if (match_error[x] != match_error[y]) return match_error[x] < match_error[y];
    if (det(x).confidence != det(y).confidence) return det(x).confidence > det(y).confidence;
    if (kind_rank(x) != kind_rank(y)) return kind_rank(x) < kind_rank(y);
    return refs[x] < refs[y];
  };

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < refs.size(); ++k) groups[uf.find(k)].push_back(k);

  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> singles;
  for (auto &[root, members] : groups) {
    if (members.size() >= 2)
      clusters.push_back(members);
    else
      singles.push_back(members.front());
  }
  std::vector<std::size_t> rep(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    rep[c] = *std::min_element(clusters[c].begin(), clusters[c].end(), better);

  // Unmatched detections join the nearest same-category cluster inside the
  // gate that has no detection from their camera yet.
  for (std::size_t k : singles) {
    const int cat = det(k).category_id;
    std::size_t best = clusters.size();
    double best_d = options.instance_gate;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (det(rep[c]).category_id != cat) continue;
      bool clash = false;
      for (std::size_t m : clusters[c])
        if (refs[m].camera_id == refs[k].camera_id) clash = true;
      if (clash) continue;
      const double d = (world[rep[c]].translation() - world[k].translation()).norm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == clusters.size()) {
      clusters.push_back({k});
      rep.push_back(k);
    } else {
      clusters[best].push_back(k);
    }
  }

  std::vector<AggregatedObject> out;
  out.reserve(clusters.size());
  for (auto &members : clusters) {
    const std::size_t src = *std::min_element(members.begin(), members.end(), better);
    const Detection &src_det = det(src);
    const ObjectModel &model = models.at(src_det.category_id);
    AggregatedObject obj;
    obj.category_id = src_det.category_id;
    obj.pose_in_world = world[src];
    obj.source = refs[src];
    std::sort(members.begin(), members.end(),
              [&](std::size_t x, std::size_t y) { return refs[x] < refs[y]; });
    for (std::size_t m : members) {
      AggregatedMember am;
      am.ref = refs[m];
      if (m == src) {
        am.object_in_camera = det(m).pose;
        am.distance = 0.0;
      } else {
        const SymmetricMatch sm = symmetric_distance(world[m], world[src], model);
        am.object_in_camera = det(m).pose * sm.symmetry;
        am.distance = sm.distance;
      }
      am.outlier = am.distance >= options.inlier_threshold;
      obj.dynamic = obj.dynamic || det(m).dynamic;
      obj.members.push_back(std::move(am));
    }
    out.push_back(std::move(obj));
  }
  std::sort(out.begin(), out.end(), [](const auto &l, const auto &r) {
    return l.source < r.source;
  });
  return out;
}

SceneGraph::SceneGraph(ModelRegistry models, SceneGraphConfig config)
    : models_(std::move(models)), config_(config) {
  if (!(config_.keyframe_threshold > 0) || !(config_.instance_gate > 0) ||
      !(config_.align_window >= 0) || !(config_.matching.inlier_threshold > 0) ||
      config_.matching.min_inliers < 1)
    throw Error(ErrorCode::kInvalidConfig, "scene graph thresholds must be positive");
}

void SceneGraph::record_pose(const std::string &camera_id, double t, const Pose &pose) {
  auto &hist = pose_history_[camera_id];
  if (!hist.empty() && hist.back().first == t)
    hist.back().second = pose;
  else
    hist.emplace_back(t, pose);
}

IngestResult SceneGraph::ingest_frame(const Frame &frame) {
  // Validate everything before touching state so a rejected frame leaves
  // the graph as it was.
  std::set<std::string> seen;
  for (const auto &obs : frame.cameras) {
    if (!seen.insert(obs.camera_id).second)
      throw Error(ErrorCode::kInvalidArgument, "camera '" + obs.camera_id + "' appears twice in frame");
    if (std::abs(obs.timestamp - frame.timestamp) > config_.align_window + 1e-12)
      throw Error(ErrorCode::kInvalidArgument,
                  "camera '" + obs.camera_id + "' timestamp outside the alignment window");
    if (obs.kind == CameraKind::kHmd && !obs.slam_pose)
      throw Error(ErrorCode::kInvalidArgument, "HMD observation without SLAM pose");
    auto existing = cameras_.find(obs.camera_id);
    if (existing != cameras_.end() && existing->second.kind != obs.kind)
      throw Error(ErrorCode::kInvalidArgument, "camera '" + obs.camera_id + "' changed kind");
    for (const auto &d : obs.detections) {
      validate(d);
      models_.at(d.category_id);
    }
  }
  std::set<std::string> anchored_at_start;
  for (const auto &obs : frame.cameras) {
    if (obs.kind == CameraKind::kHmd) {
      anchored_at_start.insert(obs.camera_id);
    } else {
      auto it = cameras_.find(obs.camera_id);
      if (it != cameras_.end() && it->second.pose_in_world) anchored_at_start.insert(obs.camera_id);
    }
  }
  if (anchored_at_start.empty())
    throw Error(ErrorCode::kNoAnchoredCamera, "no camera in frame has a world pose");

  const double t = frame.timestamp;
  current_time_ = t;
  IngestResult result;

  std::map<std::string, const CameraObservation *> obs_by_id;
  for (const auto &obs : frame.cameras) {
    obs_by_id[obs.camera_id] = &obs;
    auto &node = cameras_[obs.camera_id];
    node.camera_id = obs.camera_id;
    node.kind = obs.kind;
    if (obs.kind == CameraKind::kHmd) {
      node.pose_in_world = *obs.slam_pose;
      node.pose_timestamp = t;
      node.pose_source = PoseSource::kSlam;
      record_pose(obs.camera_id, t, *obs.slam_pose);
    }
  }

  // Matching: grow outwards from anchored cameras so every pair examined
  // involves a camera whose world pose is (or just became) known.
  const auto t_match = Clock::now();
  std::vector<CameraPairHypothesis> accepted;
  {
    std::set<std::pair<std::string, std::string>> tried;
    std::set<std::string> reached = anchored_at_start;
    std::deque<std::string> queue(anchored_at_start.begin(), anchored_at_start.end());
    while (!queue.empty()) {
      const std::string u = queue.front();
      queue.pop_front();
      for (const auto &[v, obs_v] : obs_by_id) {
        if (v == u) continue;
        auto key = u < v ? std::make_pair(u, v) : std::make_pair(v, u);
        if (!tried.insert(key).second) continue;
        const auto &da = obs_by_id.at(key.first)->detections;
        const auto &db = obs_by_id.at(key.second)->detections;
        auto h = match_cameras(da, db, models_, config_.matching);
        if (!h || !(h->score < config_.keyframe_threshold)) continue;
        accepted.push_back(std::move(*h));
        if (reached.insert(v).second) queue.push_back(v);
      }
    }
  }
  result.matching_ms = ms_since(t_match);

  const auto t_agg = Clock::now();
  // Anchoring spanning tree. HMDs are roots; statics that were anchored but
  // are not reachable from an HMD keep their pose and seed a second pass.
  std::vector<AnchorEdge> edges;
  std::set<std::string> placed;
  std::map<std::string, Pose> world_now;
  auto neighbours = [&](const std::string &u) {
    std::vector<std::pair<const CameraPairHypothesis *, std::string>> nb;
    for (const auto &h : accepted) {
      if (h.camera_a == u) nb.emplace_back(&h, h.camera_b);
      else if (h.camera_b == u) nb.emplace_back(&h, h.camera_a);
    }
    std::sort(nb.begin(), nb.end(), [](const auto &l, const auto &r) {
      if (l.first->score != r.first->score) return l.first->score < r.first->score;
      return l.second < r.second;
    });
    return nb;
  };
  auto grow = [&](std::vector<std::string> roots) {
    std::deque<std::string> queue;
    for (auto &r : roots) {
      placed.insert(r);
      world_now[r] = *cameras_.at(r).pose_in_world;
      queue.push_back(r);
    }
    while (!queue.empty()) {
      const std::string u = queue.front();
      queue.pop_front();
      for (const auto &[h, v] : neighbours(u)) {
        if (placed.count(v) || cameras_.at(v).kind == CameraKind::kHmd) continue;
        const Pose u_T_v = h->camera_a == u ? h->relative_pose : h->relative_pose.inverse();
        world_now[v] = world_now[u] * u_T_v;
        placed.insert(v);
        edges.push_back({u, v, u_T_v});
        queue.push_back(v);
      }
    }
  };
  std::vector<std::string> hmd_roots, static_roots;
  for (const auto &id : anchored_at_start)
    (cameras_.at(id).kind == CameraKind::kHmd ? hmd_roots : static_roots).push_back(id);
  grow(hmd_roots);
  for (const auto &id : static_roots)
    if (!placed.count(id)) grow({id});

  std::vector<std::string> updated;
  for (const auto &e : edges) {
    auto &node = cameras_.at(e.child);
    node.pose_in_world = world_now.at(e.child);
    node.pose_timestamp = t;
    node.pose_source = PoseSource::kEstimated;
    record_pose(e.child, t, *node.pose_in_world);
    updated.push_back(e.child);
  }
  std::sort(updated.begin(), updated.end());

  // Aggregation over every camera that now has a world pose.
  std::map<std::string, std::vector<Detection>> dets;
  std::map<std::string, CameraKind> kinds;
  for (const auto &[id, obs] : obs_by_id) {
    if (!world_now.count(id)) continue;
    dets[id] = obs->detections;
    kinds[id] = obs->kind;
  }
  AggregationOptions agg_opts;
  agg_opts.inlier_threshold = config_.matching.inlier_threshold;
  agg_opts.instance_gate = config_.instance_gate;
  const auto clusters = aggregate_scene(dets, world_now, kinds, accepted, models_, agg_opts);

  // Cross-frame identity by nearest-neighbour gating on world position.
  struct Cand {
    double d;
    std::size_t cluster, node;
  };
  std::vector<Cand> cands;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t n = 0; n < objects_.size(); ++n) {
      if (objects_[n].category_id != clusters[c].category_id) continue;
      const double d = (objects_[n].pose_in_world.translation() -
                        clusters[c].pose_in_world.translation()).norm();
      if (d < config_.instance_gate) cands.push_back({d, c, n});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand &l, const Cand &r) {
    if (l.d != r.d) return l.d < r.d;
    if (l.cluster != r.cluster) return l.cluster < r.cluster;
    return l.node < r.node;
  });
  std::vector<std::size_t> node_of(clusters.size(), objects_.size() + clusters.size());
  std::vector<bool> node_taken(objects_.size(), false);
  for (const auto &c : cands) {
    if (node_of[c.cluster] < objects_.size() || node_taken[c.node]) continue;
    node_of[c.cluster] = c.node;
    node_taken[c.node] = true;
  }

  visibility_.clear();
  frame_observations_.clear();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto &cl = clusters[c];
    if (node_of[c] >= objects_.size()) {
      ObjectNode node;
      node.instance_id = next_instance_id_++;
      node.category_id = cl.category_id;
      objects_.push_back(node);
      node_of[c] = objects_.size() - 1;
    }
    ObjectNode &node = objects_[node_of[c]];
    node.pose_in_world = cl.pose_in_world;
    node.last_observed = t;
    node.source_camera = cl.source.camera_id;
    node.outlier_flags.clear();
    for (const auto &m : cl.members) {
      node.outlier_flags[m.ref.camera_id] = m.outlier;
      visibility_.set(node.instance_id, m.ref.camera_id, m.outlier ? 0 : 1);
      FrameObservation fo{node.instance_id, m.ref.camera_id, m.object_in_camera, !m.outlier, {}};
      const Detection &det = dets.at(m.ref.camera_id)[m.ref.index];
      if (!det.surface.empty()) {
        // object_in_camera = det.pose * S, so model points move by S^-1.
        const Pose s_inv = m.object_in_camera.inverse() * det.pose;
        fo.surface.reserve(det.surface.size());
        for (const auto &smp : det.surface) fo.surface.push_back({s_inv * smp.model, smp.camera});
      }
      frame_observations_.push_back(std::move(fo));
    }
  }
  result.aggregation_ms = ms_since(t_agg);

  last_keyframe_ = !accepted.empty();
  last_updated_ = updated;
  last_matching_error_ = 0.0;
  if (last_keyframe_) {
    double sum = 0.0;
    for (const auto &h : accepted) sum += h.score;
    last_matching_error_ = sum / static_cast<double>(accepted.size());
    Keyframe kf;
    kf.timestamp = t;
    for (const auto &[id, obs] : obs_by_id) kf.detections[id] = obs->detections;
    kf.hypotheses = accepted;
    kf.anchor_edges = edges;
    kf.updated_cameras = updated;
    kf.matching_error = last_matching_error_;
    keyframes_.push_back(std::move(kf));
  }
  result.keyframe = last_keyframe_;
  result.updated_cameras = std::move(updated);
  return result;
}

std::optional<Pose> SceneGraph::world_pose_of(const std::string &camera_id, double t) const {
  auto it = pose_history_.find(camera_id);
  if (it == pose_history_.end()) return std::nullopt;
  const auto &hist = it->second;
  auto pos = std::upper_bound(hist.begin(), hist.end(), t,
                              [](double v, const auto &e) { return v < e.first; });
  if (pos == hist.begin()) return std::nullopt;
  return std::prev(pos)->second;
}

void SceneGraph::apply_refinement(const std::map<std::string, Pose> &camera_poses,
                                  const std::map<int, Pose> &object_poses) {
  for (const auto &[id, pose] : camera_poses) {
    auto it = cameras_.find(id);
    if (it == cameras_.end() || !it->second.pose_in_world)
      throw Error(ErrorCode::kUnanchoredCamera, "refinement for unknown camera '" + id + "'");
    if (it->second.kind == CameraKind::kHmd) continue;  // gauge
    it->second.pose_in_world = pose;
    it->second.pose_timestamp = current_time_;
    it->second.pose_source = PoseSource::kEstimated;
    record_pose(id, current_time_, pose);
  }
  for (const auto &[inst, pose] : object_poses) {
    auto it = std::find_if(objects_.begin(), objects_.end(),
                           [&](const ObjectNode &o) { return o.instance_id == inst; });
    if (it == objects_.end())
      throw Error(ErrorCode::kInvalidArgument, "refinement for unknown object " + std::to_string(inst));
    it->pose_in_world = pose;
  }
}

const ObjectNode *SceneGraph::find_object(int instance_id) const {
  for (const auto &o : objects_)
    if (o.instance_id == instance_id) return &o;
  return nullptr;
}

GraphSnapshot SceneGraph::snapshot() const {
  GraphSnapshot s;
  s.timestamp = current_time_;
  s.keyframe = last_keyframe_;
  s.matching_error = last_matching_error_;
  for (const auto &[id, node] : cameras_) s.cameras.push_back(node);
  s.objects = objects_;
  for (const auto &[key, r] : visibility_.entries()) s.edges.push_back({key.first, key.second, r});
  s.updated_cameras = last_updated_;
  if (last_keyframe_ && !keyframes_.empty()) {
    auto is_hmd = [&](const std::string &id) {
      auto it = cameras_.find(id);
      return it != cameras_.end() && it->second.kind == CameraKind::kHmd;
    };
    for (const auto &h : keyframes_.back().hypotheses)
      s.hmd_keyframe = s.hmd_keyframe || is_hmd(h.camera_a) || is_hmd(h.camera_b);
  }
  return s;
}

}  // namespace multicam
