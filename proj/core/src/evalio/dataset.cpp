#include "multicam/evalio/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "multicam/common/error.hpp"
#include "multicam/geometry/pose_json.hpp"

namespace multicam {

using nlohmann::json;

namespace {

bool same_pose(const Pose &a, const Pose &b) { return to_array(a) == to_array(b); }

void check_version(const json &doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "expected a JSON object");
  if (!doc.contains("v")) throw Error(ErrorCode::kParseError, "missing version field 'v'");
  const json &v = doc.at("v");
  bool ok = false;
  if (v.is_number_integer()) ok = v.get<long long>() == kDatasetSchemaVersion;
  else if (v.is_string()) ok = v.get<std::string>() == std::to_string(kDatasetSchemaVersion);
  else throw Error(ErrorCode::kParseError, "version field must be a number");
  if (!ok)
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "schema version " + v.dump() + ", reader supports " + std::to_string(kDatasetSchemaVersion));
}

template <class F>
auto parse_guard(F &&f) {
  try {
    return f();
  } catch (const Error &) {
    throw;
  } catch (const std::exception &e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

}  // namespace

bool FrameRecord::operator==(const FrameRecord &o) const {
  if (timestamp != o.timestamp || camera_id != o.camera_id || kind != o.kind) return false;
  if (slam_pose.has_value() != o.slam_pose.has_value()) return false;
  if (slam_pose && !same_pose(*slam_pose, *o.slam_pose)) return false;
  if (detections.size() != o.detections.size()) return false;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto &a = detections[i];
    const auto &b = o.detections[i];
    if (a.camera_id != b.camera_id || a.timestamp != b.timestamp || a.category_id != b.category_id ||
        a.instance_hint != b.instance_hint || !same_pose(a.pose, b.pose) ||
        a.confidence != b.confidence || a.dynamic != b.dynamic ||
        a.keypoints_2d.size() != b.keypoints_2d.size() || a.surface.size() != b.surface.size())
      return false;
    for (std::size_t k = 0; k < a.keypoints_2d.size(); ++k)
      if (a.keypoints_2d[k] != b.keypoints_2d[k]) return false;
    for (std::size_t k = 0; k < a.surface.size(); ++k)
      if (a.surface[k].model != b.surface[k].model || a.surface[k].camera != b.surface[k].camera) return false;
  }
  return true;
}

json record_to_json(const FrameRecord &r) {
  json dets = json::array();
  for (const auto &d : r.detections) {
    json jd = {{"cat", d.category_id}, {"pose", pose_to_json(d.pose)}, {"conf", d.confidence}};
    if (d.instance_hint) jd["inst"] = *d.instance_hint;
    if (d.dynamic) jd["dynamic"] = true;
    if (!d.keypoints_2d.empty()) {
      json k = json::array();
      for (const auto &p : d.keypoints_2d) k.push_back({p.x(), p.y()});
      jd["kps2d"] = std::move(k);
    }
    if (!d.surface.empty()) {
      // [model xyz, camera xyz]
      json k = json::array();
      for (const auto &p : d.surface)
        k.push_back({p.model.x(), p.model.y(), p.model.z(), p.camera.x(), p.camera.y(), p.camera.z()});
      jd["surf"] = std::move(k);
    }
    dets.push_back(std::move(jd));
  }
  json doc = {{"v", kDatasetSchemaVersion},
              {"t", r.timestamp},
              {"cam", r.camera_id},
              {"kind", to_string(r.kind)}};
  if (r.slam_pose) doc["slam_pose"] = pose_to_json(*r.slam_pose);
  doc["dets"] = std::move(dets);
  return doc;
}

FrameRecord record_from_json(const json &doc) {
  check_version(doc);
  return parse_guard([&] {
    FrameRecord r;
    r.timestamp = doc.at("t").get<double>();
    r.camera_id = doc.at("cam").get<std::string>();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind != "hmd" && kind != "static") throw Error(ErrorCode::kParseError, "kind must be 'hmd' or 'static'");
    r.kind = camera_kind_from_string(kind);
    if (doc.contains("slam_pose") && !doc.at("slam_pose").is_null())
      r.slam_pose = pose_from_json(doc.at("slam_pose"));
    if (r.kind == CameraKind::kHmd && !r.slam_pose)
      throw Error(ErrorCode::kParseError, "hmd record without slam_pose");
    for (const auto &jd : doc.at("dets")) {
      Detection d;
      d.camera_id = r.camera_id;
      d.timestamp = r.timestamp;
      d.category_id = jd.at("cat").get<int>();
      if (jd.contains("inst") && !jd.at("inst").is_null()) d.instance_hint = jd.at("inst").get<int>();
      d.pose = pose_from_json(jd.at("pose"));
      d.confidence = jd.at("conf").get<double>();
      d.dynamic = jd.value("dynamic", false);
      if (jd.contains("kps2d"))
        for (const auto &k : jd.at("kps2d")) d.keypoints_2d.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
      if (jd.contains("surf"))
        for (const auto &k : jd.at("surf")) {
          if (!k.is_array() || k.size() != 6) throw Error(ErrorCode::kParseError, "surface sample must have 6 numbers");
          d.surface.push_back({{k[0].get<double>(), k[1].get<double>(), k[2].get<double>()},
                               {k[3].get<double>(), k[4].get<double>(), k[5].get<double>()}});
        }
      r.detections.push_back(std::move(d));
    }
    return r;
  });
}

void read_json_lines(const std::filesystem::path &path,
                     const std::function<void(const json &, std::size_t)> &fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json doc;
      try {
        doc = json::parse(line);
      } catch (const json::parse_error &e) {
        throw Error(ErrorCode::kParseError, e.what());
      }
      fn(doc, n);
    } catch (const Error &e) {
      throw Error(e.code(), path.filename().string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
}

void save_dataset(const std::filesystem::path &path, std::span<const FrameRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  for (const auto &r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

std::vector<FrameRecord> load_dataset(const std::filesystem::path &path) {
  std::vector<FrameRecord> out;
  std::map<std::string, double> last_t;
  read_json_lines(path, [&](const json &doc, std::size_t) {
    FrameRecord r = record_from_json(doc);
    auto it = last_t.find(r.camera_id);
    if (it != last_t.end() && r.timestamp < it->second)
      throw Error(ErrorCode::kParseError, "timestamps decrease for camera '" + r.camera_id + "'");
    last_t[r.camera_id] = r.timestamp;
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<Frame> group_frames(std::span<const FrameRecord> records, double align_window) {
  std::vector<const FrameRecord *> sorted;
  for (const auto &r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto *a, const auto *b) { return a->timestamp < b->timestamp; });
  std::vector<Frame> frames;
  for (const auto *r : sorted) {
    bool join = !frames.empty() && r->timestamp - frames.back().timestamp <= align_window + 1e-12;
    if (join)
      for (const auto &c : frames.back().cameras)
        if (c.camera_id == r->camera_id) join = false;
    if (!join) {
      frames.emplace_back();
      frames.back().timestamp = r->timestamp;
    }
    CameraObservation obs;
    obs.camera_id = r->camera_id;
    obs.kind = r->kind;
    obs.timestamp = r->timestamp;
    obs.slam_pose = r->slam_pose;
    obs.detections = r->detections;
    frames.back().cameras.push_back(std::move(obs));
  }
  return frames;
}

const GroundTruthFrame *GroundTruth::at(double t, double tolerance) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), t - tolerance,
                             [](const GroundTruthFrame &f, double v) { return f.timestamp < v; });
  if (it != frames.end() && std::abs(it->timestamp - t) <= tolerance) return &*it;
  return nullptr;
}

void save_ground_truth(const std::filesystem::path &path, const GroundTruth &gt) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  for (const auto &f : gt.frames) {
    json cams = json::object();
    for (const auto &[id, p] : f.cameras) cams[id] = pose_to_json(p);
    json objs = json::array();
    for (const auto &o : f.objects)
      objs.push_back({{"inst", o.instance_id}, {"cat", o.category_id}, {"pose", pose_to_json(o.pose_in_world)}});
    json vis = json::object();
    for (const auto &[id, v] : f.visible) vis[id] = v;
    json doc = {{"v", kDatasetSchemaVersion}, {"t", f.timestamp}, {"hmd_id", gt.hmd_id},
                {"hmd", pose_to_json(f.hmd)}, {"slam", pose_to_json(f.slam)},
                {"cams", cams}, {"objs", objs}, {"vis", vis}};
    out << doc.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

GroundTruth load_ground_truth(const std::filesystem::path &path) {
  GroundTruth gt;
  read_json_lines(path, [&](const json &doc, std::size_t) {
    check_version(doc);
    parse_guard([&] {
      GroundTruthFrame f;
      f.timestamp = doc.at("t").get<double>();
      gt.hmd_id = doc.value("hmd_id", gt.hmd_id);
      f.hmd = pose_from_json(doc.at("hmd"));
      f.slam = pose_from_json(doc.at("slam"));
      for (const auto &[id, p] : doc.at("cams").items()) f.cameras[id] = pose_from_json(p);
      for (const auto &o : doc.at("objs"))
        f.objects.push_back({o.at("inst").get<int>(), o.at("cat").get<int>(), pose_from_json(o.at("pose"))});
      if (doc.contains("vis"))
        for (const auto &[id, v] : doc.at("vis").items()) f.visible[id] = v.get<std::vector<int>>();
      if (!gt.frames.empty() && f.timestamp < gt.frames.back().timestamp)
        throw Error(ErrorCode::kParseError, "ground truth timestamps decrease");
      gt.frames.push_back(std::move(f));
      return 0;
    });
  });
  return gt;
}

}  // namespace multicam
