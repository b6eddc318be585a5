#include "multicam/scenegraph/snapshot_json.hpp"

#include "multicam/common/error.hpp"
#include "multicam/geometry/pose_json.hpp"

namespace multicam {

using nlohmann::json;

json snapshot_to_json(const GraphSnapshot &s) {
  json cams = json::array();
  for (const auto &c : s.cameras) {
    json jc = {{"id", c.camera_id},
               {"kind", to_string(c.kind)},
               {"pose_t", c.pose_timestamp},
               {"source", to_string(c.pose_source)}};
    jc["pose"] = c.pose_in_world ? pose_to_json(*c.pose_in_world) : json(nullptr);
    cams.push_back(std::move(jc));
  }
  json objs = json::array();
  for (const auto &o : s.objects) {
    json flags = json::object();
    for (const auto &[cam, f] : o.outlier_flags) flags[cam] = f;
    objs.push_back({{"inst", o.instance_id},
                    {"cat", o.category_id},
                    {"pose", pose_to_json(o.pose_in_world)},
                    {"last_observed", o.last_observed},
                    {"source_cam", o.source_camera},
                    {"outliers", flags}});
  }
  json edges = json::array();
  for (const auto &e : s.edges) edges.push_back({{"inst", e.instance_id}, {"cam", e.camera_id}, {"r", e.r}});
  return {{"v", kSnapshotSchemaVersion},
          {"t", s.timestamp},
          {"keyframe", s.keyframe},
          {"hmd_keyframe", s.hmd_keyframe},
          {"matching_error", s.matching_error},
          {"cameras", cams},
          {"objects", objs},
          {"edges", edges},
          {"updated", s.updated_cameras},
          {"timing_ms",
           {{"ingest", s.timings.ingest_ms},
            {"matching", s.timings.matching_ms},
            {"aggregation", s.timings.aggregation_ms},
            {"ba", s.timings.ba_ms}}}};
}

GraphSnapshot snapshot_from_json(const json &doc) {
  if (!doc.is_object() || !doc.contains("v"))
    throw Error(ErrorCode::kParseError, "snapshot without version field");
  if (doc.at("v") != kSnapshotSchemaVersion)
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "snapshot version " + doc.at("v").dump() + ", reader supports " +
                    std::to_string(kSnapshotSchemaVersion));
  try {
    GraphSnapshot s;
    s.timestamp = doc.at("t").get<double>();
    s.keyframe = doc.at("keyframe").get<bool>();
    s.hmd_keyframe = doc.value("hmd_keyframe", false);
    s.matching_error = doc.value("matching_error", 0.0);
    for (const auto &jc : doc.at("cameras")) {
      CameraNode c;
      c.camera_id = jc.at("id").get<std::string>();
      c.kind = camera_kind_from_string(jc.at("kind").get<std::string>());
      if (!jc.at("pose").is_null()) c.pose_in_world = pose_from_json(jc.at("pose"));
      c.pose_timestamp = jc.at("pose_t").get<double>();
      c.pose_source = pose_source_from_string(jc.at("source").get<std::string>());
      s.cameras.push_back(std::move(c));
    }
    for (const auto &jo : doc.at("objects")) {
      ObjectNode o;
      o.instance_id = jo.at("inst").get<int>();
      o.category_id = jo.at("cat").get<int>();
      o.pose_in_world = pose_from_json(jo.at("pose"));
      o.last_observed = jo.at("last_observed").get<double>();
      o.source_camera = jo.value("source_cam", std::string{});
      for (const auto &[cam, f] : jo.at("outliers").items()) o.outlier_flags[cam] = f.get<bool>();
      s.objects.push_back(std::move(o));
    }
    for (const auto &je : doc.at("edges"))
      s.edges.push_back({je.at("inst").get<int>(), je.at("cam").get<std::string>(), je.at("r").get<int>()});
    s.updated_cameras = doc.value("updated", std::vector<std::string>{});
    if (doc.contains("timing_ms")) {
      const auto &tm = doc.at("timing_ms");
      s.timings.ingest_ms = tm.value("ingest", 0.0);
      s.timings.matching_ms = tm.value("matching", 0.0);
      s.timings.aggregation_ms = tm.value("aggregation", 0.0);
      s.timings.ba_ms = tm.value("ba", 0.0);
    }
    return s;
  } catch (const Error &) {
    throw;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kParseError, std::string("snapshot: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw Error(ErrorCode::kParseError, std::string("snapshot: ") + e.what());
  }
}

}  // namespace multicam
