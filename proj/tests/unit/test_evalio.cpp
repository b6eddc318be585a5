#include <filesystem>
#include <fstream>
#include <regex>

#include <gtest/gtest.h>

#include "multicam/common/error.hpp"
#include "multicam/evalio/dataset.hpp"
#include "multicam/evalio/evaluation.hpp"
#include "multicam/evalio/report.hpp"
#include "multicam/pipeline/estimator.hpp"
#include "multicam/sim/simulator.hpp"

namespace mc = multicam;
namespace fs = std::filesystem;
using Eigen::Vector3d;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("multicam_evalio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct PipelineRun {
  mc::SimDataset ds;
  std::vector<mc::GraphSnapshot> snaps;
};

PipelineRun run_pipeline(mc::SceneConfig cfg, bool ba = false) {
  PipelineRun r{mc::generate(cfg), {}};
  mc::EstimatorConfig ec;
  ec.ba_enabled = ba;
  mc::Estimator est(r.ds.models, ec);
  const auto frames = mc::group_frames(r.ds.records, ec.graph.align_window);
  r.snaps = est.run(frames);
  return r;
}

mc::SceneConfig short_scene(double duration = 4.0, mc::NoiseSpec noise = {}, mc::DriftSpec drift = {}) {
  auto c = mc::default_scene(mc::DistancePreset::kNear, noise, drift, 3);
  c.duration = duration;
  return c;
}

std::size_t count(const std::string &s, const std::string &needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Dataset, RoundTripIsBitExact) {
  auto cfg = short_scene(1.0, mc::default_noise(), {0.002, 0.001});
  cfg.emit_keypoints = true;
  cfg.noise.keypoint_noise_px = 0.7;
  cfg.objects[0].placements[0].velocity = Vector3d(0.01, 0, 0);
  const auto ds = mc::generate(cfg);
  const fs::path p = scratch("roundtrip") / "d.jsonl";
  mc::save_dataset(p, ds.records);
  const auto back = mc::load_dataset(p);
  ASSERT_EQ(back.size(), ds.records.size());
  bool dyn = false, kps = false, surf = false;
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_TRUE(back[i] == ds.records[i]) << i;
    for (const auto &d : back[i].detections) {
      dyn = dyn || d.dynamic;
      kps = kps || !d.keypoints_2d.empty();
      surf = surf || !d.surface.empty();
    }
  }
  EXPECT_TRUE(dyn && kps && surf);
}

TEST(Dataset, PoseEncoding) {
  mc::FrameRecord r;
  r.timestamp = 0.5;
  r.camera_id = "hmd";
  r.kind = mc::CameraKind::kHmd;
  r.slam_pose = mc::Pose(Eigen::Quaterniond(0.5, 0.5, 0.5, 0.5), Vector3d(1, 2, 3));
  const auto j = mc::record_to_json(r);
  EXPECT_EQ(j.at("v"), 1);
  EXPECT_EQ(j.at("kind"), "hmd");
  EXPECT_EQ(j.at("cam"), "hmd");
  EXPECT_EQ(j.at("slam_pose"), nlohmann::json({0.5, 0.5, 0.5, 0.5, 1.0, 2.0, 3.0}));
  EXPECT_TRUE(mc::record_from_json(j) == r);
}

TEST(Dataset, TruncatedLineNamesLine) {
  const auto ds = mc::generate(short_scene(0.2));
  const fs::path p = scratch("trunc") / "d.jsonl";
  mc::save_dataset(p, ds.records);
  std::vector<std::string> lines;
  {
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  ASSERT_GE(lines.size(), 3u);
  lines[2] = lines[2].substr(0, lines[2].size() / 2);
  {
    std::ofstream out(p);
    for (const auto &l : lines) out << l << '\n';
  }
  try {
    mc::load_dataset(p);
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Dataset, SchemaVersionMismatch) {
  mc::FrameRecord r;
  r.camera_id = "C1";
  auto j = mc::record_to_json(r);
  j["v"] = 2;
  try {
    mc::record_from_json(j);
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kSchemaVersionMismatch);
  }
}

TEST(Dataset, MalformedFieldsRejected) {
  mc::FrameRecord r;
  r.camera_id = "C1";
  mc::Detection d;
  d.camera_id = "C1";
  d.category_id = 2;
  d.surface.push_back({Vector3d(1, 2, 3), Vector3d(4, 5, 6)});
  r.detections.push_back(d);
  const auto good = mc::record_to_json(r);
  EXPECT_TRUE(mc::record_from_json(good) == r);
  for (auto mutate : std::vector<std::function<void(nlohmann::json &)>>{
           [](auto &j) { j["dets"][0]["pose"] = {1, 0, 0}; },
           [](auto &j) { j["dets"][0]["surf"][0] = {1, 2, 3}; },
           [](auto &j) { j["kind"] = "drone"; },
           [](auto &j) { j.erase("t"); },
       }) {
    auto j = good;
    mutate(j);
    try {
      mc::record_from_json(j);
      ADD_FAILURE() << j.dump();
    } catch (const mc::Error &e) {
      EXPECT_EQ(e.code(), mc::ErrorCode::kParseError);
    }
  }
}

TEST(Dataset, MissingFileIsIoError) {
  try {
    mc::load_dataset("/nonexistent/d.jsonl");
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kIoError);
  }
}

TEST(Dataset, GroupFrames) {
  auto rec = [](double t, const char *cam) {
    mc::FrameRecord r;
    r.timestamp = t;
    r.camera_id = cam;
    return r;
  };
  const std::vector<mc::FrameRecord> rs{rec(0.0, "hmd"), rec(0.01, "C1"), rec(0.02, "C1"), rec(0.05, "C2"),
                                        rec(0.1, "hmd")};
  const auto f = mc::group_frames(rs, 0.033);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].cameras.size(), 2u);  // second C1 record starts a new frame
  ASSERT_EQ(f[1].cameras.size(), 2u);  // C2 is within the window of that frame
  EXPECT_EQ(f[1].timestamp, 0.02);
  EXPECT_EQ(f[1].cameras[1].camera_id, "C2");
  EXPECT_EQ(f[2].timestamp, 0.1);
}

TEST(GroundTruth, RoundTrip) {
  const auto ds = mc::generate(short_scene(0.5, {}, {0.01, 0.01}));
  const fs::path p = scratch("gt") / "gt.jsonl";
  mc::save_ground_truth(p, ds.ground_truth);
  const auto back = mc::load_ground_truth(p);
  ASSERT_EQ(back.frames.size(), ds.ground_truth.frames.size());
  EXPECT_EQ(back.hmd_id, ds.ground_truth.hmd_id);
  for (std::size_t i = 0; i < back.frames.size(); ++i) {
    const auto &a = back.frames[i], &b = ds.ground_truth.frames[i];
    EXPECT_EQ(a.timestamp, b.timestamp);
    EXPECT_EQ(mc::to_array(a.slam), mc::to_array(b.slam));
    EXPECT_EQ(mc::to_array(a.hmd), mc::to_array(b.hmd));
    EXPECT_EQ(a.visible, b.visible);
    ASSERT_EQ(a.objects.size(), b.objects.size());
    for (std::size_t k = 0; k < a.objects.size(); ++k)
      EXPECT_EQ(mc::to_array(a.objects[k].pose_in_world), mc::to_array(b.objects[k].pose_in_world));
  }
  EXPECT_NE(back.at(ds.ground_truth.frames[3].timestamp), nullptr);
  EXPECT_EQ(back.at(1e6), nullptr);
}

TEST(Evaluate, ExactRunHasZeroError) {
  const PipelineRun r = run_pipeline(short_scene());
  const auto rep = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  ASSERT_GT(rep.keyframe_count, 0u);
  EXPECT_FALSE(rep.no_keyframes);
  ASSERT_TRUE(rep.camera_mean.has_value());
  EXPECT_GT(rep.camera_mean->samples, 0u);
  EXPECT_LT(rep.camera_mean->translation_mm, 1e-6);
  EXPECT_LT(rep.camera_mean->rotation_deg, 1e-6);
  ASSERT_TRUE(rep.object_mean.has_value());
  EXPECT_NEAR(rep.object_mean->auc, 1.0, 1e-9);
  for (const auto &o : rep.objects) {
    EXPECT_GT(o.samples, 0u);
    EXPECT_EQ(o.symmetric, !o.rotation_deg.has_value());
    EXPECT_LT(o.translation_mm, 1e-6);
    EXPECT_NEAR(o.auc, 1.0, 1e-9) << o.name;
  }
  for (const auto &d : rep.drift) EXPECT_LT(d.raw, 1e-12);
}

TEST(Evaluate, CameraOffsetFixture) {
  PipelineRun r = run_pipeline(short_scene());
  const Vector3d off = Vector3d(1, 2, 2).normalized() * 0.02122;
  for (auto &s : r.snaps)
    for (auto &c : s.cameras)
      if (c.camera_id == "C1" && c.pose_in_world)
        c.pose_in_world = mc::Pose(c.pose_in_world->rotation(), c.pose_in_world->translation() + off);
  const auto rep = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  bool found = false;
  for (const auto &row : rep.cameras)
    if (row.camera_id == "C1") {
      found = true;
      EXPECT_NEAR(row.translation_mm, 21.22, 1e-6);
    } else {
      EXPECT_LT(row.translation_mm, 1e-6);
    }
  EXPECT_TRUE(found);
}

TEST(Evaluate, NoKeyframesFlagged) {
  PipelineRun r = run_pipeline(short_scene(0.5));  // the HMD looks away for the first second
  ASSERT_FALSE(r.snaps.empty());
  const auto rep = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  EXPECT_TRUE(rep.no_keyframes);
  EXPECT_TRUE(rep.cameras.empty());
  EXPECT_FALSE(rep.camera_mean.has_value());
  const std::string csv = mc::cameras_csv(std::span(&rep, 1));
  EXPECT_EQ(count(csv, "\n"), 1u);
}

TEST(Evaluate, DriftZeroAtHmdKeyframesAndGrowsBetween) {
  const PipelineRun r = run_pipeline(short_scene(10.0, {}, {0.005, 0.002}));
  const auto rep = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  std::size_t resets = 0, positive = 0;
  bool after_reset = false;
  for (const auto &d : rep.drift) {
    if (d.hmd_keyframe) {
      ++resets;
      after_reset = true;
      EXPECT_EQ(d.corrected, 0.0);
    } else if (after_reset) {
      positive += d.corrected > 0.0;
    }
    EXPECT_GE(d.raw, 0.0);
  }
  EXPECT_GT(resets, 0u);
  EXPECT_GT(positive, 0u);
  EXPECT_GT(rep.drift.back().raw, 0.0);
}

TEST(Evaluate, RelativeDriftInvariantToCommonMotion) {
  const mc::Pose a(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Vector3d::UnitZ())), Vector3d(1, 0, 0));
  const mc::Pose b(Eigen::Quaterniond(Eigen::AngleAxisd(0.5, Vector3d::UnitX())), Vector3d(1, 1, 0));
  EXPECT_LT(mc::relative_drift(b, a, b, a), 1e-15);
  EXPECT_NEAR(mc::relative_drift(mc::Pose::from_translation({0.01, 0, 0}) * b, a, b, a), 0.01, 1e-12);
}

TEST(Evaluate, PureFunction) {
  const PipelineRun r = run_pipeline(short_scene(3.0, mc::default_noise()));
  const auto a = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  const auto b = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  const std::vector<mc::EvaluationReport> ra{a}, rb{b};
  EXPECT_EQ(mc::cameras_csv(ra), mc::cameras_csv(rb));
  EXPECT_EQ(mc::objects_csv(ra), mc::objects_csv(rb));
  EXPECT_EQ(mc::drift_csv(ra), mc::drift_csv(rb));
  EXPECT_EQ(mc::report_to_json(a), mc::report_to_json(b));
  EXPECT_EQ(mc::report_to_json(mc::report_from_json(mc::report_to_json(a))), mc::report_to_json(a));
}

TEST(Evaluate, MissingGroundTruthFrame) {
  PipelineRun r = run_pipeline(short_scene(1.0));
  r.snaps.front().timestamp += 0.5e-2;
  EXPECT_THROW(mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models), mc::Error);
}

TEST(Report, Tables) {
  const PipelineRun r = run_pipeline(short_scene(3.0, mc::default_noise()));
  std::vector<mc::EvaluationReport> reps{mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models)};
  reps[0].method = "ba";
  reps.push_back(reps[0]);
  reps[1].method = "no-ba";
  const std::string cams = mc::cameras_csv(reps), objs = mc::objects_csv(reps), drift = mc::drift_csv(reps);
  EXPECT_EQ(cams.substr(0, cams.find('\n')).find("method,"), 0u);
  EXPECT_EQ(drift.substr(0, drift.find('\n')), "method,t,raw_mm,corrected_mm,keyframe,hmd_keyframe");
  EXPECT_EQ(count(drift, "\n"), 1 + 2 * reps[0].drift.size());
  EXPECT_EQ(count(objs, "\nba,"), count(objs, "\nno-ba,"));
  // Markdown object table: method, ADD(S)AUC, e_trans, e_rot.
  const std::string md = mc::report_markdown(reps);
  std::smatch m;
  ASSERT_TRUE(std::regex_search(md, m, std::regex(R"(\n(\|[^\n]*AUC[^\n]*\|)\n)")));
  const std::string header = m[1].str();
  EXPECT_EQ(std::count(header.begin(), header.end(), '|'), 5) << header;
  EXPECT_EQ(mc::report_markdown(reps).find("Runtime"), std::string::npos);
  EXPECT_NE(mc::report_markdown(reps, {true}).find("untime"), std::string::npos);
}

TEST(Report, DriftSvg) {
  const PipelineRun r = run_pipeline(short_scene(6.0, {}, {0.005, 0.002}));
  const auto rep = mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models);
  const std::string svg = mc::drift_svg(rep);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_NE(svg.find("time"), std::string::npos);
  EXPECT_NE(svg.find("mm"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, EmitFiles) {
  const PipelineRun r = run_pipeline(short_scene(0.5));
  const std::vector<mc::EvaluationReport> reps{mc::evaluate_run(r.snaps, r.ds.ground_truth, r.ds.models)};
  const fs::path dir = scratch("emit") / "nested";
  for (auto fmt : {mc::ReportFormat::kCsv, mc::ReportFormat::kMarkdown, mc::ReportFormat::kSvg}) {
    const auto files = mc::emit_report(reps, fmt, dir);
    ASSERT_FALSE(files.empty());
    for (const auto &f : files) EXPECT_TRUE(fs::exists(f)) << f;
  }
  EXPECT_EQ(mc::report_format_from_string("md"), mc::ReportFormat::kMarkdown);
  EXPECT_THROW(mc::report_format_from_string("pdf"), mc::Error);
  const fs::path blocker = scratch("emit_block") / "file";
  std::ofstream(blocker) << "x";
  try {
    mc::emit_report(reps, mc::ReportFormat::kCsv, blocker / "sub");
    FAIL();
  } catch (const mc::Error &e) {
    EXPECT_EQ(e.code(), mc::ErrorCode::kIoError);
  }
}
