#include "multicam/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <ostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "multicam/common/error.hpp"
#include "multicam/evalio/dataset.hpp"
#include "multicam/evalio/evaluation.hpp"
#include "multicam/evalio/report.hpp"
#include "multicam/pipeline/estimator.hpp"
#include "multicam/scenegraph/snapshot_json.hpp"
#include "multicam/sim/simulator.hpp"

namespace multicam::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const RunConfig &c) {
  auto need = [](bool ok, const std::string &msg) {
    if (!ok) throw Error(ErrorCode::kInvalidConfig, msg);
  };
  need(c.inlier_thresh > 0, "--inlier-thresh must be > 0");
  need(c.keyframe_thresh > 0, "keyframe threshold must be > 0");
  need(c.huber_delta > 0, "Huber delta must be > 0");
  need(c.min_inliers >= 1, "--min-inliers must be >= 1");
  need(c.ba_iters >= 0, "--ba-iters must be >= 0");
  need(c.ba_tol > 0, "--ba-tol must be > 0");
  need(c.align_window > 0, "--align-window must be > 0");
  need(c.depth_noise.value_or(0.0) >= 0, "depth noise must be >= 0");
  need(c.drift_trans >= 0 && c.drift_rot >= 0, "drift must be >= 0");
  need(c.duration > 0, "duration must be > 0");
  need(c.preset == "near" || c.preset == "far", "--preset must be near or far");
  need(c.noise == "default" || c.noise == "zero", "--noise must be default or zero");
  need(c.format == "csv" || c.format == "md" || c.format == "svg", "--format must be csv, md or svg");
}

json to_json(const RunConfig &c) {
  return {{"inputs", c.inputs},           {"output", c.output},
          {"gt", c.gt},                   {"models", c.models},
          {"inlier_thresh", c.inlier_thresh}, {"keyframe_thresh", c.keyframe_thresh},
          {"huber_delta", c.huber_delta}, {"min_inliers", c.min_inliers},
          {"ba", c.ba},                   {"ba_iters", c.ba_iters},
          {"ba_tol", c.ba_tol},           {"align_window", c.align_window},
          {"depth_noise", c.depth_noise ? json(*c.depth_noise) : json(nullptr)}, {"seed", c.seed},
          {"preset", c.preset},           {"noise", c.noise},
          {"drift_trans", c.drift_trans}, {"drift_rot", c.drift_rot},
          {"duration", c.duration},       {"format", c.format},
          {"with_timing", c.with_timing}, {"method", c.method}};
}

RunConfig run_config_from_json(const json &d) {
  try {
    RunConfig c;
    c.inputs = d.value("inputs", c.inputs);
    c.output = d.value("output", c.output);
    c.gt = d.value("gt", c.gt);
    c.models = d.value("models", c.models);
    c.inlier_thresh = d.value("inlier_thresh", c.inlier_thresh);
    c.keyframe_thresh = d.value("keyframe_thresh", c.keyframe_thresh);
    c.huber_delta = d.value("huber_delta", c.huber_delta);
    c.min_inliers = d.value("min_inliers", c.min_inliers);
    c.ba = d.value("ba", c.ba);
    c.ba_iters = d.value("ba_iters", c.ba_iters);
    c.ba_tol = d.value("ba_tol", c.ba_tol);
    c.align_window = d.value("align_window", c.align_window);
    if (d.contains("depth_noise") && !d.at("depth_noise").is_null())
      c.depth_noise = d.at("depth_noise").get<double>();
    c.seed = d.value("seed", c.seed);
    c.preset = d.value("preset", c.preset);
    c.noise = d.value("noise", c.noise);
    c.drift_trans = d.value("drift_trans", c.drift_trans);
    c.drift_rot = d.value("drift_rot", c.drift_rot);
    c.duration = d.value("duration", c.duration);
    c.format = d.value("format", c.format);
    c.with_timing = d.value("with_timing", c.with_timing);
    c.method = d.value("method", c.method);
    return c;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("run config: ") + e.what());
  }
}

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("multicam");
    l->set_pattern("[%l] %v");
    return l;
  }();
  const char *env = std::getenv("MULTICAM_LOG");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  return log;
}

json read_json(const fs::path &p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::kParseError, p.filename().string() + ": " + e.what());
  }
}

void write_text(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + p.string() + "'");
  out << text;
}

void prepare_output(const RunConfig &c) {
  if (c.output.empty()) throw Error(ErrorCode::kInvalidConfig, "--output is required");
  std::error_code ec;
  fs::create_directories(c.output, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + c.output + "': " + ec.message());
}

void echo_config(const RunConfig &c, const std::string &command) {
  json j = to_json(c);
  j["command"] = command;
  write_text(fs::path(c.output) / "run_config.json", j.dump(2) + "\n");
}

const std::string &single_input(const RunConfig &c) {
  if (c.inputs.size() != 1) throw Error(ErrorCode::kInvalidConfig, "exactly one --input is required");
  return c.inputs.front();
}

// A directory argument resolves to `dir/name`.
fs::path resolve(const std::string &arg, const char *name) {
  fs::path p(arg);
  return fs::is_directory(p) ? p / name : p;
}

SceneConfig scene_from(const RunConfig &c) {
  NoiseSpec noise = c.noise == "zero" ? NoiseSpec{} : default_noise();
  DriftSpec drift{c.drift_trans, c.drift_rot};
  SceneConfig s = default_scene(c.preset == "far" ? DistancePreset::kFar : DistancePreset::kNear, noise, drift, c.seed);
  s.duration = c.duration;
  if (c.depth_noise) s.noise.depth_noise = *c.depth_noise;
  return s;
}

EstimatorConfig estimator_from(const RunConfig &c) {
  EstimatorConfig e;
  e.graph.matching.inlier_threshold = c.inlier_thresh;
  e.graph.matching.min_inliers = c.min_inliers;
  e.graph.keyframe_threshold = c.keyframe_thresh;
  e.graph.align_window = c.align_window;
  e.ba_enabled = c.ba;
  e.ba.max_iterations = c.ba_iters;
  e.ba.tolerance = c.ba_tol;
  e.ba.huber_delta = c.huber_delta;
  e.observations.depth_noise = c.depth_noise.value_or(0.0);
  e.observations.seed = c.seed;
  return e;
}

struct StageError {
  std::string stage;
};

int cmd_simulate(RunConfig c, std::ostream &out, const fs::path &scene_file) {
  validate(c);
  prepare_output(c);
  SceneConfig scene = scene_file.empty() ? scene_from(c) : scene_config_from_json(read_json(scene_file));
  logger()->info("simulating {} s at {} fps, seed {}", scene.duration, scene.frame_rate, scene.seed);
  const SimDataset ds = generate(scene);
  const fs::path dir(c.output);
  save_dataset(dir / "dataset.jsonl", ds.records);
  save_ground_truth(dir / "ground_truth.jsonl", ds.ground_truth);
  save_models(dir / "models.json", ds.models);
  write_text(dir / "scene.json", scene_config_to_json(scene).dump(2) + "\n");
  echo_config(c, "simulate");
  out << "simulate: " << ds.ground_truth.frames.size() << " frames, " << ds.records.size() << " records -> "
      << c.output << "\n";
  return kExitOk;
}

int cmd_estimate(RunConfig c, std::ostream &out) {
  validate(c);
  const std::string &in = single_input(c);
  const fs::path dataset = resolve(in, "dataset.jsonl");
  const fs::path models_path =
      c.models.empty() ? (fs::is_directory(in) ? fs::path(in) / "models.json" : fs::path(in).parent_path() / "models.json")
                       : resolve(c.models, "models.json");
  prepare_output(c);
  const auto records = load_dataset(dataset);
  const ModelRegistry models = load_models(models_path);
  const auto frames = group_frames(records, c.align_window);
  logger()->info("estimating over {} frames (BA {})", frames.size(), c.ba ? "on" : "off");

  Estimator est(models, estimator_from(c));
  std::ofstream snaps(fs::path(c.output) / "snapshots.jsonl", std::ios::binary);
  if (!snaps) throw Error(ErrorCode::kIoError, "cannot write snapshots");
  std::ostringstream trace;
  trace << "t,iter,energy,lambda,max_step_norm\n" << std::setprecision(17);
  std::size_t keyframes = 0;
  for (const auto &f : frames) {
    FrameOutput fo = est.process(f);
    if (fo.dropped) {
      logger()->debug("t={}: no anchored camera, frame dropped", f.timestamp);
      continue;
    }
    if (fo.snapshot.keyframe) ++keyframes;
    snaps << snapshot_to_json(fo.snapshot).dump() << '\n';
    if (fo.ba)
      for (const auto &row : fo.ba->trace)
        trace << f.timestamp << ',' << row.iteration << ',' << row.energy << ',' << row.lambda << ','
              << row.max_step_norm << '\n';
  }
  if (c.ba) write_text(fs::path(c.output) / "ba_trace.csv", trace.str());
  if (c.method.empty()) c.method = c.ba ? "ba" : "no-ba";
  echo_config(c, "estimate");
  out << "estimate: " << frames.size() << " frames, " << keyframes << " keyframes, " << est.dropped_frames()
      << " dropped -> " << c.output << "\n";
  return kExitOk;
}

int cmd_evaluate(RunConfig c, std::ostream &out) {
  validate(c);
  const std::string &in = single_input(c);
  const fs::path snaps_path = resolve(in, "snapshots.jsonl");
  // Fall back to the dataset the estimate run recorded.
  fs::path data_dir;
  const fs::path est_dir = fs::is_directory(in) ? fs::path(in) : fs::path(in).parent_path();
  const fs::path echoed = est_dir / "run_config.json";
  RunConfig prior;
  if (fs::exists(echoed)) {
    prior = run_config_from_json(read_json(echoed));
    if (!prior.inputs.empty())
      data_dir = fs::is_directory(prior.inputs.front()) ? fs::path(prior.inputs.front())
                                                         : fs::path(prior.inputs.front()).parent_path();
  }
  const fs::path gt_path = !c.gt.empty() ? resolve(c.gt, "ground_truth.jsonl") : data_dir / "ground_truth.jsonl";
  const fs::path models_path = !c.models.empty() ? resolve(c.models, "models.json") : data_dir / "models.json";
  if (c.method.empty()) c.method = prior.method.empty() ? "multicam" : prior.method;
  prepare_output(c);

  std::vector<GraphSnapshot> snaps;
  read_json_lines(snaps_path, [&](const json &doc, std::size_t) { snaps.push_back(snapshot_from_json(doc)); });
  const GroundTruth gt = load_ground_truth(gt_path);
  const ModelRegistry models = load_models(models_path);
  EvalOptions opt;
  opt.method = c.method;
  const EvaluationReport rep = evaluate_run(snaps, gt, models, opt);
  if (rep.no_keyframes) logger()->warn("{}: no keyframes, camera section empty", c.method);
  write_text(fs::path(c.output) / "report.json", report_to_json(rep).dump(1) + "\n");
  echo_config(c, "evaluate");
  out << "evaluate: " << rep.keyframe_count << " keyframes";
  if (rep.camera_mean)
    out << ", camera e_trans " << rep.camera_mean->translation_mm << " mm, e_rot " << rep.camera_mean->rotation_deg
        << " deg";
  out << " -> " << c.output << "\n";
  return kExitOk;
}

int cmd_report(RunConfig c, std::ostream &out) {
  validate(c);
  if (c.inputs.empty()) throw Error(ErrorCode::kInvalidConfig, "--input is required");
  std::vector<EvaluationReport> reports;
  for (const auto &in : c.inputs) reports.push_back(report_from_json(read_json(resolve(in, "report.json"))));
  prepare_output(c);
  EmitOptions opt;
  opt.with_timing = c.with_timing;
  const auto files = emit_report(reports, report_format_from_string(c.format), c.output, opt);
  echo_config(c, "report");
  out << "report: wrote " << files.size() << " file(s) -> " << c.output << "\n";
  return kExitOk;
}

int cmd_bench(RunConfig c, std::ostream &out) {
  validate(c);
  prepare_output(c);
  const SimDataset ds = generate(scene_from(c));
  const auto frames = group_frames(ds.records, c.align_window);
  Estimator est(ds.models, estimator_from(c));
  struct Stat {
    std::size_t n = 0;
    double sum = 0.0, max = 0.0;
    void add(double v) {
      ++n;
      sum += v;
      max = std::max(max, v);
    }
  };
  std::map<std::string, Stat> st;
  for (const auto &f : frames) {
    const FrameOutput fo = est.process(f);
    if (fo.dropped) continue;
    const auto &t = fo.snapshot.timings;
    st["ingest"].add(t.ingest_ms);
    st["matching"].add(t.matching_ms);
    st["aggregation"].add(t.aggregation_ms);
    if (fo.snapshot.keyframe) {
      st["keyframe_matching"].add(t.matching_ms);
      st["keyframe_ba"].add(t.ba_ms);
      st["keyframe_total"].add(t.matching_ms + t.aggregation_ms + t.ba_ms);
    }
  }
  std::ostringstream csv;
  csv << "stage,samples,mean_ms,max_ms\n" << std::fixed << std::setprecision(4);
  for (const char *name : {"ingest", "matching", "aggregation", "keyframe_matching", "keyframe_ba", "keyframe_total"}) {
    const Stat &s = st[name];
    csv << name << ',' << s.n << ',' << (s.n ? s.sum / s.n : 0.0) << ',' << s.max << '\n';
  }
  write_text(fs::path(c.output) / "bench.csv", csv.str());
  echo_config(c, "bench");
  out << csv.str();
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidArgument: return kExitConfig;
    case ErrorCode::kIoError: return kExitIo;
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaVersionMismatch:
    case ErrorCode::kInvalidModel: return kExitData;
    default: return kExitPipeline;
  }
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Markerless multi-camera pose estimation toolkit"};
  app.require_subcommand(1);
  RunConfig flags;
  std::string config_file;
  std::string scene_file;
  // (option, how to copy the flag value into the effective config)
  std::vector<std::pair<CLI::Option *, std::function<void(RunConfig &)>>> bound;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", config_file, "JSON run config; explicit flags win")->check(CLI::ExistingFile);
    auto bind = [&](CLI::Option *o, auto member) {
      bound.emplace_back(o, [member, &flags](RunConfig &c) { c.*member = flags.*member; });
    };
    bind(sub->add_option("--input", flags.inputs, "Input file or directory (repeatable for report)"), &RunConfig::inputs);
    bind(sub->add_option("--output", flags.output, "Output directory"), &RunConfig::output);
    bind(sub->add_option("--seed", flags.seed, "Random seed"), &RunConfig::seed);
    bind(sub->add_option("--preset", flags.preset, "Camera distance preset: near|far"), &RunConfig::preset);
    bind(sub->add_flag("--ba,!--no-ba", flags.ba, "Enable bundle adjustment at keyframes"), &RunConfig::ba);
    bind(sub->add_option("--inlier-thresh", flags.inlier_thresh, "Inlier gate in meters"), &RunConfig::inlier_thresh);
    bind(sub->add_option("--keyframe-thresh", flags.keyframe_thresh, "Keyframe matching error in meters"),
         &RunConfig::keyframe_thresh);
    bind(sub->add_option("--min-inliers", flags.min_inliers, "Minimum object inliers per camera pair"),
         &RunConfig::min_inliers);
    bind(sub->add_option("--ba-iters", flags.ba_iters, "Bundle adjustment iteration cap"), &RunConfig::ba_iters);
    bind(sub->add_option("--ba-tol", flags.ba_tol, "Relative energy change tolerance"), &RunConfig::ba_tol);
    bind(sub->add_option("--huber-delta", flags.huber_delta, "Huber scale in meters"), &RunConfig::huber_delta);
    bind(sub->add_option("--align-window", flags.align_window, "Timestamp alignment window in seconds"),
         &RunConfig::align_window);
    bind(sub->add_option("--depth-noise", flags.depth_noise, "Depth noise along the viewing ray in meters"),
         &RunConfig::depth_noise);
    bind(sub->add_option("--format", flags.format, "Report format: csv|md|svg"), &RunConfig::format);
    bind(sub->add_option("--gt", flags.gt, "Ground truth file or directory"), &RunConfig::gt);
    bind(sub->add_option("--models", flags.models, "Object models file or directory"), &RunConfig::models);
    bind(sub->add_option("--noise", flags.noise, "Simulation noise: default|zero"), &RunConfig::noise);
    bind(sub->add_option("--drift", flags.drift_trans, "SLAM drift, m per sqrt(s)"), &RunConfig::drift_trans);
    bind(sub->add_option("--drift-rot", flags.drift_rot, "SLAM rotational drift, rad per sqrt(s)"),
         &RunConfig::drift_rot);
    bind(sub->add_option("--duration", flags.duration, "Simulated seconds"), &RunConfig::duration);
    bind(sub->add_flag("--with-timing", flags.with_timing, "Include wall-clock runtime tables"),
         &RunConfig::with_timing);
    bind(sub->add_option("--method", flags.method, "Method label in reports"), &RunConfig::method);
  };

  auto *sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  common(sim);
  sim->add_option("--scene", scene_file, "Full scene config JSON (overrides preset/noise/drift)")
      ->check(CLI::ExistingFile);
  auto *est = app.add_subcommand("estimate", "Dataset -> scene graph snapshots");
  common(est);
  auto *eva = app.add_subcommand("evaluate", "Snapshots + ground truth -> report.json");
  common(eva);
  auto *rep = app.add_subcommand("report", "report.json -> CSV, markdown or SVG");
  common(rep);
  auto *bench = app.add_subcommand("bench", "Time every stage on a simulated scene");
  common(bench);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error [cli]: " << e.what() << "\n";
    return kExitUsage;
  }

  std::string stage = "config";
  try {
    RunConfig c;
    if (!config_file.empty()) c = run_config_from_json(read_json(config_file));
    for (auto &[opt, apply] : bound)
      if (opt->count() > 0) apply(c);
    if (sim->parsed()) {
      stage = "simulate";
      return cmd_simulate(c, out, scene_file);
    }
    if (est->parsed()) {
      stage = "estimate";
      return cmd_estimate(c, out);
    }
    if (eva->parsed()) {
      stage = "evaluate";
      return cmd_evaluate(c, out);
    }
    if (rep->parsed()) {
      stage = "report";
      return cmd_report(c, out);
    }
    stage = "bench";
    return cmd_bench(c, out);
  } catch (const Error &e) {
    err << "error [" << stage << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception &e) {
    err << "error [" << stage << "]: " << e.what() << "\n";
    return kExitPipeline;
  }
}

}  // namespace multicam::cli
